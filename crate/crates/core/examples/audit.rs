//! Monte-Carlo privacy audit of the integer Laplace count and of one
//! covariance entry.
//!
//!     cargo run --example audit

use lowdim_synth::audit::{run_audit, AuditConfig, Mechanism};

fn main() -> lowdim_synth::Result<()> {
    for mechanism in [Mechanism::IntegerLaplaceCount, Mechanism::CovarianceEntry] {
        for eps in [0.5, 1.0] {
            let report = run_audit(&AuditConfig::new(mechanism, eps, 400_000))?;
            println!(
                "{mechanism:?} eps {eps}: max log-ratio {:.4} (SE {:.4}) over {} bins, within bound: {}",
                report.max_log_ratio, report.standard_error, report.bins_used, report.within_bound
            );
        }
    }
    // Same input on both sides: the estimate is pure sampling error.
    let mut same = AuditConfig::new(Mechanism::IntegerLaplaceCount, 1.0, 400_000);
    same.identical = true;
    println!("identical inputs: {:.4}", run_audit(&same)?.max_log_ratio);
    Ok(())
}
