//! Small accuracy sweep and its fitted log-log slope.
//!
//!     cargo run --example sweep

use lowdim_synth::pipeline::Subroutine;
use lowdim_synth::sweep::{run_sweep, SweepConfig};

fn main() -> lowdim_synth::Result<()> {
    let mut config = SweepConfig::new(vec![256, 1024, 4096], 1, 4, 3);
    config.epsilons = vec![4.0];
    config.subroutine = Subroutine::Pmm;
    config.seed = 1;
    config.jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let report = run_sweep(&config)?;
    for row in &report.rows {
        println!("n = {:>5} trial {}: m = {:>5}, W1 = {:?}", row.n, row.trial, row.m, row.w1);
    }
    for group in &report.summary {
        println!("d' = {}: slope {:?}", group.d_prime, group.slope);
    }
    Ok(())
}
