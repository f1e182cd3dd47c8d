//! Seeded noise streams and the two Laplace samplers.
//!
//!     cargo run --example noise_streams

use lowdim_synth::noise::{integer_laplace_pmf, sample_integer_laplace, sample_laplace, NoiseScale, SeededGenerator};

fn main() -> lowdim_synth::Result<()> {
    let root = SeededGenerator::new(7);
    let scale = NoiseScale::new(2.0)?;

    // Named sub-streams are independent of each other and of draw order.
    let mut a = root.split("covariance");
    let mut b = root.split("projection");
    println!("covariance stream: {:.4} {:.4}", sample_laplace(scale, &mut a), sample_laplace(scale, &mut a));
    println!("projection stream: {:.4}", sample_laplace(scale, &mut b));
    let mut again = root.split("covariance");
    println!("covariance again:  {:.4}", sample_laplace(scale, &mut again));

    // Empirical integer Laplace frequencies against the exact mass function.
    let mut gen = root.split("counts");
    let n = 200_000;
    let mut hist = std::collections::BTreeMap::new();
    for _ in 0..n {
        *hist.entry(sample_integer_laplace(scale, &mut gen)).or_insert(0u32) += 1;
    }
    println!("{:>4} {:>9} {:>9}", "z", "observed", "exact");
    for z in -4..=4 {
        let seen = f64::from(*hist.get(&z).unwrap_or(&0)) / n as f64;
        println!("{z:>4} {seen:>9.5} {:>9.5}", integer_laplace_pmf(z, scale.sigma()));
    }
    Ok(())
}
