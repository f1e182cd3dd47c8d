//! Private covariance, spectrum, automatic dimension choice and projection.
//!
//!     cargo run --example private_pca

use lowdim_synth::metrics::projection_diagnostics;
use lowdim_synth::noise::SeededGenerator;
use lowdim_synth::pca::{centered_covariance, noisy_projection, private_covariance, select_dimension};
use lowdim_synth::planted::planted_dataset;

fn main() -> lowdim_synth::Result<()> {
    let (d, k, n, eps) = (8, 2, 20_000, 2.0);
    let data = planted_dataset(d, k, n, &mut SeededGenerator::new(1))?;
    let root = SeededGenerator::new(2);

    let exact = centered_covariance(&data).spectrum();
    let cov = private_covariance(&data, eps, &mut root.split("covariance"))?;
    println!("noise scale {:.2e}", cov.noise_scale.unwrap().sigma());
    println!("exact spectrum   {:?}", exact.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>());
    println!("private spectrum {:?}", cov.spectrum.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>());
    let chosen = select_dimension(&cov.spectrum, 0.1, d)?;
    println!("automatic d' = {chosen}");

    let projected = noisy_projection(&data, &cov, k, eps, &mut root.split("projection"))?;
    println!(
        "radius R = {:.4}, private mean error {:.2e}",
        projected.radius,
        (&projected.private_mean - data.mean()).amax()
    );

    let z = data.centered();
    let a_eff = &cov.matrix - &z * z.transpose() / n as f64;
    let diag = projection_diagnostics(&z, &a_eff, &projected.basis, k);
    println!(
        "residual {:.3e} <= tail {:.3e} + 2 d' |A| {:.3e}: {}",
        diag.residual,
        diag.tail,
        2.0 * k as f64 * diag.noise_norm,
        diag.stability_holds
    );
    Ok(())
}
