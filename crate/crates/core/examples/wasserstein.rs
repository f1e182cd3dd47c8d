//! Exact W1 and W2 between point clouds, with the optimal plan.
//!
//!     cargo run --example wasserstein

use lowdim_synth::metrics::{optimal_transport, wasserstein1, wasserstein2, EmpiricalMeasure, GroundCost, Metric};
use lowdim_synth::noise::SeededGenerator;
use nalgebra::DMatrix;

fn main() -> lowdim_synth::Result<()> {
    let p = DMatrix::from_vec(2, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let q = DMatrix::from_vec(2, 2, vec![0.5, 0.5, 1.0, 1.0]);
    let (mp, mq) = (EmpiricalMeasure::uniform(&p), EmpiricalMeasure::uniform(&q));
    let t = optimal_transport(&mp, &mq, GroundCost { metric: Metric::L2, power: 1 })?;
    println!("W1 = {:.6} (dual {:.6}), masses scaled by {}", t.cost, t.dual, t.scale);
    for (i, j, f) in &t.plan {
        println!("  {i} -> {j}: {f}/{}", t.scale);
    }

    // Larger clouds go through the column generation path.
    let mut gen = SeededGenerator::new(5);
    let n = 3000;
    let a = DMatrix::from_fn(4, n, |_, _| gen.uniform_open());
    let b = DMatrix::from_fn(4, n, |_, _| gen.uniform_open().powi(2));
    let (ma, mb) = (EmpiricalMeasure::uniform(&a), EmpiricalMeasure::uniform(&b));
    let start = std::time::Instant::now();
    let w1 = wasserstein1(&ma, &mb, Metric::LInf)?;
    let w2 = wasserstein2(&ma, &mb, Metric::LInf)?;
    println!("n = {n}: W1 = {w1:.5}, W2 = {w2:.5} in {:.2}s", start.elapsed().as_secs_f64());
    Ok(())
}
