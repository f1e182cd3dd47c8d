//! Hierarchical noisy histogram on two-dimensional coordinates.
//!
//!     cargo run --example pmm_histogram

use lowdim_synth::metrics::{wasserstein1, EmpiricalMeasure, Metric};
use lowdim_synth::noise::SeededGenerator;
use lowdim_synth::pmm::{run, SampleMode};
use nalgebra::DMatrix;

fn main() -> lowdim_synth::Result<()> {
    let mut gen = SeededGenerator::new(3);
    let n = 4000;
    // A blob and a ring inside [-1, 1]^2.
    let mut coords = DMatrix::zeros(2, n);
    for c in 0..n {
        let t = gen.uniform_in(0.0, std::f64::consts::TAU);
        let r = if c % 2 == 0 { 0.2 * gen.uniform_open() } else { 0.7 + 0.05 * gen.uniform_open() };
        coords[(0, c)] = r * t.cos();
        coords[(1, c)] = r * t.sin();
    }
    let input = EmpiricalMeasure::uniform(&coords);

    for eps in [0.5, 2.0, 8.0] {
        let out = run(&coords, 1.0, eps, true, SampleMode::Uniform, &gen.split_index(eps as u64))?;
        let w = wasserstein1(&input, &EmpiricalMeasure::uniform(&out.coords), Metric::LInf)?;
        println!(
            "eps {eps:>4}: depth {:>2}, root scale {:.2}, leaf scale {:.2}, m = {:>4}, W1 = {w:.4}, consistent: {}",
            out.tree.depth(),
            out.scales[0].sigma(),
            out.scales.last().unwrap().sigma(),
            out.coords.ncols(),
            out.tree.is_consistent()
        );
    }
    let exact = run(&coords, 1.0, 2.0, false, SampleMode::LeafCenter, &gen)?;
    let w = wasserstein1(&input, &EmpiricalMeasure::uniform(&exact.coords), Metric::LInf)?;
    println!("zero noise: W1 = {w:.4} <= leaf radius {:.4}", exact.tree.max_leaf_linf_radius());
    Ok(())
}
