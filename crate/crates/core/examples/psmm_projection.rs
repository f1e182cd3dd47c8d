//! Lattice counts, signed noisy measure and its projection to a probability
//! measure in the bounded-Lipschitz distance.
//!
//!     cargo run --example psmm_projection

use lowdim_synth::noise::SeededGenerator;
use lowdim_synth::psmm::{
    build_lattice, cell_counts, perturb_to_signed_measure, project_to_probability, DEFAULT_ANCHOR_CAP,
};
use nalgebra::DMatrix;

fn main() -> lowdim_synth::Result<()> {
    let mut gen = SeededGenerator::new(4);
    let (n, radius) = (3000, 1.0);
    let coords = DMatrix::from_fn(3, n, |_, _| gen.uniform_in(-0.5, 0.5));
    let lattice = build_lattice(radius, 0.15, 3, DEFAULT_ANCHOR_CAP)?;
    let counts = cell_counts(&coords, &lattice)?;
    println!("{} anchors, {} occupied", lattice.len(), counts.iter().filter(|&&c| c > 0).count());

    for eps in [0.2, 1.0, 5.0] {
        let nu = perturb_to_signed_measure(&counts, eps, n, &gen.split_index((eps * 10.0) as u64))?;
        let negative = nu.numerators.iter().filter(|&&k| k < 0).count();
        let proj = project_to_probability(&nu, &lattice)?;
        println!(
            "eps {eps:>3}: total mass {:.4}, {negative} negative cells, distance {:.4} (>= {:.4}), moved {:.4}",
            nu.total_mass(),
            proj.objective,
            (nu.total_mass() - 1.0).abs(),
            proj.transported
        );
    }
    Ok(())
}
