mod common;

use common::bl_projection_lp;
use lowdim_synth::noise::SeededGenerator;
use lowdim_synth::psmm::{
    build_lattice, cell_counts, measure_to_points, project_to_probability, round_counts, run, Lattice,
    ProbabilityLatticeMeasure, SignedLatticeMeasure, DEFAULT_ANCHOR_CAP,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_instance(gen: &mut SeededGenerator, max_anchors: usize) -> (Lattice, SignedLatticeMeasure) {
    let dim = 1 + (gen.next_u64() % 3) as usize;
    // Keys come from {-4..4}^dim, which has 9^dim elements.
    let m = (1 + (gen.next_u64() % max_anchors as u64) as usize).min(9usize.pow(dim as u32));
    let delta = gen.uniform_in(0.05, 0.8);
    let mut keys: Vec<Vec<i64>> = Vec::new();
    while keys.len() < m {
        let k: Vec<i64> = (0..dim).map(|_| (gen.next_u64() % 9) as i64 - 4).collect();
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let lattice = Lattice::from_keys(delta, dim, keys).unwrap();
    let n = 1 + gen.next_u64() % 40;
    let numerators = (0..m).map(|_| (gen.next_u64() % 61) as i64 - 20).collect();
    (lattice, SignedLatticeMeasure { numerators, denominator: n })
}

fn anchors(lattice: &Lattice) -> Vec<Vec<f64>> {
    (0..lattice.len()).map(|i| lattice.anchor(i).to_vec()).collect()
}

#[test]
fn projection_matches_lp_oracle() {
    let mut gen = SeededGenerator::new(515);
    for case in 0..150 {
        let (lattice, nu) = random_instance(&mut gen, if case < 100 { 4 } else { 12 });
        let proj = project_to_probability(&nu, &lattice).unwrap();
        let want = bl_projection_lp(&anchors(&lattice), &nu.weights());
        assert!((proj.objective - want).abs() <= 1e-7, "case {case}: {} vs {want}", proj.objective);
        let total: f64 = proj.mu.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        assert!(proj.objective >= (nu.total_mass() - 1.0).abs() - 1e-12);
    }
}

#[test]
fn lattice_is_exactly_the_anchor_ball() {
    for (radius, delta, dim) in [(1.0, 0.3, 1), (1.2, 0.25, 2), (0.9, 0.4, 3), (2.0, 0.7, 4)] {
        let l = build_lattice(radius, delta, dim, DEFAULT_ANCHOR_CAP).unwrap();
        let bound = radius + delta * (dim as f64).sqrt();
        // Brute-force enumeration of the same rule over a bounding cube.
        let top = (bound / delta).ceil() as i64 + 1;
        let mut expected = Vec::new();
        let mut key = vec![-top; dim];
        loop {
            let norm = key.iter().map(|&k| (k as f64 * delta).powi(2)).sum::<f64>().sqrt();
            if norm <= bound * (1.0 + 1e-12) {
                expected.push(key.clone());
            }
            let mut a = dim;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                if key[a] < top {
                    key[a] += 1;
                    break;
                }
                key[a] = -top;
                if a == 0 {
                    a = usize::MAX;
                    break;
                }
            }
            if a == usize::MAX {
                break;
            }
        }
        let got: Vec<Vec<i64>> = (0..l.len()).map(|i| l.key(i).to_vec()).collect();
        assert_eq!(got, expected, "R={radius} delta={delta} d'={dim}");
    }
}

#[test]
fn full_run_without_noise_keeps_counts() {
    let mut gen = SeededGenerator::new(3);
    let coords = DMatrix::from_fn(2, 80, |_, _| gen.uniform_in(-0.7, 0.7));
    let out = run(&coords, 1.0, 0.2, 1.0, false, DEFAULT_ANCHOR_CAP, &SeededGenerator::new(1)).unwrap();
    // A probability input is its own projection.
    assert_eq!(out.projection.objective, 0.0);
    let counts: Vec<u64> = out.projection.mu.numerators.clone();
    assert_eq!(counts, out.counts);
    assert_eq!(out.coords.ncols(), 80);
    // Each output point is an anchor, repeated as often as its cell count.
    let mut placed = vec![0u64; out.lattice.len()];
    for x in out.coords.column_iter() {
        let key: Vec<i64> = x.iter().map(|v| (v / out.lattice.delta()).round() as i64).collect();
        let i = out.lattice.find(&key).unwrap();
        assert_eq!(out.lattice.anchor(i), x.as_slice());
        placed[i] += 1;
    }
    assert_eq!(placed, out.counts);
    assert_eq!(cell_counts(&coords, &out.lattice).unwrap(), out.counts);
}

#[test]
fn noisy_run_is_seeded() {
    let mut gen = SeededGenerator::new(8);
    let coords = DMatrix::from_fn(3, 50, |_, _| gen.uniform_in(-0.5, 0.5));
    let a = run(&coords, 1.0, 0.3, 1.0, true, DEFAULT_ANCHOR_CAP, &SeededGenerator::new(4)).unwrap();
    let b = run(&coords, 1.0, 0.3, 1.0, true, DEFAULT_ANCHOR_CAP, &SeededGenerator::new(4)).unwrap();
    assert_eq!(a.nu, b.nu);
    assert_eq!(a.coords, b.coords);
    assert!(a.projection.objective >= (a.nu.total_mass() - 1.0).abs() - 1e-12);
}

#[test]
fn measure_to_points_places_anchors() {
    let lattice = Lattice::from_keys(0.5, 1, vec![vec![-1], vec![0], vec![3]]).unwrap();
    let mu = ProbabilityLatticeMeasure::new(vec![1, 0, 3], 4).unwrap();
    let pts = measure_to_points(&mu, &lattice, 8).unwrap();
    assert_eq!(pts.as_slice(), &[-0.5, -0.5, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5]);
    assert!(measure_to_points(&mu, &lattice, 0).is_err());
    assert!(ProbabilityLatticeMeasure::new(vec![1, 1], 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every point of the radius-R ball falls in the cell of a listed anchor
    /// within delta sqrt(d') of it.
    #[test]
    fn ball_is_covered(dim in 1usize..4, radius in 0.3f64..2.0, frac in 0.05f64..0.9, seed in any::<u64>()) {
        let delta = frac * radius;
        let l = build_lattice(radius, delta, dim, DEFAULT_ANCHOR_CAP).unwrap();
        let mut gen = SeededGenerator::new(seed);
        for _ in 0..64 {
            let mut x: Vec<f64> = (0..dim).map(|_| gen.standard_normal()).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = radius * gen.uniform_open().powf(1.0 / dim as f64);
            x.iter_mut().for_each(|v| *v *= r / norm);
            let i = l.locate(&x);
            prop_assert!(i.is_some());
            let a = l.anchor(i.unwrap());
            for (v, c) in x.iter().zip(a) {
                prop_assert!(*c <= *v && *v < c + delta * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rounding_keeps_total_and_stays_near_target(
        numerators in prop::collection::vec(0u64..50, 1..12),
        m_target in 1usize..500,
    ) {
        let den: u64 = numerators.iter().sum();
        prop_assume!(den > 0);
        let mu = ProbabilityLatticeMeasure::new(numerators.clone(), den).unwrap();
        let counts = round_counts(&mu, m_target);
        prop_assert_eq!(counts.iter().sum::<u64>(), m_target as u64);
        for (c, k) in counts.iter().zip(&numerators) {
            let exact = m_target as f64 * *k as f64 / den as f64;
            prop_assert!((*c as f64 - exact).abs() < 1.0);
        }
    }

    #[test]
    fn projection_is_feasible_and_bounded_below(seed in any::<u64>()) {
        let mut gen = SeededGenerator::new(seed);
        let (lattice, nu) = random_instance(&mut gen, 30);
        let proj = project_to_probability(&nu, &lattice).unwrap();
        prop_assert_eq!(proj.mu.numerators.iter().sum::<u64>(), nu.denominator);
        prop_assert!(proj.objective >= (nu.total_mass() - 1.0).abs() - 1e-12);
        // Sending all excess to or from the garbage costs at most sum |nu - mu|.
        let upper: f64 = nu.weights().iter().zip(proj.mu.weights()).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(proj.objective <= upper + 1e-12);
    }
}
