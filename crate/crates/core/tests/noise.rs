use lowdim_synth::noise::{
    integer_laplace_pmf, laplace_from_uniform, sample_integer_laplace, sample_laplace, sample_symmetric_laplace_matrix,
    NoiseScale, SeededGenerator,
};
use proptest::prelude::*;

fn scale(s: f64) -> NoiseScale {
    NoiseScale::new(s).unwrap()
}

#[test]
fn scale_rejects_bad_values() {
    for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(NoiseScale::new(s).is_err(), "{s}");
    }
}

#[test]
fn laplace_moments() {
    let mut gen = SeededGenerator::new(11);
    let sigma = 0.7;
    let n = 400_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_laplace(scale(sigma), &mut gen)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let abs = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    // E|X| = sigma, Var X = 2 sigma^2.
    assert!(mean.abs() < 0.01, "{mean}");
    assert!((abs - sigma).abs() < 0.01, "{abs}");
    assert!((var - 2.0 * sigma * sigma).abs() < 0.02, "{var}");
}

#[test]
fn integer_laplace_pmf_is_normalised() {
    for sigma in [0.3f64, 1.0, 4.5] {
        // Two-sided geometric series, summed directly.
        let p = (-1.0 / sigma).exp();
        let mut total = 0.0;
        for z in -400..=400i64 {
            let pmf = integer_laplace_pmf(z, sigma);
            assert!((pmf - (1.0 - p) / (1.0 + p) * p.powi(z.unsigned_abs() as i32)).abs() < 1e-15);
            total += pmf;
        }
        assert!((total - 1.0).abs() < 1e-12, "{sigma}: {total}");
    }
}

#[test]
fn integer_laplace_frequencies_match_pmf() {
    let sigma = 2.0;
    let n = 500_000;
    let mut gen = SeededGenerator::new(5);
    let mut hist = std::collections::BTreeMap::new();
    for _ in 0..n {
        *hist.entry(sample_integer_laplace(scale(sigma), &mut gen)).or_insert(0u64) += 1;
    }
    for z in -6..=6 {
        let expected = integer_laplace_pmf(z, sigma) * n as f64;
        let got = *hist.get(&z).unwrap_or(&0) as f64;
        let sd = expected.sqrt();
        assert!((got - expected).abs() < 5.0 * sd, "z={z}: {got} vs {expected}");
    }
}

#[test]
fn symmetric_matrix_shape_and_diagonal_scale() {
    let sigma = 0.5;
    let d = 4;
    let mut gen = SeededGenerator::new(9);
    let reps = 20_000;
    let (mut diag_sq, mut off_sq) = (0.0, 0.0);
    for _ in 0..reps {
        let a = sample_symmetric_laplace_matrix(d, scale(sigma), &mut gen).unwrap();
        assert_eq!(a, a.transpose());
        diag_sq += a[(1, 1)] * a[(1, 1)];
        off_sq += a[(0, 2)] * a[(0, 2)];
    }
    // Var(Lap(s)) = 2 s^2 off the diagonal and 4 * 2 s^2 on it.
    let off = off_sq / reps as f64;
    let diag = diag_sq / reps as f64;
    assert!((off - 0.5).abs() < 0.05, "{off}");
    assert!((diag - 2.0).abs() < 0.2, "{diag}");
    assert!(sample_symmetric_laplace_matrix(0, scale(1.0), &mut gen).is_err());
}

#[test]
fn streams_are_reproducible_and_independent() {
    let root = SeededGenerator::new(42);
    let a: Vec<u64> = {
        let mut g = root.split("covariance");
        (0..4).map(|_| g.next_u64()).collect()
    };
    let b: Vec<u64> = {
        let mut g = root.split("covariance");
        (0..4).map(|_| g.next_u64()).collect()
    };
    let c: Vec<u64> = {
        let mut g = root.split("projection");
        (0..4).map(|_| g.next_u64()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
    let mut x = root.split_index(3);
    let mut y = root.split_index(4);
    assert_ne!(x.next_u64(), y.next_u64());
}

proptest! {
    #[test]
    fn inverse_cdf_is_odd_and_monotone(u in 0.0001f64..0.9999, v in 0.0001f64..0.9999, s in 0.01f64..10.0) {
        let fu = laplace_from_uniform(u, s);
        prop_assert!((fu + laplace_from_uniform(1.0 - u, s)).abs() <= 1e-9 * (1.0 + fu.abs()));
        if u < v {
            prop_assert!(fu <= laplace_from_uniform(v, s));
        }
    }

    #[test]
    fn uniform_in_stays_in_range(seed in any::<u64>(), lo in -5.0f64..5.0, w in 1e-6f64..3.0) {
        let mut gen = SeededGenerator::new(seed);
        for _ in 0..32 {
            let x = gen.uniform_in(lo, lo + w);
            prop_assert!(x >= lo && x <= lo + w);
        }
    }
}
