mod common;

use common::{hungarian, l2, linf, w1_by_assignment};
use lowdim_synth::metrics::{
    optimal_transport, wasserstein1, wasserstein1_sampled, wasserstein2, EmpiricalMeasure, GroundCost, Metric,
};
use lowdim_synth::noise::SeededGenerator;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cloud(d: usize, n: usize, gen: &mut SeededGenerator) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| gen.uniform_open()).collect()).collect()
}

fn measure(pts: &[Vec<f64>]) -> EmpiricalMeasure {
    let d = pts[0].len();
    EmpiricalMeasure::uniform(&DMatrix::from_vec(d, pts.len(), pts.concat()))
}

/// Checks primal feasibility of the plan and dual feasibility of the
/// potentials over every source/target pair.
fn assert_certificate(p: &EmpiricalMeasure, q: &EmpiricalMeasure, cost: GroundCost) -> f64 {
    let t = optimal_transport(p, q, cost).unwrap();
    let (fa, fb) = (t.scale / p.total_mass(), t.scale / q.total_mass());
    let mut out = vec![0u64; p.len()];
    let mut inn = vec![0u64; q.len()];
    let mut primal = 0.0;
    for &(i, j, f) in &t.plan {
        out[i] += f;
        inn[j] += f;
        primal += cost.eval(p.point(i), q.point(j)) * f as f64;
    }
    for i in 0..p.len() {
        assert_eq!(out[i], p.mass(i) * fa);
    }
    for j in 0..q.len() {
        assert_eq!(inn[j], q.mass(j) * fb);
    }
    let primal = primal / t.scale as f64;
    assert!((primal - t.cost).abs() <= 1e-12 * (1.0 + primal));
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        for j in 0..q.len() {
            let reduced = cost.eval(p.point(i), q.point(j)) + t.source_potential[i] - t.target_potential[j];
            worst = worst.min(reduced);
        }
    }
    assert!(worst >= -1e-9, "reduced cost {worst}");
    assert!((t.dual - t.cost).abs() <= 1e-9 * (1.0 + t.cost), "{} vs {}", t.dual, t.cost);
    t.cost
}

#[test]
fn small_instances_match_assignment_oracle() {
    let mut gen = SeededGenerator::new(2024);
    for case in 0..200 {
        let d = 1 + case % 5;
        let a = 1 + (gen.next_u64() % 7) as usize;
        let b = 1 + (gen.next_u64() % 7) as usize;
        let p = cloud(d, a, &mut gen);
        let q = cloud(d, b, &mut gen);
        let (mp, mq) = (measure(&p), measure(&q));
        let got = wasserstein1(&mp, &mq, Metric::LInf).unwrap();
        let want = w1_by_assignment(&p, &q, linf);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
        let got = wasserstein1(&mp, &mq, Metric::L2).unwrap();
        let want = w1_by_assignment(&p, &q, l2);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
    }
}

#[test]
fn one_dimensional_sorted_matching() {
    // In one dimension the monotone coupling is optimal for every convex cost.
    let mut gen = SeededGenerator::new(6);
    for n in [5usize, 50, 400] {
        let mut p: Vec<f64> = (0..n).map(|_| gen.uniform_open()).collect();
        let mut q: Vec<f64> = (0..n).map(|_| gen.uniform_open()).collect();
        let mp = EmpiricalMeasure::uniform(&DMatrix::from_vec(1, n, p.clone()));
        let mq = EmpiricalMeasure::uniform(&DMatrix::from_vec(1, n, q.clone()));
        p.sort_by(f64::total_cmp);
        q.sort_by(f64::total_cmp);
        let w1: f64 = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        let w2: f64 = (p.iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((wasserstein1(&mp, &mq, Metric::LInf).unwrap() - w1).abs() < 1e-12);
        assert!((wasserstein2(&mp, &mq, Metric::L2).unwrap() - w2).abs() < 1e-12);
    }
}

#[test]
fn sparse_path_is_optimal() {
    // 1500 x 1500 exceeds the dense arc limit, so the column generation path runs.
    let mut gen = SeededGenerator::new(31);
    let n = 1500;
    let p = cloud(2, n, &mut gen);
    let q = cloud(2, n, &mut gen);
    let (mp, mq) = (measure(&p), measure(&q));
    let cost = GroundCost { metric: Metric::L2, power: 1 };
    let got = assert_certificate(&mp, &mq, cost);
    let matrix: Vec<Vec<f64>> = p.iter().map(|x| q.iter().map(|y| l2(x, y)).collect()).collect();
    let want = hungarian(&matrix) / n as f64;
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn sparse_path_one_dimensional() {
    let mut gen = SeededGenerator::new(32);
    let (a, b) = (1600, 1400);
    let p: Vec<f64> = (0..a).map(|_| gen.uniform_open()).collect();
    let q: Vec<f64> = (0..b).map(|_| gen.uniform_open()).collect();
    let mp = EmpiricalMeasure::uniform(&DMatrix::from_vec(1, a, p.clone()));
    let mq = EmpiricalMeasure::uniform(&DMatrix::from_vec(1, b, q.clone()));
    // W1 = integral of |F - G|.
    let mut events: Vec<(f64, f64)> = p.iter().map(|&x| (x, 1.0 / a as f64)).collect();
    events.extend(q.iter().map(|&y| (y, -1.0 / b as f64)));
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut acc = 0.0;
    let mut want = 0.0;
    for w in events.windows(2) {
        acc += w[0].1;
        want += acc.abs() * (w[1].0 - w[0].0);
    }
    let got = assert_certificate(&mp, &mq, GroundCost { metric: Metric::LInf, power: 1 });
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn weighted_measures_and_merging() {
    let pts = DMatrix::from_vec(1, 3, vec![0.0, 0.0, 1.0]);
    let p = EmpiricalMeasure::uniform(&pts);
    let merged = p.merged();
    assert_eq!(merged.len(), 2);
    assert_eq!(merged.mass(0), 2);
    let q = EmpiricalMeasure::with_masses(&DMatrix::from_vec(1, 2, vec![0.0, 1.0]), vec![2, 1]).unwrap();
    assert_eq!(wasserstein1(&p, &q, Metric::LInf).unwrap(), 0.0);
    assert!(EmpiricalMeasure::with_masses(&pts, vec![1, 2]).is_err());
    assert!(EmpiricalMeasure::with_masses(&pts, vec![0, 0, 0]).is_err());
}

#[test]
fn rejects_bad_inputs() {
    let p = measure(&[vec![0.0, 0.0]]);
    let q = measure(&[vec![0.0]]);
    assert!(wasserstein1(&p, &q, Metric::LInf).is_err());
    let empty = EmpiricalMeasure::uniform(&DMatrix::zeros(2, 0));
    assert!(wasserstein1(&p, &empty, Metric::LInf).is_err());
}

#[test]
fn sampled_estimate_is_labelled() {
    let mut gen = SeededGenerator::new(1);
    let p = measure(&cloud(3, 200, &mut gen));
    let q = measure(&cloud(3, 300, &mut gen));
    let est = wasserstein1_sampled(&p, &q, Metric::LInf, 100, &mut gen).unwrap();
    assert!(est.approximate);
    assert_eq!(est.sample_size, 100);
    let exact = wasserstein1(&p, &q, Metric::LInf).unwrap();
    assert!(est.value > 0.0 && (est.value - exact).abs() < 0.2);
}

fn small_cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metric_axioms(p in small_cloud(), q in small_cloud(), r in small_cloud()) {
        let (mp, mq, mr) = (measure(&p), measure(&q), measure(&r));
        for metric in [Metric::LInf, Metric::L2, Metric::L1] {
            let pq = wasserstein1(&mp, &mq, metric).unwrap();
            let qp = wasserstein1(&mq, &mp, metric).unwrap();
            let pr = wasserstein1(&mp, &mr, metric).unwrap();
            let rq = wasserstein1(&mr, &mq, metric).unwrap();
            prop_assert!(pq >= 0.0);
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!(pq <= pr + rq + 1e-12);
            prop_assert_eq!(wasserstein1(&mp, &mp, metric).unwrap(), 0.0);
            prop_assert!(pq <= wasserstein2(&mp, &mq, metric).unwrap() + 1e-12);
        }
    }

    /// Every coordinate function is 1-Lipschitz in any of the metrics, so the
    /// gap of coordinate means bounds W1 from below.
    #[test]
    fn duality_lower_bound(p in small_cloud(), q in small_cloud()) {
        let (mp, mq) = (measure(&p), measure(&q));
        let w = wasserstein1(&mp, &mq, Metric::LInf).unwrap();
        for k in 0..3 {
            let a = p.iter().map(|x| x[k]).sum::<f64>() / p.len() as f64;
            let b = q.iter().map(|x| x[k]).sum::<f64>() / q.len() as f64;
            prop_assert!((a - b).abs() <= w + 1e-12);
        }
    }

    #[test]
    fn certificate_holds(p in small_cloud(), q in small_cloud(), power in 1u32..3) {
        let cost = GroundCost { metric: Metric::L2, power };
        assert_certificate(&measure(&p), &measure(&q), cost);
    }
}
