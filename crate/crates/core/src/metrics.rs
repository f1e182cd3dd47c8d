//! Exact Wasserstein distances between finitely supported measures, plus the
//! projection-stability diagnostics evaluated on every pipeline run.
//!
//! Masses are integers. Two measures with totals `A` and `B` are compared on
//! the common denominator `lcm(A, B)`, which turns the transport problem into
//! an integral min-cost flow solved by [`crate::flow::NetworkSimplex`].
//! Small instances use the complete bipartite graph. Large ones start from a
//! nearest-neighbour arc set plus a dominated hub node and add every arc that
//! prices out negatively against the current potentials until none does, so
//! the returned value is still the exact optimum.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowStatus, NetworkSimplex};
use crate::kdtree::KdTree;
use crate::noise::SeededGenerator;
use crate::pca::{sorted_symmetric_eigen, spectral_norm};

/// Ground metric on the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    LInf,
    L2,
    L1,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let gaps = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::LInf => gaps.fold(0.0, f64::max),
            Metric::L2 => gaps.map(|g| g * g).sum::<f64>().sqrt(),
            Metric::L1 => gaps.sum(),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" | "inf" => Ok(Metric::LInf),
            "l2" => Ok(Metric::L2),
            "l1" => Ok(Metric::L1),
            other => Err(Error::param("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// Transport cost `distance^power`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundCost {
    pub metric: Metric,
    pub power: u32,
}

impl GroundCost {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        self.raise(self.metric.distance(a, b))
    }

    /// Cost of a displacement with the given per-axis absolute gaps.
    pub fn from_gaps(self, gaps: impl Iterator<Item = f64>) -> f64 {
        let d = match self.metric {
            Metric::LInf => gaps.fold(0.0, f64::max),
            Metric::L2 => gaps.map(|g| g * g).sum::<f64>().sqrt(),
            Metric::L1 => gaps.sum(),
        };
        self.raise(d)
    }

    fn raise(self, d: f64) -> f64 {
        match self.power {
            1 => d,
            2 => d * d,
            p => d.powi(p as i32),
        }
    }
}

/// Finitely supported measure with integer masses; weights are `mass / total`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    support: Vec<f64>,
    masses: Vec<u64>,
}

impl EmpiricalMeasure {
    /// Uniform measure on the columns of a `d x k` matrix.
    pub fn uniform(points: &DMatrix<f64>) -> Self {
        EmpiricalMeasure { dim: points.nrows(), support: points.as_slice().to_vec(), masses: vec![1; points.ncols()] }
    }

    pub fn with_masses(points: &DMatrix<f64>, masses: Vec<u64>) -> Result<Self> {
        if masses.len() != points.ncols() {
            return Err(Error::param("masses", "length differs from support size"));
        }
        if masses.iter().all(|&m| m == 0) && !masses.is_empty() {
            return Err(Error::param("masses", "total mass is zero"));
        }
        Ok(EmpiricalMeasure { dim: points.nrows(), support: points.as_slice().to_vec(), masses })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mass(&self, i: usize) -> u64 {
        self.masses[i]
    }

    pub fn total_mass(&self) -> u64 {
        self.masses.iter().sum()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.masses[i] as f64 / self.total_mass() as f64
    }

    /// Same measure with coincident support points merged.
    pub fn merged(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.masses[i] > 0).collect();
        idx.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut support = Vec::new();
        let mut masses: Vec<u64> = Vec::new();
        let mut prev: Option<usize> = None;
        for i in idx {
            match prev {
                Some(p) if self.point(p) == self.point(i) => *masses.last_mut().unwrap() += self.masses[i],
                _ => {
                    support.extend_from_slice(self.point(i));
                    masses.push(self.masses[i]);
                }
            }
            prev = Some(i);
        }
        EmpiricalMeasure { dim: self.dim, support, masses }
    }
}

/// Optimal transport between two measures.
#[derive(Debug, Clone)]
pub struct Transport {
    /// Optimal cost with unit total mass.
    pub cost: f64,
    /// Dual objective from the node potentials, same normalisation.
    pub dual: f64,
    /// Common mass denominator.
    pub scale: u64,
    /// `(source index, target index, scaled mass)` for every arc with flow.
    pub plan: Vec<(usize, usize, u64)>,
    /// Potentials of the source and target supports (unit-mass normalisation not applied).
    pub source_potential: Vec<f64>,
    pub target_potential: Vec<f64>,
    pub pricing_rounds: usize,
    pub pivots: usize,
}

const DENSE_ARC_LIMIT: usize = 1 << 21;
const NEIGHBOURS: usize = 6;
/// Arcs added per node and direction in one pricing round.
const PRICED_PER_NODE: usize = 32;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact optimal transport with ground cost `metric^power`.
pub fn optimal_transport(p: &EmpiricalMeasure, q: &EmpiricalMeasure, cost: GroundCost) -> Result<Transport> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::param("measure", "both measures must be nonempty"));
    }
    if p.dim() != q.dim() {
        return Err(Error::param("measure", "dimension mismatch"));
    }
    let (ta, tb) = (p.total_mass(), q.total_mass());
    if ta == 0 || tb == 0 {
        return Err(Error::param("measure", "zero total mass"));
    }
    let g = gcd(ta, tb);
    let scale = (ta / g)
        .checked_mul(tb)
        .filter(|&l| l <= (i64::MAX as u64) / 4)
        .ok_or_else(|| Error::SizeOverflow { reason: format!("lcm({ta}, {tb}) overflows") })?;
    let (fa, fb) = (scale / ta, scale / tb);

    let (a, b) = (p.len(), q.len());
    let mut supply: Vec<i64> = Vec::with_capacity(a + b + 1);
    supply.extend((0..a).map(|i| (p.mass(i) * fa) as i64));
    supply.extend((0..b).map(|j| -((q.mass(j) * fb) as i64)));

    let dense = a.saturating_mul(b) <= DENSE_ARC_LIMIT;
    let diameter = bounding_cost(p, q, cost);
    // Two hub hops always cost more than any direct arc.
    let hub_cost = 1.5 * diameter + 1e-9;
    if !dense {
        supply.push(0);
    }
    let mut ns = NetworkSimplex::new(supply, hub_cost)?;
    let mut rounds = 0;

    if dense {
        for i in 0..a {
            for j in 0..b {
                ns.add_arc(i, a + j, cost.eval(p.point(i), q.point(j)));
            }
        }
        if ns.solve()? != FlowStatus::Optimal {
            return Err(Error::Solver { iterations: ns.iterations(), reason: "transport infeasible".into() });
        }
    } else {
        let hub = a + b;
        for i in 0..a {
            ns.add_arc(i, hub, hub_cost);
        }
        for j in 0..b {
            ns.add_arc(hub, a + j, hub_cost);
        }
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        let mut p_tree = KdTree::new(&p.support, p.dim());
        let mut q_tree = KdTree::new(&q.support, q.dim());
        for j in 0..b {
            for (i, c) in p_tree.nearest(q.point(j), cost, NEIGHBOURS) {
                if seen.insert((i as u32, j as u32)) {
                    ns.add_arc(i, a + j, c);
                }
            }
        }
        for i in 0..a {
            for (j, c) in q_tree.nearest(p.point(i), cost, NEIGHBOURS) {
                if seen.insert((i as u32, j as u32)) {
                    ns.add_arc(i, a + j, c);
                }
            }
        }
        let tol = ns.tolerance().max(1e-12 * hub_cost);
        loop {
            if ns.solve()? != FlowStatus::Optimal {
                return Err(Error::Solver { iterations: ns.iterations(), reason: "transport infeasible".into() });
            }
            rounds += 1;
            let pi_p: Vec<f64> = (0..a).map(|i| ns.potential(i)).collect();
            let neg_pi_q: Vec<f64> = (0..b).map(|j| -ns.potential(a + j)).collect();
            p_tree.set_weights(&pi_p);
            q_tree.set_weights(&neg_pi_q);
            let mut added = 0;
            // Arc i -> j prices out when c_ij + pi_i - pi_j < 0.
            for j in 0..b {
                let bound = -neg_pi_q[j] - tol;
                for (i, _) in p_tree.best_k_below(q.point(j), cost, bound, PRICED_PER_NODE) {
                    if seen.insert((i as u32, j as u32)) {
                        ns.add_arc(i, a + j, cost.eval(p.point(i), q.point(j)));
                        added += 1;
                    }
                }
            }
            for i in 0..a {
                let bound = -pi_p[i] - tol;
                for (j, _) in q_tree.best_k_below(p.point(i), cost, bound, PRICED_PER_NODE) {
                    if seen.insert((i as u32, j as u32)) {
                        ns.add_arc(i, a + j, cost.eval(p.point(i), q.point(j)));
                        added += 1;
                    }
                }
            }
            if added == 0 {
                break;
            }
        }
    }

    let mut plan = Vec::new();
    let mut total = 0.0;
    for (arc, f) in ns.flows() {
        let (u, v) = (ns.arc_source(arc), ns.arc_target(arc));
        if u < a && v >= a && v < a + b {
            plan.push((u, v - a, f as u64));
            total += ns.arc_cost(arc) * f as f64;
        } else {
            return Err(Error::Solver {
                iterations: ns.iterations(),
                reason: "optimal plan routes mass through the hub".into(),
            });
        }
    }
    plan.sort_unstable();
    let scale_f = scale as f64;
    Ok(Transport {
        cost: total / scale_f,
        dual: ns.dual_value() / scale_f,
        scale,
        plan,
        source_potential: (0..a).map(|i| ns.potential(i)).collect(),
        target_potential: (0..b).map(|j| ns.potential(a + j)).collect(),
        pricing_rounds: rounds,
        pivots: ns.iterations(),
    })
}

fn bounding_cost(p: &EmpiricalMeasure, q: &EmpiricalMeasure, cost: GroundCost) -> f64 {
    let dim = p.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for m in [p, q] {
        for i in 0..m.len() {
            for (k, &x) in m.point(i).iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
    }
    cost.from_gaps(lo.iter().zip(&hi).map(|(l, h)| h - l))
}

/// Exact 1-Wasserstein distance.
pub fn wasserstein1(p: &EmpiricalMeasure, q: &EmpiricalMeasure, metric: Metric) -> Result<f64> {
    Ok(optimal_transport(p, q, GroundCost { metric, power: 1 })?.cost)
}

/// Exact 2-Wasserstein distance.
pub fn wasserstein2(p: &EmpiricalMeasure, q: &EmpiricalMeasure, metric: Metric) -> Result<f64> {
    Ok(optimal_transport(p, q, GroundCost { metric, power: 2 })?.cost.max(0.0).sqrt())
}

/// Approximate W1 from random subsamples of both measures. Not an oracle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampledEstimate {
    pub value: f64,
    pub sample_size: usize,
    pub approximate: bool,
}

pub fn wasserstein1_sampled(
    p: &EmpiricalMeasure,
    q: &EmpiricalMeasure,
    metric: Metric,
    sample_size: usize,
    gen: &mut SeededGenerator,
) -> Result<SampledEstimate> {
    let draw = |m: &EmpiricalMeasure, gen: &mut SeededGenerator| {
        let total = m.total_mass();
        let mut cumulative = Vec::with_capacity(m.len());
        let mut acc = 0u64;
        for i in 0..m.len() {
            acc += m.mass(i);
            cumulative.push(acc);
        }
        let mut pts = Vec::with_capacity(sample_size * m.dim());
        for _ in 0..sample_size {
            let r = gen.next_u64() % total;
            let i = cumulative.partition_point(|&c| c <= r);
            pts.extend_from_slice(m.point(i));
        }
        DMatrix::from_vec(m.dim(), sample_size, pts)
    };
    let sp = EmpiricalMeasure::uniform(&draw(p, gen));
    let sq = EmpiricalMeasure::uniform(&draw(q, gen));
    Ok(SampledEstimate { value: wasserstein1(&sp, &sq, metric)?, sample_size, approximate: true })
}

/// Quantities of the noisy-projection stability bound for one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProjectionDiagnostics {
    /// (1/n) ||Z - V V^T Z||_F^2
    pub residual: f64,
    /// Sum of the eigenvalues of (1/n) Z Z^T beyond the first d'.
    pub tail: f64,
    /// Spectral norm of the perturbation.
    pub noise_norm: f64,
    /// max_{i <= d'} |sigma_i((1/n) Z Z^T) - sigma_i((1/n) Z Z^T + A)|
    pub weyl_gap: f64,
    pub stability_holds: bool,
    pub weyl_holds: bool,
}

const DIAGNOSTIC_SLACK: f64 = 1e-9;

/// Evaluates the stability inequality `residual <= tail + 2 d' ||A||` and the
/// Weyl bound on the top `d'` eigenvalues for centered data `z` (d x n),
/// symmetric perturbation `a` and orthonormal basis `basis` (d x d').
pub fn projection_diagnostics(
    z: &DMatrix<f64>,
    a: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    d_prime: usize,
) -> ProjectionDiagnostics {
    let n = z.ncols() as f64;
    let d = z.nrows();
    let gram = z * z.transpose() / n;
    let projected = basis * (basis.transpose() * z);
    let residual = (z - projected).norm_squared() / n;
    let (clean, _) = sorted_symmetric_eigen(&gram);
    let (noisy, _) = sorted_symmetric_eigen(&(&gram + a));
    let tail: f64 = clean.iter().skip(d_prime).map(|&s| s.max(0.0)).sum();
    let noise_norm = spectral_norm(a);
    let weyl_gap = (0..d_prime.min(d)).map(|i| (clean[i] - noisy[i]).abs()).fold(0.0, f64::max);
    ProjectionDiagnostics {
        residual,
        tail,
        noise_norm,
        weyl_gap,
        stability_holds: residual <= tail + 2.0 * d_prime as f64 * noise_norm + DIAGNOSTIC_SLACK,
        weyl_holds: weyl_gap <= noise_norm + DIAGNOSTIC_SLACK,
    }
}
