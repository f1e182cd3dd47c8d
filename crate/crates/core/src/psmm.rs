//! Noisy lattice histogram projected onto probability measures.
//!
//! Counts on the cells of a `delta`-lattice are perturbed into a signed
//! measure `nu`, which is then replaced by the probability vector `mu`
//! minimising the bounded-Lipschitz distance to `nu` under the Euclidean
//! anchor metric. That minimisation is a linear program; here it is solved as
//! an uncapacitated min-cost flow on integer supplies scaled by `n`:
//!
//! * each anchor `i` supplies `n_i + lambda_i` and may ship to any other
//!   anchor at cost `|v_i - v_j|_2`;
//! * a sink `T` demands `n` and receives `n mu_i` from anchor `i` at cost 0;
//! * a garbage node `G` supplies `n - sum(n_i + lambda_i)` and exchanges mass
//!   with every anchor at cost 1 (destruction and creation).
//!
//! Total unimodularity makes the optimal `mu` a vector of multiples of `1/n`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::flow::{FlowStatus, NetworkSimplex};
use crate::kdtree::KdTree;
use crate::metrics::{GroundCost, Metric};
use crate::noise::{sample_integer_laplace, NoiseScale, SeededGenerator};

pub const DEFAULT_ANCHOR_CAP: usize = 5_000_000;

/// Above this many anchors the complete anchor graph is priced lazily.
const DENSE_ANCHOR_LIMIT: usize = 1200;

const SHORTCUT_COST: f64 = 3.0;

/// Squared length bound of the lattice offsets wired up before pricing starts.
const SEED_NORM2: i64 = 6;

/// Cell side rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    /// sqrt(d / d') (epsilon n)^(-1/d')
    #[default]
    Alg5,
    /// R / sqrt(d') (epsilon n)^(-1/d')
    Proof,
}

impl std::str::FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alg5" => Ok(DeltaMode::Alg5),
            "proof" => Ok(DeltaMode::Proof),
            _ => Err(Error::param("delta-mode", format!("expected alg5 or proof, got {s:?}"))),
        }
    }
}

pub fn lattice_delta(d: usize, d_prime: usize, epsilon: f64, n: usize, mode: DeltaMode, radius: f64) -> Result<f64> {
    check_budget(epsilon)?;
    if d_prime == 0 || d_prime > d {
        return Err(Error::InvalidDimension { got: d_prime, min: 1, max: d });
    }
    let x = epsilon * n as f64;
    if x <= 1.0 {
        return Err(Error::InvalidRegime(x));
    }
    let k = d_prime as f64;
    let shrink = x.powf(-1.0 / k);
    Ok(match mode {
        DeltaMode::Alg5 => (d as f64 / k).sqrt() * shrink,
        DeltaMode::Proof => radius / k.sqrt() * shrink,
    })
}

/// Anchors `delta * k`, `k` integer, with `|delta k|_2 <= R + delta sqrt(d')`, in
/// lexicographic order of `k`.
#[derive(Debug, Clone)]
pub struct Lattice {
    delta: f64,
    radius: f64,
    dim: usize,
    keys: Vec<i64>,
    anchors: Vec<f64>,
}

impl Lattice {
    /// Arbitrary set of lattice sites (duplicates dropped). The radius is the
    /// largest anchor norm.
    pub fn from_keys(delta: f64, dim: usize, mut keys: Vec<Vec<i64>>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::param("delta", format!("must be finite and > 0, got {delta}")));
        }
        if dim == 0 || keys.is_empty() || keys.iter().any(|k| k.len() != dim) {
            return Err(Error::param("keys", format!("need at least one key, each of length {dim}")));
        }
        keys.sort();
        keys.dedup();
        let flat: Vec<i64> = keys.concat();
        let anchors: Vec<f64> = flat.iter().map(|&k| k as f64 * delta).collect();
        let radius = anchors.chunks(dim).map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        Ok(Lattice { delta, radius, dim, keys: flat, anchors })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, i: usize) -> &[i64] {
        &self.keys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.dim..(i + 1) * self.dim]
    }

    /// All anchors as a `d' x m` matrix.
    pub fn anchor_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.len(), &self.anchors)
    }

    pub fn find(&self, key: &[i64]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.key(mid).cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Index of the anchor `delta * floor(x / delta)`, if listed.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let key: Vec<i64> = x.iter().map(|&v| (v / self.delta).floor() as i64).collect();
        self.find(&key)
    }

    /// Euclidean distance between anchors.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let s: i64 = self.key(i).iter().zip(self.key(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        self.delta * (s as f64).sqrt()
    }
}

pub fn build_lattice(radius: f64, delta: f64, d_prime: usize, cap: usize) -> Result<Lattice> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param("radius", format!("must be finite and > 0, got {radius}")));
    }
    if !(delta.is_finite() && delta > 0.0 && delta <= 2.0 * radius) {
        return Err(Error::param("delta", format!("must lie in (0, 2R], got {delta}")));
    }
    if d_prime == 0 {
        return Err(Error::InvalidDimension { got: 0, min: 1, max: usize::MAX });
    }
    let reach = (radius + delta * (d_prime as f64).sqrt()) / delta;
    // Largest integer L with L <= reach^2; the anchor rule is |k|^2 <= L.
    let mut limit = (reach * reach).floor() as i64;
    while ((limit + 1) as f64) <= reach * reach {
        limit += 1;
    }
    while limit > 0 && (limit as f64) > reach * reach {
        limit -= 1;
    }
    let estimate = unit_ball_volume(d_prime) * reach.powi(d_prime as i32);
    if estimate > 2.0 * cap as f64 {
        return Err(Error::LatticeTooLarge { count: estimate as usize, cap });
    }
    let mut keys = Vec::new();
    let mut current = vec![0i64; d_prime];
    enumerate(&mut current, 0, limit, &mut keys, cap)?;
    let anchors = keys.iter().map(|&k| k as f64 * delta).collect();
    Ok(Lattice { delta, radius, dim: d_prime, keys, anchors })
}

fn enumerate(current: &mut [i64], axis: usize, budget: i64, out: &mut Vec<i64>, cap: usize) -> Result<()> {
    if axis == current.len() {
        if out.len() / current.len() >= cap {
            return Err(Error::LatticeTooLarge { count: cap + 1, cap });
        }
        out.extend_from_slice(current);
        return Ok(());
    }
    let mut top = (budget as f64).sqrt() as i64;
    while top * top > budget {
        top -= 1;
    }
    while (top + 1) * (top + 1) <= budget {
        top += 1;
    }
    for k in -top..=top {
        current[axis] = k;
        enumerate(current, axis + 1, budget - k * k, out, cap)?;
    }
    Ok(())
}

fn unit_ball_volume(d: usize) -> f64 {
    let mut vols = vec![1.0, 2.0];
    for k in 2..=d {
        vols.push(2.0 * std::f64::consts::PI / k as f64 * vols[k - 2]);
    }
    vols[d]
}

/// Number of points in each anchor's cell.
pub fn cell_counts(coords: &DMatrix<f64>, lattice: &Lattice) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; lattice.len()];
    for (i, x) in coords.column_iter().enumerate() {
        let slot = lattice.locate(x.as_slice()).ok_or_else(|| Error::OutOfDomain {
            index: i,
            reason: format!("no lattice cell covers the point (norm {})", x.norm()),
        })?;
        counts[slot] += 1;
    }
    Ok(counts)
}

/// Weights `numerators[i] / denominator`; entries and total may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedLatticeMeasure {
    pub numerators: Vec<i64>,
    pub denominator: u64,
}

impl SignedLatticeMeasure {
    pub fn from_draws(counts: &[u64], draws: &[i64], n: usize) -> Self {
        assert_eq!(counts.len(), draws.len());
        let numerators = counts.iter().zip(draws).map(|(&c, &z)| c as i64 + z).collect();
        SignedLatticeMeasure { numerators, denominator: n as u64 }
    }

    pub fn weights(&self) -> Vec<f64> {
        let den = self.denominator as f64;
        self.numerators.iter().map(|&k| k as f64 / den).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.numerators.iter().sum::<i64>() as f64 / self.denominator as f64
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }
}

/// The integer-Laplace draw for one anchor, from that anchor's own sub-stream.
pub fn anchor_noise(gen: &SeededGenerator, anchor: usize, scale: NoiseScale) -> i64 {
    sample_integer_laplace(scale, &mut gen.split_index(anchor as u64))
}

/// nu(v) = (n_v + Lap_Z(1/epsilon)) / n.
pub fn perturb_to_signed_measure(
    counts: &[u64],
    epsilon: f64,
    n: usize,
    gen: &SeededGenerator,
) -> Result<SignedLatticeMeasure> {
    check_budget(epsilon)?;
    let scale = NoiseScale::new(1.0 / epsilon)?;
    let draws: Vec<i64> = (0..counts.len()).map(|i| anchor_noise(gen, i, scale)).collect();
    Ok(SignedLatticeMeasure::from_draws(counts, &draws, n))
}

/// Probability vector `numerators / denominator` with nonnegative numerators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityLatticeMeasure {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

impl ProbabilityLatticeMeasure {
    pub fn new(numerators: Vec<u64>, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerators.iter().map(|&k| u128::from(k)).sum::<u128>() != u128::from(denominator) {
            return Err(Error::Malformed("numerators must sum to the positive denominator".into()));
        }
        Ok(ProbabilityLatticeMeasure { numerators, denominator })
    }

    pub fn weights(&self) -> Vec<f64> {
        let den = self.denominator as f64;
        self.numerators.iter().map(|&k| k as f64 / den).collect()
    }
}

/// Optimal projection and its bounded-Lipschitz distance to `nu`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub mu: ProbabilityLatticeMeasure,
    pub objective: f64,
    /// Total mass moved between distinct anchors.
    pub transported: f64,
    pub pricing_rounds: usize,
    pub pivots: usize,
}

pub fn project_to_probability(nu: &SignedLatticeMeasure, lattice: &Lattice) -> Result<Projection> {
    let m = lattice.len();
    if m == 0 || nu.len() != m {
        return Err(Error::param("nu", format!("expected {} weights over a nonempty lattice, got {}", m, nu.len())));
    }
    if nu.denominator == 0 || nu.denominator > (i64::MAX as u64) / 4 {
        return Err(Error::param("nu", "denominator out of range"));
    }
    let n = nu.denominator as i64;
    let (garbage, sink) = (m, m + 1);
    let mut supply: Vec<i64> = nu.numerators.clone();
    let total: i64 = supply
        .iter()
        .try_fold(0i64, |acc, &k| acc.checked_add(k))
        .ok_or_else(|| Error::SizeOverflow { reason: "signed measure numerators overflow".into() })?;
    supply.push(n - total);
    supply.push(-n);

    // Longest anchor hop; any arc cost is below this or the shortcut cost.
    let span = 2.0 * (lattice.radius + lattice.delta * (lattice.dim as f64).sqrt());
    let mut ns = NetworkSimplex::new(supply, span.max(SHORTCUT_COST))?;
    let mut to_sink = Vec::with_capacity(m);
    for i in 0..m {
        to_sink.push(ns.add_arc(i, sink, 0.0));
        ns.add_arc(i, garbage, 1.0);
        ns.add_arc(garbage, i, 1.0);
    }
    // Never used at the optimum (G -> anchor -> T costs 1); it only gives the
    // sink a parent in the starting tree.
    let shortcut = ns.add_arc(garbage, sink, SHORTCUT_COST);

    let dim = lattice.dim;
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let offsets = seed_offsets(dim);
    let mut step = vec![0i64; dim];
    for i in 0..m {
        for off in &offsets {
            for a in 0..dim {
                step[a] = lattice.key(i)[a] + off[a];
            }
            if let Some(j) = lattice.find(&step) {
                seen.insert((i as u32, j as u32));
                ns.add_arc(i, j, lattice.distance(i, j));
            }
        }
    }
    ns.set_initial_hub(garbage);

    let mut rounds = 0;
    if m <= DENSE_ANCHOR_LIMIT {
        for i in 0..m {
            for j in 0..m {
                if i != j && !seen.contains(&(i as u32, j as u32)) {
                    ns.add_arc(i, j, lattice.distance(i, j));
                }
            }
        }
        solve(&mut ns)?;
    } else {
        let mut tree = KdTree::new(&lattice.anchors, dim);
        let cost = GroundCost { metric: Metric::L2, power: 1 };
        let tol = ns.tolerance().max(1e-12);
        loop {
            solve(&mut ns)?;
            rounds += 1;
            let neg_pi: Vec<f64> = (0..m).map(|j| -ns.potential(j)).collect();
            tree.set_weights(&neg_pi);
            let mut added = 0;
            // Arc i -> j prices out when |v_i - v_j| + pi_i - pi_j < 0.
            for i in 0..m {
                let bound = neg_pi[i] - tol;
                if let Some((j, _)) = tree.best_below(lattice.anchor(i), cost, bound) {
                    if j != i && seen.insert((i as u32, j as u32)) {
                        ns.add_arc(i, j, lattice.distance(i, j));
                        added += 1;
                    }
                }
            }
            if added == 0 {
                break;
            }
        }
    }

    if ns.flow(shortcut) != 0 {
        return Err(Error::Solver { iterations: ns.iterations(), reason: "sink fed from the garbage node".into() });
    }
    let numerators: Vec<u64> = to_sink.iter().map(|&e| ns.flow(e) as u64).collect();
    let transported: i64 =
        ns.flows().filter(|&(arc, _)| ns.arc_source(arc) < m && ns.arc_target(arc) < m).map(|(_, f)| f).sum();
    let den = n as f64;
    Ok(Projection {
        mu: ProbabilityLatticeMeasure::new(numerators, nu.denominator)?,
        objective: ns.total_cost() / den,
        transported: transported as f64 / den,
        pricing_rounds: rounds,
        pivots: ns.iterations(),
    })
}

/// Nonzero lattice offsets of squared length at most `SEED_NORM2` (or 2 above
/// three dimensions, where the shell grows quickly).
fn seed_offsets(dim: usize) -> Vec<Vec<i64>> {
    let limit = if dim <= 3 { SEED_NORM2 } else { 2 };
    let r = (limit as f64).sqrt() as i64;
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                (-r..=r).map(move |s| {
                    let mut w = v.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| {
        let q: i64 = v.iter().map(|x| x * x).sum();
        q > 0 && q <= limit
    });
    out
}

fn solve(ns: &mut NetworkSimplex) -> Result<()> {
    match ns.solve()? {
        FlowStatus::Optimal => Ok(()),
        FlowStatus::Infeasible => {
            Err(Error::Solver { iterations: ns.iterations(), reason: "projection flow reported infeasible".into() })
        }
    }
}

/// Largest-remainder rounding of `m_target * mu` (ties to the lower index).
pub fn round_counts(mu: &ProbabilityLatticeMeasure, m_target: usize) -> Vec<u64> {
    let den = u128::from(mu.denominator);
    let m = m_target as u128;
    let mut counts: Vec<u64> = Vec::with_capacity(mu.numerators.len());
    let mut remainders: Vec<(u128, usize)> = Vec::new();
    let mut assigned = 0u128;
    for (i, &k) in mu.numerators.iter().enumerate() {
        let scaled = m * u128::from(k);
        counts.push((scaled / den) as u64);
        assigned += scaled / den;
        if scaled % den > 0 {
            remainders.push((scaled % den, i));
        }
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take((m - assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Places `round_counts(mu, m_target)[i]` copies of anchor `i`, anchors in order.
pub fn measure_to_points(mu: &ProbabilityLatticeMeasure, lattice: &Lattice, m_target: usize) -> Result<DMatrix<f64>> {
    if m_target == 0 {
        return Err(Error::param("m_target", "must be at least 1"));
    }
    let counts = round_counts(mu, m_target);
    let mut out = DMatrix::zeros(lattice.dim, m_target);
    let mut col = 0;
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            out.column_mut(col).copy_from_slice(lattice.anchor(i));
            col += 1;
        }
    }
    Ok(out)
}

/// Result of one PSMM run.
#[derive(Debug, Clone)]
pub struct PsmmOutput {
    pub lattice: Lattice,
    pub counts: Vec<u64>,
    pub nu: SignedLatticeMeasure,
    pub projection: Projection,
    pub coords: DMatrix<f64>,
}

/// Full subroutine on `d' x n` coordinates inside the ball of radius `radius`.
/// With `noise = false` the signed measure is the empirical one. Not private.
pub fn run(
    coords: &DMatrix<f64>,
    radius: f64,
    delta: f64,
    epsilon: f64,
    noise: bool,
    cap: usize,
    gen: &SeededGenerator,
) -> Result<PsmmOutput> {
    let n = coords.ncols();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let lattice = build_lattice(radius, delta, coords.nrows(), cap)?;
    let counts = cell_counts(coords, &lattice)?;
    let nu = if noise {
        perturb_to_signed_measure(&counts, epsilon, n, &gen.split("anchors"))?
    } else {
        SignedLatticeMeasure::from_draws(&counts, &vec![0; counts.len()], n)
    };
    let projection = project_to_probability(&nu, &lattice)?;
    let points = measure_to_points(&projection.mu, &lattice, n)?;
    Ok(PsmmOutput { lattice, counts, nu, projection, coords: points })
}
