//! Hierarchical noisy histogram over the cube `[-R, R]^{d'}`.
//!
//! Nodes are stored in heap order: the root is node 0 and node `i` has
//! children `2i + 1` (lower half) and `2i + 2` (upper half). Level `k` splits
//! axis `k mod d'` at the midpoint, so the leaves at depth `r` appear in
//! lexicographic order of their bit-strings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, Error, Result};
use crate::noise::{sample_integer_laplace, NoiseScale, SeededGenerator};

/// Depths above this would need more than 2^27 nodes.
pub const MAX_DEPTH: u32 = 26;

/// How points are placed inside a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    #[default]
    Uniform,
    /// Every point at the leaf center. Deterministic, used in tests.
    LeafCenter,
}

#[derive(Debug, Clone)]
pub struct CountTree {
    radius: f64,
    dim: usize,
    depth: u32,
    raw: Vec<u64>,
    noisy: Option<Vec<u64>>,
    consistent: Option<Vec<u64>>,
}

/// Axis-aligned box `[lo, hi)` per axis, closed on the faces shared with the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn max_side(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }
}

impl CountTree {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn node_count(&self) -> usize {
        self.raw.len()
    }

    pub fn level_of(node: usize) -> u32 {
        (usize::BITS - 1) - (node + 1).leading_zeros()
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        let first = (1usize << self.depth) - 1;
        first..2 * first + 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        Self::level_of(node) == self.depth
    }

    pub fn children(node: usize) -> (usize, usize) {
        (2 * node + 1, 2 * node + 2)
    }

    /// Bits of the node's index string, root first.
    pub fn path(node: usize) -> Vec<u8> {
        let level = Self::level_of(node);
        let offset = node + 1 - (1usize << level);
        (0..level).rev().map(|b| ((offset >> b) & 1) as u8).collect()
    }

    pub fn cell(&self, node: usize) -> Cell {
        let mut lo = vec![-self.radius; self.dim];
        let mut hi = vec![self.radius; self.dim];
        for (k, bit) in Self::path(node).into_iter().enumerate() {
            let axis = k % self.dim;
            let mid = 0.5 * (lo[axis] + hi[axis]);
            if bit == 0 {
                hi[axis] = mid;
            } else {
                lo[axis] = mid;
            }
        }
        Cell { lo, hi }
    }

    /// Leaf containing `x`, which must lie in the root box.
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut lo = vec![-self.radius; self.dim];
        let mut hi = vec![self.radius; self.dim];
        let mut node = 0;
        for k in 0..self.depth as usize {
            let axis = k % self.dim;
            let mid = 0.5 * (lo[axis] + hi[axis]);
            let (left, right) = Self::children(node);
            if x[axis] < mid {
                hi[axis] = mid;
                node = left;
            } else {
                lo[axis] = mid;
                node = right;
            }
        }
        node
    }

    /// Largest leaf side length.
    pub fn max_leaf_side(&self) -> f64 {
        self.cell(self.leaves().start).max_side().max(self.cell(self.leaves().end - 1).max_side())
    }

    /// Largest l-infinity distance from a leaf point to its leaf center.
    pub fn max_leaf_linf_radius(&self) -> f64 {
        0.5 * self.max_leaf_side()
    }

    pub fn raw_count(&self, node: usize) -> u64 {
        self.raw[node]
    }

    pub fn noisy_count(&self, node: usize) -> Option<u64> {
        self.noisy.as_ref().map(|c| c[node])
    }

    pub fn consistent_count(&self, node: usize) -> Option<u64> {
        self.consistent.as_ref().map(|c| c[node])
    }

    pub fn raw_counts(&self) -> &[u64] {
        &self.raw
    }

    pub fn noisy_counts(&self) -> Option<&[u64]> {
        self.noisy.as_deref()
    }

    pub fn consistent_counts(&self) -> Option<&[u64]> {
        self.consistent.as_deref()
    }

    /// Checks that consistent counts exist and every internal node equals its children's sum.
    pub fn is_consistent(&self) -> bool {
        let Some(c) = &self.consistent else { return false };
        let internal = self.leaves().start;
        (0..internal).all(|i| {
            let (l, r) = Self::children(i);
            c[i] == c[l] + c[r]
        })
    }
}

pub fn build_partition(radius: f64, d_prime: usize, depth: u32) -> Result<CountTree> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param("radius", format!("must be finite and > 0, got {radius}")));
    }
    if d_prime == 0 {
        return Err(Error::InvalidDimension { got: 0, min: 1, max: usize::MAX });
    }
    if depth > MAX_DEPTH {
        return Err(Error::SizeOverflow {
            reason: format!("partition depth {depth} exceeds {MAX_DEPTH}; lower epsilon * n"),
        });
    }
    let nodes = (1usize << (depth + 1)) - 1;
    Ok(CountTree { radius, dim: d_prime, depth, raw: vec![0; nodes], noisy: None, consistent: None })
}

/// Depth r = ceil(log2(epsilon n)) and level scales sigma_j = 2^{(1 - 1/d')(r - j)/2} / epsilon.
pub fn depth_and_scales(epsilon: f64, n: usize, d_prime: usize) -> Result<(u32, Vec<NoiseScale>)> {
    check_budget(epsilon)?;
    if d_prime == 0 {
        return Err(Error::InvalidDimension { got: 0, min: 1, max: usize::MAX });
    }
    let x = epsilon * n as f64;
    if x <= 1.0 {
        return Err(Error::InvalidRegime(x));
    }
    let mut r = x.log2().ceil().max(1.0) as i32;
    while r > 1 && 2f64.powi(r - 1) >= x {
        r -= 1;
    }
    while 2f64.powi(r) < x {
        r += 1;
    }
    let r = r as u32;
    Ok((r, level_scales(epsilon, r, d_prime)?))
}

pub fn level_scales(epsilon: f64, depth: u32, d_prime: usize) -> Result<Vec<NoiseScale>> {
    let exponent = 0.5 * (1.0 - 1.0 / d_prime as f64);
    (0..=depth).map(|j| NoiseScale::new(2f64.powf(exponent * f64::from(depth - j)) / epsilon)).collect()
}

/// Fills raw counts by point-in-cell membership.
pub fn count_points(mut tree: CountTree, coords: &DMatrix<f64>) -> Result<CountTree> {
    if coords.nrows() != tree.dim && coords.ncols() > 0 {
        return Err(Error::InvalidDimension { got: coords.nrows(), min: tree.dim, max: tree.dim });
    }
    let r = tree.radius;
    tree.raw.iter_mut().for_each(|c| *c = 0);
    for (i, x) in coords.column_iter().enumerate() {
        if let Some(k) = x.iter().position(|v| !(-r..=r).contains(v)) {
            return Err(Error::OutOfDomain {
                index: i,
                reason: format!("coordinate {k} = {} is outside [-{r}, {r}]", x[k]),
            });
        }
        let mut node = tree.locate(x.as_slice());
        loop {
            tree.raw[node] += 1;
            if node == 0 {
                break;
            }
            node = (node - 1) / 2;
        }
    }
    tree.noisy = None;
    tree.consistent = None;
    Ok(tree)
}

/// The integer-Laplace draw for one node, from that node's own sub-stream.
pub fn node_noise(gen: &SeededGenerator, node: usize, scale: NoiseScale) -> i64 {
    sample_integer_laplace(scale, &mut gen.split_index(node as u64))
}

/// Raw counts plus n'_theta = max(0, n_theta + Lap_Z(sigma_{|theta|})) at every node.
pub fn noisy_counts(tree: CountTree, coords: &DMatrix<f64>, epsilon: f64, gen: &SeededGenerator) -> Result<CountTree> {
    check_budget(epsilon)?;
    let scales = level_scales(epsilon, tree.depth, tree.dim)?;
    let mut tree = count_points(tree, coords)?;
    let noisy = (0..tree.node_count())
        .map(|i| {
            let z = node_noise(gen, i, scales[CountTree::level_of(i) as usize]);
            (tree.raw[i] as i64).saturating_add(z).max(0) as u64
        })
        .collect();
    tree.noisy = Some(noisy);
    Ok(tree)
}

/// Zero-noise counterpart of [`noisy_counts`]: n'_theta = n_theta. Not private.
pub fn exact_counts(tree: CountTree, coords: &DMatrix<f64>) -> Result<CountTree> {
    let mut tree = count_points(tree, coords)?;
    tree.noisy = Some(tree.raw.clone());
    Ok(tree)
}

/// Adjusts noisy child counts `(a, b)` to sum to `parent`: decrement the
/// larger child while the sum is too big (tie: child 1), increment the smaller
/// while it is too small (tie: child 0).
pub fn repair_children(parent: u64, a: u64, b: u64) -> (u64, u64) {
    let sum = a + b;
    let (lo, hi) = (a.min(b), a.max(b));
    let gap = hi - lo;
    if sum > parent {
        let excess = sum - parent;
        if excess <= gap {
            return if a > b { (a - excess, b) } else { (a, b - excess) };
        }
        let rest = excess - gap;
        (lo - rest / 2, lo - rest.div_ceil(2))
    } else {
        let deficit = parent - sum;
        if deficit <= gap {
            return if a < b { (a + deficit, b) } else { (a, b + deficit) };
        }
        let rest = deficit - gap;
        (hi + rest.div_ceil(2), hi + rest / 2)
    }
}

/// Top-down repair; the root keeps its noisy count.
pub fn enforce_consistency(mut tree: CountTree) -> Result<CountTree> {
    let noisy = tree.noisy.as_ref().ok_or_else(|| Error::Malformed("consistency requires noisy counts".into()))?;
    let mut c = noisy.clone();
    for i in 0..tree.leaves().start {
        let (l, r) = CountTree::children(i);
        let (a, b) = repair_children(c[i], c[l], c[r]);
        c[l] = a;
        c[r] = b;
    }
    tree.consistent = Some(c);
    Ok(tree)
}

/// Emits each leaf's consistent count of points, leaves in lexicographic order.
pub fn sample_synthetic(tree: &CountTree, mode: SampleMode, gen: &mut SeededGenerator) -> Result<DMatrix<f64>> {
    let counts =
        tree.consistent.as_ref().ok_or_else(|| Error::Malformed("sampling requires consistent counts".into()))?;
    let m = counts[0] as usize;
    let mut out = DMatrix::zeros(tree.dim, m);
    let mut col = 0;
    for leaf in tree.leaves() {
        let k = counts[leaf] as usize;
        if k == 0 {
            continue;
        }
        let cell = tree.cell(leaf);
        let center = cell.center();
        for _ in 0..k {
            for a in 0..tree.dim {
                out[(a, col)] = match mode {
                    SampleMode::Uniform => gen.uniform_in(cell.lo[a], cell.hi[a]),
                    SampleMode::LeafCenter => center[a],
                };
            }
            col += 1;
        }
    }
    debug_assert_eq!(col, m);
    Ok(out)
}

/// Result of one PMM run.
#[derive(Debug, Clone)]
pub struct PmmOutput {
    pub tree: CountTree,
    pub coords: DMatrix<f64>,
    pub scales: Vec<NoiseScale>,
}

/// Full subroutine: partition, noisy counts, consistency and sampling.
/// With `noise = false` the counts are exact but the depth still follows `epsilon`.
pub fn run(
    coords: &DMatrix<f64>,
    radius: f64,
    epsilon: f64,
    noise: bool,
    mode: SampleMode,
    gen: &SeededGenerator,
) -> Result<PmmOutput> {
    let d_prime = coords.nrows();
    let (depth, scales) = depth_and_scales(epsilon, coords.ncols(), d_prime)?;
    let tree = build_partition(radius, d_prime, depth)?;
    let tree =
        if noise { noisy_counts(tree, coords, epsilon, &gen.split("counts"))? } else { exact_counts(tree, coords)? };
    let tree = enforce_consistency(tree)?;
    let synthetic = sample_synthetic(&tree, mode, &mut gen.split("sample"))?;
    Ok(PmmOutput { tree, coords: synthetic, scales })
}
