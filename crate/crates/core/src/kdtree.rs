//! Static kd-tree over a point set with per-point additive weights.
//!
//! The query of interest is `argmin_i ground(q, p_i) + w_i`, which prices
//! candidate transport arcs against the current dual potentials. Subtrees are
//! pruned with a box lower bound on the ground cost plus the subtree's minimum
//! weight.

use crate::metrics::GroundCost;

const LEAF_SIZE: usize = 8;

struct Node {
    lo: usize,
    hi: usize,
    left: usize,
    right: usize,
    bbox_min: Vec<f64>,
    bbox_max: Vec<f64>,
}

pub struct KdTree<'a> {
    dim: usize,
    points: &'a [f64],
    order: Vec<usize>,
    nodes: Vec<Node>,
    node_min_weight: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> KdTree<'a> {
    /// `points` is column-major: point `i` occupies `points[i*dim..(i+1)*dim]`.
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let count = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..count).collect(),
            nodes: Vec::new(),
            node_min_weight: Vec::new(),
            weights: vec![0.0; count],
        };
        if count > 0 {
            tree.build(0, count);
        }
        tree.node_min_weight = vec![0.0; tree.nodes.len()];
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let dim = self.dim;
        let mut bbox_min = vec![f64::INFINITY; dim];
        let mut bbox_max = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[lo..hi] {
            let p = &self.points[i * dim..(i + 1) * dim];
            for k in 0..dim {
                bbox_min[k] = bbox_min[k].min(p[k]);
                bbox_max[k] = bbox_max[k].max(p[k]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, left: usize::MAX, right: usize::MAX, bbox_min, bbox_max });
        if hi - lo <= LEAF_SIZE {
            return id;
        }
        let node = &self.nodes[id];
        let axis = (0..dim)
            .max_by(|&a, &b| (node.bbox_max[a] - node.bbox_min[a]).total_cmp(&(node.bbox_max[b] - node.bbox_min[b])))
            .unwrap();
        if node.bbox_max[axis] == node.bbox_min[axis] {
            // All points coincide.
            return id;
        }
        let mid = (lo + hi) / 2;
        let points = self.points;
        self.order[lo..hi]
            .select_nth_unstable_by(mid - lo, |&a, &b| points[a * dim + axis].total_cmp(&points[b * dim + axis]));
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    /// Replaces the additive weights (indexed by original point id).
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.len());
        self.weights.copy_from_slice(weights);
        // Children are always created after their parent, so a reverse sweep
        // sees both children before the parent.
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            self.node_min_weight[id] = if node.left == usize::MAX {
                self.order[node.lo..node.hi].iter().map(|&i| self.weights[i]).fold(f64::INFINITY, f64::min)
            } else {
                self.node_min_weight[node.left].min(self.node_min_weight[node.right])
            };
        }
    }

    /// Finds `argmin_i cost(q, p_i) + w_i` restricted to values strictly below `bound`.
    pub fn best_below(&self, q: &[f64], cost: GroundCost, bound: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, bound);
        self.search(0, q, cost, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    /// Up to `k` points with the smallest `cost(q, p_i) + w_i` below `bound`,
    /// in increasing order of that value.
    pub fn best_k_below(&self, q: &[f64], cost: GroundCost, bound: f64, k: usize) -> Vec<(usize, f64)> {
        let mut found = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search_k(0, q, cost, bound, k, &mut found);
        }
        found
    }

    fn search_k(&self, id: usize, q: &[f64], cost: GroundCost, bound: f64, k: usize, found: &mut Vec<(usize, f64)>) {
        let limit = |found: &Vec<(usize, f64)>| if found.len() < k { bound } else { found[k - 1].1 };
        let node = &self.nodes[id];
        if node.left == usize::MAX {
            for &i in &self.order[node.lo..node.hi] {
                let w = self.weights[i];
                if w >= limit(found) {
                    continue;
                }
                let v = cost.eval(q, self.point(i)) + w;
                if v < limit(found) {
                    let pos = found.partition_point(|&(_, x)| x <= v);
                    found.insert(pos, (i, v));
                    found.truncate(k);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let lb_l = self.lower_bound(l, q, cost) + self.node_min_weight[l];
        let lb_r = self.lower_bound(r, q, cost) + self.node_min_weight[r];
        let (first, lb_first, second, lb_second) = if lb_l <= lb_r { (l, lb_l, r, lb_r) } else { (r, lb_r, l, lb_l) };
        if lb_first < limit(found) {
            self.search_k(first, q, cost, bound, k, found);
        }
        if lb_second < limit(found) {
            self.search_k(second, q, cost, bound, k, found);
        }
    }

    fn lower_bound(&self, id: usize, q: &[f64], cost: GroundCost) -> f64 {
        let node = &self.nodes[id];
        let gaps = q.iter().enumerate().map(|(k, &x)| {
            if x < node.bbox_min[k] {
                node.bbox_min[k] - x
            } else if x > node.bbox_max[k] {
                x - node.bbox_max[k]
            } else {
                0.0
            }
        });
        cost.from_gaps(gaps)
    }

    fn search(&self, id: usize, q: &[f64], cost: GroundCost, best: &mut (usize, f64)) {
        let node = &self.nodes[id];
        if node.left == usize::MAX {
            for &i in &self.order[node.lo..node.hi] {
                let w = self.weights[i];
                if w >= best.1 {
                    continue;
                }
                let v = cost.eval(q, self.point(i)) + w;
                if v < best.1 {
                    *best = (i, v);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let lb_l = self.lower_bound(l, q, cost) + self.node_min_weight[l];
        let lb_r = self.lower_bound(r, q, cost) + self.node_min_weight[r];
        let (first, lb_first, second, lb_second) = if lb_l <= lb_r { (l, lb_l, r, lb_r) } else { (r, lb_r, l, lb_l) };
        if lb_first < best.1 {
            self.search(first, q, cost, best);
        }
        if lb_second < best.1 {
            self.search(second, q, cost, best);
        }
    }

    /// The `k` nearest points to `q` by ground cost, ignoring weights.
    pub fn nearest(&self, q: &[f64], cost: GroundCost, k: usize) -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.knn(0, q, cost, k, &mut found);
        }
        found
    }

    fn knn(&self, id: usize, q: &[f64], cost: GroundCost, k: usize, found: &mut Vec<(usize, f64)>) {
        let worst = |found: &Vec<(usize, f64)>| {
            if found.len() < k {
                f64::INFINITY
            } else {
                found[found.len() - 1].1
            }
        };
        let node = &self.nodes[id];
        if node.left == usize::MAX {
            for &i in &self.order[node.lo..node.hi] {
                let v = cost.eval(q, self.point(i));
                if v < worst(found) {
                    let pos = found.partition_point(|&(_, x)| x <= v);
                    found.insert(pos, (i, v));
                    found.truncate(k);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let lb_l = self.lower_bound(l, q, cost);
        let lb_r = self.lower_bound(r, q, cost);
        let (first, second, lb_second) = if lb_l <= lb_r { (l, r, lb_r) } else { (r, l, lb_l) };
        self.knn(first, q, cost, k, found);
        if lb_second < worst(found) {
            self.knn(second, q, cost, k, found);
        }
    }
}
