//! Uncapacitated minimum-cost flow by the primal network simplex method.
//!
//! The pivoting scheme follows the LEMON `NetworkSimplex` design: a strongly
//! feasible spanning tree stored as a thread list, block-search pricing, and an
//! artificial root connected to every node. Flows are integers and costs are
//! `f64`. Arcs may be appended after a solve; the current basis stays valid
//! (new arcs enter at their lower bound) so [`NetworkSimplex::solve`] resumes
//! from the previous optimum.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Optimal,
    /// Some supply can only be routed through the artificial root.
    Infeasible,
}

pub struct NetworkSimplex {
    node_num: usize,
    root: usize,
    // Arcs [0, node_num) are the artificial root arcs; real arcs follow.
    source: Vec<u32>,
    target: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    supply: Vec<i64>,
    max_cost: f64,
    art_cost: f64,
    eps: f64,

    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    dirty_revs: Vec<usize>,

    initialized: bool,
    initial_forest: Option<Vec<Option<usize>>>,
    block_size: usize,
    next_arc: usize,
    iterations: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

impl NetworkSimplex {
    /// `supply[v] > 0` is a source, `< 0` a sink; supplies must sum to zero.
    /// `max_cost` bounds the cost of every arc that will ever be added.
    pub fn new(supply: Vec<i64>, max_cost: f64) -> Result<Self> {
        let total: i128 = supply.iter().map(|&s| s as i128).sum();
        if total != 0 {
            return Err(Error::param("supply", format!("supplies sum to {total}, expected 0")));
        }
        if !(max_cost.is_finite() && max_cost >= 0.0) {
            return Err(Error::param("max_cost", format!("{max_cost}")));
        }
        let node_num = supply.len();
        if node_num >= u32::MAX as usize {
            return Err(Error::param("supply", "too many nodes"));
        }
        let art_cost = (max_cost + 1.0) * (node_num as f64 + 1.0);
        let mut ns = NetworkSimplex {
            node_num,
            root: node_num,
            source: Vec::with_capacity(node_num),
            target: Vec::with_capacity(node_num),
            cost: Vec::with_capacity(node_num),
            flow: Vec::with_capacity(node_num),
            state: Vec::with_capacity(node_num),
            supply,
            max_cost,
            art_cost,
            eps: art_cost * 1e-15,
            pi: Vec::new(),
            parent: Vec::new(),
            pred: Vec::new(),
            thread: Vec::new(),
            rev_thread: Vec::new(),
            succ_num: Vec::new(),
            last_succ: Vec::new(),
            pred_dir: Vec::new(),
            dirty_revs: Vec::new(),
            initialized: false,
            initial_forest: None,
            block_size: 10,
            next_arc: node_num,
            iterations: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
        };
        for _ in 0..node_num {
            ns.source.push(0);
            ns.target.push(0);
            ns.cost.push(0.0);
            ns.flow.push(0);
            ns.state.push(STATE_TREE);
        }
        Ok(ns)
    }

    pub fn node_count(&self) -> usize {
        self.node_num
    }

    pub fn arc_count(&self) -> usize {
        self.cost.len() - self.node_num
    }

    /// Reduced costs above `-tolerance` are treated as nonnegative.
    pub fn tolerance(&self) -> f64 {
        self.eps
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Adds an arc `u -> v` with unbounded capacity and returns its index.
    pub fn add_arc(&mut self, u: usize, v: usize, cost: f64) -> usize {
        assert!(u < self.node_num && v < self.node_num, "arc endpoint out of range");
        assert!(
            cost.is_finite() && cost >= 0.0 && cost <= self.max_cost,
            "arc cost {cost} outside [0, {}]",
            self.max_cost
        );
        self.source.push(u as u32);
        self.target.push(v as u32);
        self.cost.push(cost);
        self.flow.push(0);
        self.state.push(STATE_LOWER);
        self.cost.len() - 1 - self.node_num
    }

    pub fn arc_source(&self, arc: usize) -> usize {
        self.source[arc + self.node_num] as usize
    }

    pub fn arc_target(&self, arc: usize) -> usize {
        self.target[arc + self.node_num] as usize
    }

    pub fn arc_cost(&self, arc: usize) -> f64 {
        self.cost[arc + self.node_num]
    }

    pub fn flow(&self, arc: usize) -> i64 {
        self.flow[arc + self.node_num]
    }

    /// Node potential; reduced cost of `u -> v` is `c + pi(u) - pi(v)`.
    pub fn potential(&self, node: usize) -> f64 {
        self.pi[node]
    }

    /// Sum of cost times flow over real arcs.
    pub fn total_cost(&self) -> f64 {
        (self.node_num..self.cost.len())
            .filter(|&e| self.flow[e] != 0)
            .map(|e| self.cost[e] * self.flow[e] as f64)
            .sum()
    }

    /// Dual objective `-sum_v pi(v) supply(v)`; equals [`Self::total_cost`] at optimality.
    pub fn dual_value(&self) -> f64 {
        -(0..self.node_num).map(|v| self.pi[v] * self.supply[v] as f64).sum::<f64>()
    }

    /// Iterator over `(arc, flow)` for real arcs carrying flow.
    pub fn flows(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        (self.node_num..self.cost.len())
            .filter(move |&e| self.flow[e] != 0)
            .map(move |e| (e - self.node_num, self.flow[e]))
    }

    /// Starts the first solve from the tree in which every node hangs off
    /// `hub` through one of its real arcs, when such an arc exists in the
    /// direction its supply requires. Other nodes hang off the artificial root.
    pub fn set_initial_hub(&mut self, hub: usize) {
        assert!(hub < self.node_num && !self.initialized);
        let n = self.node_num;
        let mut link = vec![None; n];
        for e in (n..self.cost.len()).rev() {
            let (u, v) = (self.source[e] as usize, self.target[e] as usize);
            if v == hub && u != hub && self.supply[u] >= 0 {
                link[u] = Some(e - n);
            } else if u == hub && v != hub && self.supply[v] < 0 {
                link[v] = Some(e - n);
            }
        }
        self.initial_forest = Some(link);
    }

    /// Starts the first solve from a spanning forest: `parent_arc[v]` is the
    /// real arc joining `v` to its parent, or `None` for a tree root (which
    /// hangs off the artificial root). Each tree arc carries the net supply of
    /// the subtree below it; an arc whose direction cannot carry that flow, or
    /// that would be a degenerate arc pointing away from the root, is replaced
    /// by the node's artificial arc.
    pub fn set_initial_forest(&mut self, parent_arc: Vec<Option<usize>>) {
        assert!(parent_arc.len() == self.node_num && !self.initialized);
        self.initial_forest = Some(parent_arc);
    }

    fn init(&mut self) {
        self.init_star();
        if let Some(forest) = self.initial_forest.take() {
            self.init_forest(&forest);
        }
        self.initialized = true;
    }

    fn init_forest(&mut self, forest: &[Option<usize>]) {
        let n = self.node_num;
        let root = self.root;
        let mut parent = vec![root; n + 1];
        for v in 0..n {
            if let Some(a) = forest[v] {
                let e = a + n;
                assert!(e < self.cost.len(), "initial arc {a} does not exist");
                let (s, t) = (self.source[e] as usize, self.target[e] as usize);
                assert!(s == v || t == v, "initial arc {a} is not incident to node {v}");
                parent[v] = if s == v { t } else { s };
            }
        }
        let order = preorder(&parent, root);
        assert_eq!(order.len(), n + 1, "initial forest contains a cycle");

        // Bottom-up: keep an arc only if it can carry its subtree's net supply.
        let mut subtree: Vec<i64> = self.supply.clone();
        subtree.push(0);
        let mut arc_of = vec![NONE; n];
        for &u in order.iter().skip(1).rev() {
            let s = subtree[u];
            // A degenerate arc must point towards the root.
            let keep = forest[u].map(|a| a + n).filter(|&e| if self.source[e] as usize == u { s >= 0 } else { s < 0 });
            match keep {
                Some(e) => {
                    arc_of[u] = e;
                    subtree[parent[u]] += s;
                }
                _ => parent[u] = root,
            }
        }
        let order = preorder(&parent, root);

        for &u in order.iter().skip(1) {
            let p = parent[u];
            let s = subtree[u];
            if p == root {
                continue; // keeps the artificial arc set up by the star start
            }
            let e = arc_of[u];
            self.state[u] = STATE_LOWER;
            self.flow[u] = 0;
            self.parent[u] = p;
            self.pred[u] = e;
            self.state[e] = STATE_TREE;
            if self.source[e] as usize == u {
                self.pred_dir[u] = DIR_UP;
                self.flow[e] = s;
            } else {
                self.pred_dir[u] = DIR_DOWN;
                self.flow[e] = -s;
            }
        }
        // Artificial arcs of nodes still under the root carry the subtree supply.
        for &u in order.iter().skip(1) {
            if parent[u] != root {
                continue;
            }
            let s = subtree[u];
            if s >= 0 {
                self.pred_dir[u] = DIR_UP;
                self.source[u] = u as u32;
                self.target[u] = root as u32;
                self.flow[u] = s;
                self.cost[u] = 0.0;
            } else {
                self.pred_dir[u] = DIR_DOWN;
                self.source[u] = root as u32;
                self.target[u] = u as u32;
                self.flow[u] = -s;
                self.cost[u] = self.art_cost;
            }
        }
        // Potentials top-down from pi(root) = 0, zero reduced cost on tree arcs.
        self.pi[root] = 0.0;
        for &u in order.iter().skip(1) {
            let e = self.pred[u];
            let p = self.parent[u];
            self.pi[u] = if self.pred_dir[u] == DIR_UP { self.pi[p] - self.cost[e] } else { self.pi[p] + self.cost[e] };
        }
        // Thread, subtree sizes and last successors from the preorder.
        for w in 0..order.len() {
            let (a, b) = (order[w], order[(w + 1) % order.len()]);
            self.thread[a] = b;
            self.rev_thread[b] = a;
        }
        for &u in &order {
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
        }
        for &u in order.iter().skip(1).rev() {
            let p = self.parent[u];
            self.succ_num[p] += self.succ_num[u];
        }
        // The last successor of u is the preorder element at position pos(u) + size(u) - 1.
        let mut pos = vec![0usize; n + 1];
        for (i, &u) in order.iter().enumerate() {
            pos[u] = i;
        }
        for &u in &order {
            self.last_succ[u] = order[pos[u] + self.succ_num[u] - 1];
        }
    }
    fn init_star(&mut self) {
        let n = self.node_num;
        let root = self.root;
        self.pi = vec![0.0; n + 1];
        self.parent = vec![NONE; n + 1];
        self.pred = vec![NONE; n + 1];
        self.thread = vec![0; n + 1];
        self.rev_thread = vec![0; n + 1];
        self.succ_num = vec![0; n + 1];
        self.last_succ = vec![0; n + 1];
        self.pred_dir = vec![0; n + 1];

        for u in 0..n {
            let e = u;
            self.parent[u] = root;
            self.pred[u] = e;
            self.thread[u] = u + 1;
            self.rev_thread[u + 1] = u;
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
            self.state[e] = STATE_TREE;
            if self.supply[u] >= 0 {
                self.pred_dir[u] = DIR_UP;
                self.pi[u] = 0.0;
                self.source[e] = u as u32;
                self.target[e] = root as u32;
                self.flow[e] = self.supply[u];
                self.cost[e] = 0.0;
            } else {
                self.pred_dir[u] = DIR_DOWN;
                self.pi[u] = self.art_cost;
                self.source[e] = root as u32;
                self.target[e] = u as u32;
                self.flow[e] = -self.supply[u];
                self.cost[e] = self.art_cost;
            }
        }
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.thread[root] = 0;
        self.rev_thread[0] = root;
        self.succ_num[root] = n + 1;
        self.last_succ[root] = if n == 0 { root } else { root - 1 };
        self.pi[root] = 0.0;
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        f64::from(self.state[e]) * (self.cost[e] + self.pi[self.source[e] as usize] - self.pi[self.target[e] as usize])
    }

    fn find_entering_arc(&mut self) -> bool {
        let lo = self.node_num;
        let hi = self.cost.len();
        if lo == hi {
            return false;
        }
        if self.next_arc < lo || self.next_arc >= hi {
            self.next_arc = lo;
        }
        let mut min = -self.eps;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let ranges = [(self.next_arc, hi), (lo, self.next_arc)];
        for (start, end) in ranges {
            for e in start..end {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    found = e;
                }
                cnt -= 1;
                if cnt == 0 {
                    if found != NONE {
                        self.in_arc = found;
                        self.next_arc = e + 1;
                        return true;
                    }
                    cnt = self.block_size;
                }
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = lo;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc] as usize;
        let mut v = self.target[self.in_arc] as usize;
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns false when the cycle has unbounded residual capacity.
    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs are always at their lower bound.
        let first = self.source[self.in_arc] as usize;
        let second = self.target[self.in_arc] as usize;
        let mut delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 0 {
            return false;
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        true
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0 {
            let in_arc = self.in_arc;
            self.flow[in_arc] += val;
            let mut u = self.source[in_arc] as usize;
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= i64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
            let mut u = self.target[in_arc] as usize;
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += i64::from(self.pred_dir[u]) * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        debug_assert_eq!(self.flow[out], 0);
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] as usize { DIR_UP } else { DIR_DOWN };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };

            // Re-hang the stem nodes between u_in and u_out.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] as usize { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - f64::from(self.pred_dir[u_in]) * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Runs (or resumes) the simplex until no arc prices out.
    pub fn solve(&mut self) -> Result<FlowStatus> {
        if !self.initialized {
            self.init();
        }
        let arcs = self.arc_count();
        self.block_size = ((arcs as f64).sqrt() as usize).max(10);
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Solver { iterations: self.iterations, reason: "unbounded cycle".into() });
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            self.iterations += 1;
        }
        if (0..self.node_num).any(|e| self.flow[e] != 0) {
            Ok(FlowStatus::Infeasible)
        } else {
            Ok(FlowStatus::Optimal)
        }
    }

    /// Largest violation `-(c + pi(u) - pi(v))` over all real arcs (0 when optimal).
    pub fn max_dual_violation(&self) -> f64 {
        (self.node_num..self.cost.len())
            .map(|e| -(self.cost[e] + self.pi[self.source[e] as usize] - self.pi[self.target[e] as usize]))
            .fold(0.0, f64::max)
    }
}

/// Preorder of the tree given by `parent`, children in increasing index order.
fn preorder(parent: &[usize], root: usize) -> Vec<usize> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); parent.len()];
    for (v, &p) in parent.iter().enumerate() {
        if v != root {
            children[p].push(v);
        }
    }
    let mut order = Vec::with_capacity(parent.len());
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        order.push(u);
        stack.extend(children[u].iter().rev());
    }
    order
}
