//! Reference implementations used as oracles by the integration tests. None
//! of them shares code with the library.
#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix (row-major `n x n`),
/// sorted non-increasing, with the eigenvectors as columns of the second value.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + i];
        }
    }
    (values, vectors)
}

/// Minimum of sum_i cost[i][perm(i)] / n over all permutations (n <= 8).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, cost, &mut best);
    best / n as f64
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &[Vec<f64>], best: &mut f64) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}

/// Hungarian algorithm (shortest augmenting paths with potentials) for a
/// square cost matrix; returns the minimum total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let inf = f64::INFINITY;
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact W1 between two uniform point sets by splitting every atom into
/// equal units and solving the resulting assignment problem.
pub fn w1_by_assignment(p: &[Vec<f64>], q: &[Vec<f64>], dist: fn(&[f64], &[f64]) -> f64) -> f64 {
    let (a, b) = (p.len(), q.len());
    let l = a / gcd(a, b) * b;
    let cost: Vec<Vec<f64>> =
        (0..l).map(|i| (0..l).map(|j| dist(&p[i / (l / a)], &q[j / (l / b)])).collect()).collect();
    if a == b && a <= 8 {
        brute_force_assignment(&cost)
    } else {
        hungarian(&cost) / l as f64
    }
}

/// The bounded-Lipschitz projection LP over explicit anchors, with every
/// variable written out: mu, transport gamma_ij, destruction p_i and creation q_i.
pub fn bl_projection_lp(anchors: &[Vec<f64>], nu: &[f64]) -> f64 {
    let m = anchors.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mu: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let mut gamma = vec![vec![None; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                gamma[i][j] = Some(lp.add_var(l2(&anchors[i], &anchors[j]), (0.0, f64::INFINITY)));
            }
        }
    }
    let destroy: Vec<_> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let create: Vec<_> = (0..m).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    lp.add_constraint(mu.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for i in 0..m {
        let mut row = vec![(mu[i], 1.0), (destroy[i], 1.0), (create[i], -1.0)];
        for j in 0..m {
            if let Some(g) = gamma[i][j] {
                row.push((g, 1.0));
            }
            if let Some(g) = gamma[j][i] {
                row.push((g, -1.0));
            }
        }
        lp.add_constraint(row, ComparisonOp::Eq, nu[i]);
    }
    lp.solve().expect("oracle LP").objective()
}
