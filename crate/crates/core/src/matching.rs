//! Estimate-to-truth pairing with a wrap-around distance and a gate.

use crate::dataset::circular_distance;
use crate::signal::PathSet;

pub const DEFAULT_GATE: f64 = 0.05;

/// Euclidean distance on the unit torus.
pub fn wrapped_distance(tau_a: f64, alpha_a: f64, tau_b: f64, alpha_b: f64) -> f64 {
    circular_distance(tau_a, tau_b).hypot(circular_distance(alpha_a, alpha_b))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// `(estimate index, truth index, distance)`, sorted by truth index.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Estimates without a partner (ghosts).
    pub unmatched_estimates: Vec<usize>,
    /// True paths without a partner (misses).
    pub unmatched_truth: Vec<usize>,
}

/// Minimum-cost assignment of every row of an `n x m` cost matrix (`n <= m`)
/// to a distinct column. Returns the column of each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    // potentials method, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Optimal pairing over all estimates and true paths, then gating.
///
/// Distances are capped at the gate inside the assignment, so a pair that
/// would be gated anyway cannot pull a good pair apart by lowering the total.
pub fn match_paths(estimate: &PathSet, truth: &PathSet, gate: f64) -> Matching {
    let (ne, nt) = (estimate.len(), truth.len());
    let dist = |e: usize, t: usize| {
        wrapped_distance(estimate.taus[e], estimate.alphas[e], truth.taus[t], truth.alphas[t])
    };
    let capped = |e: usize, t: usize| dist(e, t).min(gate);
    let mut pairs = Vec::new();
    if ne > 0 && nt > 0 {
        if ne <= nt {
            let cost: Vec<Vec<f64>> = (0..ne).map(|e| (0..nt).map(|t| capped(e, t)).collect()).collect();
            for (e, t) in hungarian(&cost).into_iter().enumerate() {
                pairs.push((e, t, dist(e, t)));
            }
        } else {
            let cost: Vec<Vec<f64>> = (0..nt).map(|t| (0..ne).map(|e| capped(e, t)).collect()).collect();
            for (t, e) in hungarian(&cost).into_iter().enumerate() {
                pairs.push((e, t, dist(e, t)));
            }
        }
    }
    pairs.retain(|&(_, _, d)| d <= gate);
    pairs.sort_by_key(|&(_, t, _)| t);
    let unmatched_estimates = (0..ne).filter(|e| !pairs.iter().any(|p| p.0 == *e)).collect();
    let unmatched_truth = (0..nt).filter(|t| !pairs.iter().any(|p| p.1 == *t)).collect();
    Matching {
        pairs,
        unmatched_estimates,
        unmatched_truth,
    }
}
