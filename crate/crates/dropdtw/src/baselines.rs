//! The comparison aligners: greedy drop + DTW, Needleman-Wunsch, LCSS, and
//! boundary-skip DTW. All expose the same [`AlignmentResult`] contract so
//! inference procedures can swap them in head-to-head.

use thiserror::Error;

use crate::align::{dtw, AlignError};
use crate::types::{AlignmentResult, CostMatrix, Matrix, MinOperator};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("every column was pre-dropped; the drop threshold is degenerate")]
    AllColumnsDropped,
}

/// Two-step baseline: pre-drop each column whose cheapest match exceeds its
/// drop cost, then run standard DTW on the survivors. Dropping decisions are
/// made independently of alignment, which is what makes this sub-optimal.
pub fn greedy_drop_then_dtw(costs: &CostMatrix) -> Result<AlignmentResult, BaselineError> {
    let (k, n) = (costs.k(), costs.n());
    let mut survivors = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..n {
        let cheapest = (0..k).map(|i| costs.cost(i, j)).fold(f64::INFINITY, f64::min);
        if cheapest > costs.drop_x()[j] {
            dropped.push(j);
        } else {
            survivors.push(j);
        }
    }
    if survivors.is_empty() {
        return Err(BaselineError::AllColumnsDropped);
    }
    let mut sub = Matrix::zeros(k, survivors.len());
    for i in 0..k {
        for (jj, &j) in survivors.iter().enumerate() {
            sub.set(i, jj, costs.cost(i, j));
        }
    }
    let inner = dtw(&sub, MinOperator::Hard)?;
    let mut total = inner.total_cost;
    for &j in &dropped {
        total += costs.drop_x()[j];
    }
    let matches = inner
        .matches
        .into_iter()
        .map(|(i, jj)| (i, survivors[jj]))
        .collect();
    Ok(AlignmentResult::from_matches(k, n, total, matches))
}

/// Classic global alignment: one-to-one, order-preserving matches, with the
/// drop costs acting as per-element gap penalties on both sides.
pub fn needleman_wunsch(costs: &CostMatrix) -> AlignmentResult {
    let (k, n) = (costs.k(), costs.n());
    let mut g = Matrix::filled(k + 1, n + 1, f64::INFINITY);
    g.set(0, 0, 0.0);
    let mut acc = 0.0;
    for i in 1..=k {
        acc += costs.drop_z()[i - 1];
        g.set(i, 0, acc);
    }
    acc = 0.0;
    for j in 1..=n {
        acc += costs.drop_x()[j - 1];
        g.set(0, j, acc);
    }
    for i in 1..=k {
        for j in 1..=n {
            let m = (g.get(i - 1, j - 1) + costs.cost(i - 1, j - 1))
                .min(g.get(i, j - 1) + costs.drop_x()[j - 1])
                .min(g.get(i - 1, j) + costs.drop_z()[i - 1]);
            g.set(i, j, m);
        }
    }
    // Deterministic traceback: match, then gap-in-x, then gap-in-z.
    let mut matches = Vec::new();
    let (mut i, mut j) = (k, n);
    while i > 0 || j > 0 {
        let here = g.get(i, j);
        if i > 0 && j > 0 && g.get(i - 1, j - 1) + costs.cost(i - 1, j - 1) == here {
            matches.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if j > 0 && g.get(i, j - 1) + costs.drop_x()[j - 1] == here {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    AlignmentResult::from_matches(k, n, g.get(k, n), matches)
}

/// Longest common subsequence under a cost threshold: pairs with
/// `C[i][j] < epsilon` are admissible, and the longest strictly increasing
/// chain of admissible pairs is reported. The result's `total_cost` is the
/// negated chain length so that lower still means more similar.
pub fn lcss(costs: &CostMatrix, epsilon: f64) -> (usize, AlignmentResult) {
    let (k, n) = (costs.k(), costs.n());
    let mut l = vec![vec![0usize; n + 1]; k + 1];
    for i in 1..=k {
        for j in 1..=n {
            let mut best = l[i - 1][j].max(l[i][j - 1]);
            if costs.cost(i - 1, j - 1) < epsilon {
                best = best.max(l[i - 1][j - 1] + 1);
            }
            l[i][j] = best;
        }
    }
    let mut matches = Vec::new();
    let (mut i, mut j) = (k, n);
    while i > 0 && j > 0 {
        if costs.cost(i - 1, j - 1) < epsilon && l[i][j] == l[i - 1][j - 1] + 1 {
            matches.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if l[i][j] == l[i][j - 1] {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    let length = l[k][n];
    (length, AlignmentResult::from_matches(k, n, -(length as f64), matches))
}

/// Boundary-skip DTW: skip a prefix and a suffix of the columns, align the
/// interior window with standard DTW. Interior columns are never dropped.
/// With `charge_boundary_drops` the skipped columns pay their drop costs;
/// without it skipping is free, which is the original formulation.
pub fn otam_boundary_skip(
    costs: &CostMatrix,
    charge_boundary_drops: bool,
) -> Result<AlignmentResult, BaselineError> {
    let (k, n) = (costs.k(), costs.n());
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(costs.drop_x().iter().scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        }))
        .collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..n {
        for b in a..n {
            let window = costs.values().column_window(a, b);
            let inner = dtw(&window, MinOperator::Hard)?;
            let boundary = if charge_boundary_drops {
                prefix[a] + (prefix[n] - prefix[b + 1])
            } else {
                0.0
            };
            let total = inner.total_cost + boundary;
            if best.map_or(true, |(c, _, _)| total < c) {
                best = Some((total, a, b));
            }
        }
    }
    let (total, a, b) = best.expect("at least the full window is evaluated");
    let window = costs.values().column_window(a, b);
    let inner = dtw(&window, MinOperator::Hard)?;
    let matches = inner.matches.into_iter().map(|(i, jj)| (i, a + jj)).collect();
    Ok(AlignmentResult::from_matches(k, n, total, matches))
}
