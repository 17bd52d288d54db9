//! The dynamic-programming aligners: classic DTW, one-sided Drop-DTW (only
//! the second sequence may drop elements) and two-sided Drop-DTW (both may),
//! each with deterministic traceback, plus the smoothed min operators used
//! by the differentiable variants.
//!
//! Tie-breaking is deterministic and applied from the start of the
//! sequences: prefer matching over dropping, and among match predecessors
//! prefer the diagonal, then the left, then the up transition. Traceback
//! therefore runs over the DP tables of the index-reversed instance (whose
//! optimum is identical), so that walking backward resolves ties at the
//! original sequence heads first.

use thiserror::Error;

use crate::types::{
    AlignmentResult, CostMatrix, DpTables, DpVariant, Matrix, MinOperator, is_forbidden,
};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("all candidates are the infinite sentinel")]
    EmptyCandidateSet,
    #[error("tables were produced by a smoothed run; rerun with the hard min to trace a path")]
    TracebackOnSmoothTables,
    #[error("one-sided Drop-DTW requires row drops to be forbidden (drop_z = infinity)")]
    RowDropsNotForbidden,
    #[error("gradients require a smooth min operator")]
    GradientRequiresSmoothOperator,
}

fn check_gamma(op: MinOperator) -> Result<(), AlignError> {
    if let Some(g) = op.gamma() {
        if !(g > 0.0) || !g.is_finite() {
            return Err(AlignError::NonPositiveGamma(g));
        }
    }
    Ok(())
}

/// Combines candidate costs under the operator, ignoring infinite-sentinel
/// entries. Returns infinity when no finite candidate remains.
pub(crate) fn reduce_candidates(op: MinOperator, cands: &[f64]) -> f64 {
    match op {
        MinOperator::Hard => cands.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min),
        MinOperator::SmoothMin(g) => smooth_min_finite(cands, g).unwrap_or(f64::INFINITY),
        MinOperator::SoftMin(g) => soft_min_finite(cands, g).unwrap_or(f64::INFINITY),
    }
}

fn smooth_min_finite(cands: &[f64], gamma: f64) -> Option<f64> {
    let m = cands.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in cands {
        if x.is_finite() {
            let w = (-(x - m) / gamma).exp();
            num += x * w;
            den += w;
        }
    }
    Some(num / den)
}

fn soft_min_finite(cands: &[f64], gamma: f64) -> Option<f64> {
    let m = cands.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return None;
    }
    let s: f64 = cands
        .iter()
        .filter(|c| c.is_finite())
        .map(|&x| (-(x - m) / gamma).exp())
        .sum();
    Some(m - gamma * s.ln())
}

/// `smoothMin(x; gamma) = x . softmax(-x / gamma)`, computed with max-shift
/// stabilization. Infinite-sentinel entries are excluded first.
pub fn smooth_min(xs: &[f64], gamma: f64) -> Result<f64, AlignError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(AlignError::NonPositiveGamma(gamma));
    }
    smooth_min_finite(xs, gamma).ok_or(AlignError::EmptyCandidateSet)
}

/// `-gamma * log(sum(exp(-x / gamma)))`, the log-sum-exp lower bound on the
/// minimum. Infinite-sentinel entries are excluded first.
pub fn soft_min(xs: &[f64], gamma: f64) -> Result<f64, AlignError> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(AlignError::NonPositiveGamma(gamma));
    }
    soft_min_finite(xs, gamma).ok_or(AlignError::EmptyCandidateSet)
}

// ---------------------------------------------------------------------------
// Classic DTW
// ---------------------------------------------------------------------------

fn dtw_forward(c: &Matrix, op: MinOperator) -> Matrix {
    let (k, n) = (c.rows(), c.cols());
    let mut d = Matrix::filled(k + 1, n + 1, f64::INFINITY);
    d.set(0, 0, 0.0);
    for i in 1..=k {
        for j in 1..=n {
            let m = reduce_candidates(op, &[d.get(i - 1, j - 1), d.get(i, j - 1), d.get(i - 1, j)]);
            d.set(i, j, c.get(i - 1, j - 1) + m);
        }
    }
    d
}

/// Classic DTW over a plain match-cost matrix: a connected warping path from
/// the first to the last pair, nothing dropped.
///
/// With the hard operator the returned cost is the exact optimum over all
/// warping paths. Smoothed operators have no discrete path and are rejected;
/// use [`dtw_value`] for the smoothed cost.
pub fn dtw(c: &Matrix, min_op: MinOperator) -> Result<AlignmentResult, AlignError> {
    check_gamma(min_op)?;
    if !min_op.is_hard() {
        return Err(AlignError::TracebackOnSmoothTables);
    }
    let (k, n) = (c.rows(), c.cols());
    let fwd = dtw_forward(c, min_op);
    let rev_c = c.reversed();
    let rev = dtw_forward(&rev_c, min_op);
    // Backward walk over the reversed tables = forward tie preference.
    let mut matches = Vec::new();
    let (mut i, mut j) = (k, n);
    while i >= 1 && j >= 1 {
        matches.push((k - i, n - j));
        let cands = [rev.get(i - 1, j - 1), rev.get(i, j - 1), rev.get(i - 1, j)];
        let m = cands.iter().copied().fold(f64::INFINITY, f64::min);
        if i == 1 && j == 1 {
            break;
        }
        if cands[0] == m {
            i -= 1;
            j -= 1;
        } else if cands[1] == m {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    Ok(AlignmentResult::from_matches(k, n, fwd.get(k, n), matches))
}

/// The DTW objective value under any min operator, without a path.
pub fn dtw_value(c: &Matrix, min_op: MinOperator) -> Result<f64, AlignError> {
    check_gamma(min_op)?;
    let d = dtw_forward(c, min_op);
    Ok(d.get(c.rows(), c.cols()))
}

// ---------------------------------------------------------------------------
// One-sided Drop-DTW (drops limited to X)
// ---------------------------------------------------------------------------

fn one_sided_forward(costs: &CostMatrix, op: MinOperator) -> (Matrix, Matrix, Matrix) {
    let (k, n) = (costs.k(), costs.n());
    let mut d = Matrix::filled(k + 1, n + 1, f64::INFINITY);
    let mut d_match = Matrix::filled(k + 1, n + 1, f64::INFINITY);
    let mut d_drop = Matrix::filled(k + 1, n + 1, f64::INFINITY);
    d.set(0, 0, 0.0);
    d_match.set(0, 0, 0.0);
    d_drop.set(0, 0, 0.0);
    let mut acc = 0.0;
    for j in 1..=n {
        acc += costs.drop_x()[j - 1];
        d_drop.set(0, j, acc);
        d.set(0, j, acc);
    }
    for i in 1..=k {
        for j in 1..=n {
            let m = reduce_candidates(
                op,
                &[d.get(i - 1, j - 1), d.get(i, j - 1), d_match.get(i - 1, j)],
            );
            d_match.set(i, j, costs.cost(i - 1, j - 1) + m);
            d_drop.set(i, j, costs.drop_x()[j - 1] + d.get(i, j - 1));
            d.set(i, j, reduce_candidates(op, &[d_match.get(i, j), d_drop.get(i, j)]));
        }
    }
    (d, d_match, d_drop)
}

/// Runs the one-sided recursion and returns the tables without tracing.
pub fn drop_dtw_one_sided_tables(
    costs: &CostMatrix,
    min_op: MinOperator,
) -> Result<DpTables, AlignError> {
    check_gamma(min_op)?;
    if costs.drop_z().iter().any(|d| !is_forbidden(*d)) {
        return Err(AlignError::RowDropsNotForbidden);
    }
    let (d, d_match, d_drop) = one_sided_forward(costs, min_op);
    Ok(DpTables::OneSided { costs: costs.clone(), min_op, d, d_match, d_drop })
}

/// One-sided Drop-DTW: every element of Z is matched at least once, while
/// elements of X may be dropped at their per-element cost.
pub fn drop_dtw_one_sided(
    costs: &CostMatrix,
    min_op: MinOperator,
) -> Result<(AlignmentResult, DpTables), AlignError> {
    let tables = drop_dtw_one_sided_tables(costs, min_op)?;
    let result = traceback(&tables)?;
    Ok((result, tables))
}

// ---------------------------------------------------------------------------
// Two-sided Drop-DTW (drops in both sequences)
// ---------------------------------------------------------------------------

struct TwoSided {
    zx: Matrix,
    zd: Matrix,
    dx: Matrix,
    dd: Matrix,
}

fn two_sided_forward(costs: &CostMatrix, op: MinOperator) -> TwoSided {
    let (k, n) = (costs.k(), costs.n());
    let inf = f64::INFINITY;
    let mut zx = Matrix::filled(k + 1, n + 1, inf);
    let mut zd = Matrix::filled(k + 1, n + 1, inf);
    let mut dx = Matrix::filled(k + 1, n + 1, inf);
    let mut dd = Matrix::filled(k + 1, n + 1, inf);
    zx.set(0, 0, 0.0);
    zd.set(0, 0, 0.0);
    dx.set(0, 0, 0.0);
    dd.set(0, 0, 0.0);
    let mut acc = 0.0;
    for j in 1..=n {
        acc += costs.drop_x()[j - 1];
        zd.set(0, j, acc);
        dd.set(0, j, acc);
    }
    acc = 0.0;
    for i in 1..=k {
        acc += costs.drop_z()[i - 1];
        dx.set(i, 0, acc);
        dd.set(i, 0, acc);
    }
    for i in 1..=k {
        let dz_i = costs.drop_z()[i - 1];
        for j in 1..=n {
            let dx_j = costs.drop_x()[j - 1];
            let diag = [
                zx.get(i - 1, j - 1),
                zd.get(i - 1, j - 1),
                dx.get(i - 1, j - 1),
                dd.get(i - 1, j - 1),
            ];
            let left_with_z = [zx.get(i, j - 1), zd.get(i, j - 1)];
            let top_with_x = [zx.get(i - 1, j), dx.get(i - 1, j)];
            let match_cands = [
                diag[0], diag[1], diag[2], diag[3],
                left_with_z[0], left_with_z[1],
                top_with_x[0], top_with_x[1],
            ];
            zx.set(i, j, costs.cost(i - 1, j - 1) + reduce_candidates(op, &match_cands));
            zd.set(i, j, dx_j + reduce_candidates(op, &left_with_z));
            dx.set(i, j, dz_i + reduce_candidates(op, &top_with_x));
            let drop_both = [
                zd.get(i - 1, j) + dz_i,
                dd.get(i - 1, j) + dz_i,
                dx.get(i, j - 1) + dx_j,
                dd.get(i, j - 1) + dx_j,
            ];
            dd.set(i, j, reduce_candidates(op, &drop_both));
        }
    }
    TwoSided { zx, zd, dx, dd }
}

/// Runs the two-sided recursion and returns the four tables without tracing.
pub fn drop_dtw_two_sided_tables(
    costs: &CostMatrix,
    min_op: MinOperator,
) -> Result<DpTables, AlignError> {
    check_gamma(min_op)?;
    let t = two_sided_forward(costs, min_op);
    Ok(DpTables::TwoSided {
        costs: costs.clone(),
        min_op,
        d_zx: t.zx,
        d_zd: t.zd,
        d_dx: t.dx,
        d_dd: t.dd,
    })
}

/// Two-sided Drop-DTW: elements of either sequence may be dropped, each
/// dropped index paying its drop cost exactly once.
pub fn drop_dtw_two_sided(
    costs: &CostMatrix,
    min_op: MinOperator,
) -> Result<(AlignmentResult, DpTables), AlignError> {
    let tables = drop_dtw_two_sided_tables(costs, min_op)?;
    let result = traceback(&tables)?;
    Ok((result, tables))
}

// ---------------------------------------------------------------------------
// Traceback
// ---------------------------------------------------------------------------

/// Reconstructs one optimal alignment from hard-min tables.
///
/// The walk runs over the index-reversed instance so that the deterministic
/// tie preferences (match over drop; diagonal, left, up) apply from the
/// start of the sequences. Smoothed tables carry no discrete path and are
/// rejected.
pub fn traceback(tables: &DpTables) -> Result<AlignmentResult, AlignError> {
    if !tables.min_op().is_hard() {
        return Err(AlignError::TracebackOnSmoothTables);
    }
    let costs = tables.costs();
    let total = tables.final_cost();
    let rev = costs.reversed();
    match tables.variant() {
        DpVariant::OneSided => {
            let (d, d_match, _) = one_sided_forward(&rev, MinOperator::Hard);
            Ok(trace_one_sided(costs, &d, &d_match, total))
        }
        DpVariant::TwoSided => {
            let t = two_sided_forward(&rev, MinOperator::Hard);
            Ok(trace_two_sided(costs, &rev, &t, total))
        }
    }
}

fn trace_one_sided(costs: &CostMatrix, d: &Matrix, d_match: &Matrix, total: f64) -> AlignmentResult {
    let (k, n) = (costs.k(), costs.n());
    let mut matches = Vec::new();
    let (mut i, mut j) = (k, n);
    let mut in_match_table = false;
    loop {
        if !in_match_table {
            if i == 0 {
                break; // remaining reversed columns 1..=j are drops
            }
            // Prefer the match table on ties.
            in_match_table = d_match.get(i, j) == d.get(i, j);
            if !in_match_table {
                j -= 1; // drop table consumes reversed column j
                continue;
            }
        }
        // Match state: reversed (i, j) maps to original (k - i, n - j).
        matches.push((k - i, n - j));
        let cands = [d.get(i - 1, j - 1), d.get(i, j - 1), d_match.get(i - 1, j)];
        let m = cands.iter().copied().fold(f64::INFINITY, f64::min);
        if cands[0] == m {
            i -= 1;
            j -= 1;
            in_match_table = false;
        } else if cands[1] == m {
            j -= 1;
            in_match_table = false;
        } else {
            i -= 1; // stay in the match table
        }
        if i == 0 && !in_match_table {
            break;
        }
    }
    AlignmentResult::from_matches(k, n, total, matches)
}

#[derive(Clone, Copy, PartialEq)]
enum Table {
    Zx,
    Zd,
    Dx,
    Dd,
}

fn trace_two_sided(costs: &CostMatrix, rev: &CostMatrix, t: &TwoSided, total: f64) -> AlignmentResult {
    let (k, n) = (costs.k(), costs.n());
    let mut matches = Vec::new();
    let (mut i, mut j) = (k, n);
    let finals = [
        (t.zx.get(k, n), Table::Zx),
        (t.zd.get(k, n), Table::Zd),
        (t.dx.get(k, n), Table::Dx),
        (t.dd.get(k, n), Table::Dd),
    ];
    let best = finals.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    let mut table = finals.iter().find(|f| f.0 == best).expect("finite optimum").1;
    loop {
        if i == 0 || j == 0 {
            break; // remaining prefix is all drops on one side
        }
        match table {
            Table::Zx => {
                matches.push((k - i, n - j));
                let cands = [
                    (t.zx.get(i - 1, j - 1), Table::Zx, i - 1, j - 1),
                    (t.zd.get(i - 1, j - 1), Table::Zd, i - 1, j - 1),
                    (t.dx.get(i - 1, j - 1), Table::Dx, i - 1, j - 1),
                    (t.dd.get(i - 1, j - 1), Table::Dd, i - 1, j - 1),
                    (t.zx.get(i, j - 1), Table::Zx, i, j - 1),
                    (t.zd.get(i, j - 1), Table::Zd, i, j - 1),
                    (t.zx.get(i - 1, j), Table::Zx, i - 1, j),
                    (t.dx.get(i - 1, j), Table::Dx, i - 1, j),
                ];
                let m = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let pick = cands.iter().find(|c| c.0 == m).expect("finite predecessor");
                table = pick.1;
                i = pick.2;
                j = pick.3;
            }
            Table::Zd => {
                // Reversed column j is dropped.
                let cands = [(t.zx.get(i, j - 1), Table::Zx), (t.zd.get(i, j - 1), Table::Zd)];
                let m = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                table = cands.iter().find(|c| c.0 == m).expect("finite predecessor").1;
                j -= 1;
            }
            Table::Dx => {
                // Reversed row i is dropped.
                let cands = [(t.zx.get(i - 1, j), Table::Zx), (t.dx.get(i - 1, j), Table::Dx)];
                let m = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                table = cands.iter().find(|c| c.0 == m).expect("finite predecessor").1;
                i -= 1;
            }
            Table::Dd => {
                let dz_i = rev.drop_z()[i - 1];
                let dx_j = rev.drop_x()[j - 1];
                let cands = [
                    (t.zd.get(i - 1, j) + dz_i, Table::Zd, true),
                    (t.dx.get(i, j - 1) + dx_j, Table::Dx, false),
                    (t.dd.get(i, j - 1) + dx_j, Table::Dd, false),
                    (t.dd.get(i - 1, j) + dz_i, Table::Dd, true),
                ];
                let m = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let pick = cands.iter().find(|c| c.0 == m).expect("finite predecessor");
                table = pick.1;
                if pick.2 {
                    i -= 1; // row i was the newly paid drop
                } else {
                    j -= 1; // column j was the newly paid drop
                }
            }
        }
    }
    AlignmentResult::from_matches(k, n, total, matches)
}
