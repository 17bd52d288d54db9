//! Brute-force reference implementations used as ground truth in
//! differential tests. Exponential by design; guarded by size bounds.

use thiserror::Error;

use crate::types::{AlignmentMatrix, CostMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    InstanceTooLarge(String),
}

/// Enumerates every K x N binary matrix satisfying the chain condition
/// (and, with `require_all_rows`, covering every row), each exactly once.
///
/// Chains are generated directly as lexicographically increasing entry
/// sequences whose consecutive entries are componentwise comparable, which
/// visits exactly the feasible set without scanning all 2^(K*N) matrices.
pub fn enumerate_feasible(
    k: usize,
    n: usize,
    require_all_rows: bool,
) -> Result<Vec<AlignmentMatrix>, OracleError> {
    if k * n > 25 {
        return Err(OracleError::InstanceTooLarge(format!("{k}x{n} exceeds the 2^25 bound")));
    }
    let mut out = Vec::new();
    let mut current: Vec<(usize, usize)> = Vec::new();
    extend_chain(k, n, require_all_rows, &mut current, &mut out);
    Ok(out)
}

fn rows_covered(entries: &[(usize, usize)], k: usize) -> bool {
    let mut hit = vec![false; k];
    for &(i, _) in entries {
        hit[i] = true;
    }
    hit.iter().all(|&h| h)
}

fn extend_chain(
    k: usize,
    n: usize,
    require_all_rows: bool,
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<AlignmentMatrix>,
) {
    if !require_all_rows || rows_covered(current, k) {
        out.push(
            AlignmentMatrix::from_entries(k, n, current.clone()).expect("entries in bounds"),
        );
    }
    let (lo_i, lo_j) = match current.last() {
        Some(&(i, j)) => (i, j),
        None => (0, 0),
    };
    for i in lo_i..k {
        for j in lo_j..n {
            if let Some(&(pi, pj)) = current.last() {
                if (i, j) == (pi, pj) || i < pi || j < pj {
                    continue;
                }
            }
            current.push((i, j));
            extend_chain(k, n, require_all_rows, current, out);
            current.pop();
        }
    }
}

/// Evaluates the drop-augmented objective on every feasible matrix and
/// returns the minimum cost together with all minimizers.
///
/// A forbidden drop side makes any matrix that drops one of its elements
/// infeasible (infinite cost); such matrices are never minimizers.
pub fn brute_force_cost(
    costs: &CostMatrix,
    require_all_rows: bool,
) -> Result<(f64, Vec<AlignmentMatrix>), OracleError> {
    let all = enumerate_feasible(costs.k(), costs.n(), require_all_rows)?;
    let mut best = f64::INFINITY;
    let mut argmin = Vec::new();
    for m in all {
        let cost = objective_of(costs, &m);
        if cost < best {
            best = cost;
            argmin = vec![m];
        } else if cost == best && best.is_finite() {
            argmin.push(m);
        }
    }
    Ok((best, argmin))
}

fn objective_of(costs: &CostMatrix, m: &AlignmentMatrix) -> f64 {
    let mut total = 0.0;
    for &(i, j) in m.entries() {
        total += costs.cost(i, j);
    }
    for i in m.dropped_rows() {
        total += costs.drop_z()[i];
    }
    for j in m.dropped_cols() {
        total += costs.drop_x()[j];
    }
    total
}

/// Minimum warping-path cost by exhaustive enumeration of all paths with
/// diagonal / left / up steps and matched endpoints.
pub fn brute_force_dtw(c: &crate::types::Matrix) -> Result<f64, OracleError> {
    let (k, n) = (c.rows(), c.cols());
    if k > 6 || n > 6 {
        return Err(OracleError::InstanceTooLarge(format!("{k}x{n} exceeds the DTW path bound")));
    }
    fn rec(c: &crate::types::Matrix, i: usize, j: usize) -> f64 {
        let here = c.get(i, j);
        if i == 0 && j == 0 {
            return here;
        }
        let mut best = f64::INFINITY;
        if i > 0 && j > 0 {
            best = best.min(rec(c, i - 1, j - 1));
        }
        if j > 0 {
            best = best.min(rec(c, i, j - 1));
        }
        if i > 0 {
            best = best.min(rec(c, i - 1, j));
        }
        here + best
    }
    Ok(rec(c, k - 1, n - 1))
}
