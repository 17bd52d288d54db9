//! Match-cost matrices and drop-cost vectors built from embedded sequences.
//!
//! Two match costs are provided: a symmetric cosine dissimilarity and an
//! asymmetric negative-log-softmax cost (softmax taken over the elements of
//! Z, optionally restricted to its unique elements). Drop costs come from a
//! [`DropCostPolicy`]: a shared constant, a percentile of the match costs, a
//! bilinear map of the opposite sequence's mean, or the forbidden sentinel.

use thiserror::Error;

use crate::types::{validate_pair, CostMatrix, EmbeddedSequence, Matrix, TypeError, DROP_FORBIDDEN};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("element {index} of sequence {side} has near-zero norm")]
    ZeroNormElement { side: char, index: usize },
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("percentile must lie in [0, 100], got {0}")]
    BadPercentile(f64),
    #[error("constant drop cost must be nonnegative, got {0}")]
    NegativeConstant(f64),
    #[error("parameterized drop weights must be {expected}x{expected}, got {rows}x{cols}")]
    BadWeightShape { expected: usize, rows: usize, cols: usize },
}

/// How drop costs are derived for an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum DropCostPolicy {
    /// The same nonnegative constant on every element of both sides.
    Constant(f64),
    /// The nearest-rank p-th percentile of all K*N match costs.
    Percentile(f64),
    /// Bilinear forward map: `drop_x[j] = x_j . (W_x z_mean)` and
    /// `drop_z[i] = z_i . (W_z x_mean)`, clamped below at zero.
    Parameterized { weights_x: Matrix, weights_z: Matrix },
    /// Dropping forbidden on both sides.
    Infinite,
}

impl DropCostPolicy {
    pub fn validate(&self, dim: usize) -> Result<(), CostError> {
        match self {
            DropCostPolicy::Constant(s) => {
                if !s.is_finite() || *s < 0.0 {
                    return Err(CostError::NegativeConstant(*s));
                }
            }
            DropCostPolicy::Percentile(p) => {
                if !p.is_finite() || *p < 0.0 || *p > 100.0 {
                    return Err(CostError::BadPercentile(*p));
                }
            }
            DropCostPolicy::Parameterized { weights_x, weights_z } => {
                for w in [weights_x, weights_z] {
                    if w.rows() != dim || w.cols() != dim {
                        return Err(CostError::BadWeightShape {
                            expected: dim,
                            rows: w.rows(),
                            cols: w.cols(),
                        });
                    }
                }
            }
            DropCostPolicy::Infinite => {}
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric match cost: `1 - cos(z_i, x_j)`, in [0, 2].
pub fn symmetric_cost(z: &EmbeddedSequence, x: &EmbeddedSequence) -> Result<Matrix, CostError> {
    validate_pair(z, x)?;
    let mut z_norms = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let n = norm(z.element(i));
        if n < 1e-12 {
            return Err(CostError::ZeroNormElement { side: 'z', index: i });
        }
        z_norms.push(n);
    }
    let mut x_norms = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let n = norm(x.element(j));
        if n < 1e-12 {
            return Err(CostError::ZeroNormElement { side: 'x', index: j });
        }
        x_norms.push(n);
    }
    let mut c = Matrix::zeros(z.len(), x.len());
    for i in 0..z.len() {
        for j in 0..x.len() {
            let cos = dot(z.element(i), x.element(j)) / (z_norms[i] * x_norms[j]);
            c.set(i, j, 1.0 - cos);
        }
    }
    Ok(c)
}

/// Asymmetric match cost: `-log softmax_Z(z_i . x_j / gamma)`, the softmax
/// normalizing over the elements of Z for each column. With
/// `unique_denominator` the normalization runs over the distinct elements of
/// Z only (exact duplicates removed), so repeated entries do not flatten the
/// softmax.
pub fn asymmetric_cost(
    z: &EmbeddedSequence,
    x: &EmbeddedSequence,
    gamma: f64,
    unique_denominator: bool,
) -> Result<Matrix, CostError> {
    validate_pair(z, x)?;
    if !(gamma > 0.0) {
        return Err(CostError::NonPositiveGamma(gamma));
    }
    let denom_rows: Vec<usize> = if unique_denominator {
        unique_row_indices(z)
    } else {
        (0..z.len()).collect()
    };
    let mut c = Matrix::zeros(z.len(), x.len());
    for j in 0..x.len() {
        let xj = x.element(j);
        let logits: Vec<f64> = (0..z.len()).map(|i| dot(z.element(i), xj) / gamma).collect();
        let max = denom_rows
            .iter()
            .map(|&i| logits[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + denom_rows
                .iter()
                .map(|&i| (logits[i] - max).exp())
                .sum::<f64>()
                .ln();
        for i in 0..z.len() {
            // -log softmax = lse - logit; clamp tiny negative rounding.
            c.set(i, j, (lse - logits[i]).max(0.0));
        }
    }
    Ok(c)
}

/// Indices of the first occurrence of each distinct row of `z`, where rows
/// are considered equal when every coordinate differs by at most 1e-12.
fn unique_row_indices(z: &EmbeddedSequence) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    'rows: for i in 0..z.len() {
        for &k in &kept {
            let same = z
                .element(i)
                .iter()
                .zip(z.element(k))
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if same {
                continue 'rows;
            }
        }
        kept.push(i);
    }
    kept
}

/// Nearest-rank percentile: the ceil(p/100 * len)-th smallest value, with
/// p = 0 mapping to the minimum.
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let len = sorted.len();
    let rank = ((p / 100.0) * len as f64).ceil() as usize;
    sorted[rank.clamp(1, len) - 1]
}

/// Builds the drop-cost vectors for an instance under the given policy.
///
/// `z_mean` / `x_mean` are the arithmetic row means of the two sequences and
/// are only consulted by the parameterized policy; `z` / `x` likewise.
pub fn build_drop_costs(
    c: &Matrix,
    policy: &DropCostPolicy,
    z_mean: &[f64],
    x_mean: &[f64],
    z: &EmbeddedSequence,
    x: &EmbeddedSequence,
) -> Result<(Vec<f64>, Vec<f64>), CostError> {
    policy.validate(z.dim())?;
    let k = c.rows();
    let n = c.cols();
    match policy {
        DropCostPolicy::Constant(s) => Ok((vec![*s; k], vec![*s; n])),
        DropCostPolicy::Percentile(p) => {
            let s = nearest_rank_percentile(c.as_slice(), *p);
            Ok((vec![s; k], vec![s; n]))
        }
        DropCostPolicy::Parameterized { weights_x, weights_z } => {
            let wx_zmean = mat_vec(weights_x, z_mean);
            let wz_xmean = mat_vec(weights_z, x_mean);
            let drop_x = (0..n).map(|j| dot(x.element(j), &wx_zmean).max(0.0)).collect();
            let drop_z = (0..k).map(|i| dot(z.element(i), &wz_xmean).max(0.0)).collect();
            Ok((drop_z, drop_x))
        }
        DropCostPolicy::Infinite => Ok((vec![DROP_FORBIDDEN; k], vec![DROP_FORBIDDEN; n])),
    }
}

fn mat_vec(w: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..w.rows()).map(|i| dot(w.row(i), v)).collect()
}

/// Convenience: builds the full [`CostMatrix`] for a pair under a match-cost
/// kind and drop policy.
#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    Symmetric,
    Asymmetric { gamma: f64, unique_denominator: bool },
}

pub fn build_cost_matrix(
    z: &EmbeddedSequence,
    x: &EmbeddedSequence,
    kind: &CostKind,
    policy: &DropCostPolicy,
) -> Result<CostMatrix, CostError> {
    let values = match kind {
        CostKind::Symmetric => symmetric_cost(z, x)?,
        CostKind::Asymmetric { gamma, unique_denominator } => {
            asymmetric_cost(z, x, *gamma, *unique_denominator)?
        }
    };
    let (drop_z, drop_x) = build_drop_costs(&values, policy, &z.mean(), &x.mean(), z, x)?;
    Ok(CostMatrix::new(values, drop_z, drop_x)?)
}
