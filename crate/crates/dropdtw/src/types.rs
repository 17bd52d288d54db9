//! Shared domain types: embedded sequences, cost matrices, alignments and
//! DP tables, plus the validation helpers every other module builds on.
//!
//! Conventions: the first sequence `Z` has `K` elements and indexes the rows
//! of every matrix; the second sequence `X` has `N` elements and indexes the
//! columns. Indices are 0-based in the API; the CLI renders them 1-based.

use thiserror::Error;

/// Sentinel drop cost meaning "dropping this element is forbidden".
pub const DROP_FORBIDDEN: f64 = f64::INFINITY;

/// Returns true when a drop-cost entry is the forbidden sentinel.
pub fn is_forbidden(d: f64) -> bool {
    d == DROP_FORBIDDEN
}

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("feature dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite value at element {row}, coordinate {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("ragged matrix: row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("drop cost at index {0} is negative or NaN")]
    BadDropCost(usize),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("alignment entry ({0}, {1}) is out of bounds")]
    EntryOutOfBounds(usize, usize),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TypeError> {
        if rows.is_empty() {
            return Err(TypeError::EmptySequence);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(TypeError::RaggedRows { row: i, got: r.len(), expected: cols });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the sub-matrix restricted to columns `lo..=hi`.
    pub fn column_window(&self, lo: usize, hi: usize) -> Matrix {
        assert!(lo <= hi && hi < self.cols);
        let w = hi - lo + 1;
        let mut out = Matrix::zeros(self.rows, w);
        for i in 0..self.rows {
            for j in 0..w {
                out.set(i, j, self.get(i, lo + j));
            }
        }
        out
    }

    /// Matrix with both row and column order reversed.
    pub fn reversed(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(self.rows - 1 - i, self.cols - 1 - j));
            }
        }
        out
    }

    pub fn transposed(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }
}

/// A length-N ordered list of d-dimensional feature vectors, with optional
/// per-element class labels used by the synthetic harness.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence {
    elements: Matrix,
    labels: Option<Vec<u32>>,
}

impl EmbeddedSequence {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, TypeError> {
        let elements = Matrix::from_rows(rows)?;
        Self::from_matrix(elements)
    }

    pub fn from_matrix(elements: Matrix) -> Result<Self, TypeError> {
        if elements.rows() == 0 || elements.cols() == 0 {
            return Err(TypeError::EmptySequence);
        }
        for i in 0..elements.rows() {
            for j in 0..elements.cols() {
                if !elements.get(i, j).is_finite() {
                    return Err(TypeError::NonFiniteValue { row: i, col: j });
                }
            }
        }
        Ok(EmbeddedSequence { elements, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self, TypeError> {
        if labels.len() != self.len() {
            return Err(TypeError::SizeMismatch(format!(
                "{} labels for {} elements",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.elements.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.elements.cols()
    }

    pub fn element(&self, i: usize) -> &[f64] {
        self.elements.row(i)
    }

    pub fn elements(&self) -> &Matrix {
        &self.elements
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    /// Arithmetic mean of the element vectors.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for i in 0..self.len() {
            for (acc, v) in m.iter_mut().zip(self.element(i)) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        for v in &mut m {
            *v /= n;
        }
        m
    }

    /// Concatenation of several sequences sharing a dimensionality.
    pub fn concat(parts: &[&EmbeddedSequence]) -> Result<Self, TypeError> {
        let first = parts.first().ok_or(TypeError::EmptySequence)?;
        let d = first.dim();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut any_labels = false;
        for p in parts {
            if p.dim() != d {
                return Err(TypeError::DimensionMismatch(d, p.dim()));
            }
            for i in 0..p.len() {
                rows.push(p.element(i).to_vec());
            }
            match p.labels() {
                Some(l) => {
                    any_labels = true;
                    labels.extend_from_slice(l);
                }
                None => labels.extend(std::iter::repeat(0).take(p.len())),
            }
        }
        let seq = EmbeddedSequence::new(&rows)?;
        if any_labels {
            seq.with_labels(labels)
        } else {
            Ok(seq)
        }
    }
}

/// Checks that two sequences can be paired for alignment: both non-empty,
/// finite (guaranteed by construction) and of equal feature dimension.
pub fn validate_pair(z: &EmbeddedSequence, x: &EmbeddedSequence) -> Result<(), TypeError> {
    if z.len() == 0 || x.len() == 0 {
        return Err(TypeError::EmptySequence);
    }
    if z.dim() != x.dim() {
        return Err(TypeError::DimensionMismatch(z.dim(), x.dim()));
    }
    Ok(())
}

/// Pairwise match costs plus per-element drop costs for both sequences.
///
/// `values` is K x N; `drop_z` has length K and `drop_x` length N. A drop
/// cost may be [`DROP_FORBIDDEN`] to forbid dropping on that side.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Matrix,
    drop_z: Vec<f64>,
    drop_x: Vec<f64>,
}

impl CostMatrix {
    pub fn new(values: Matrix, drop_z: Vec<f64>, drop_x: Vec<f64>) -> Result<Self, TypeError> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(TypeError::EmptySequence);
        }
        if drop_z.len() != values.rows() || drop_x.len() != values.cols() {
            return Err(TypeError::SizeMismatch(format!(
                "{}x{} costs with {} row drops and {} column drops",
                values.rows(),
                values.cols(),
                drop_z.len(),
                drop_x.len()
            )));
        }
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                if !values.get(i, j).is_finite() {
                    return Err(TypeError::NonFiniteValue { row: i, col: j });
                }
            }
        }
        for (idx, d) in drop_z.iter().chain(drop_x.iter()).enumerate() {
            if d.is_nan() || (*d < 0.0) {
                return Err(TypeError::BadDropCost(idx));
            }
        }
        Ok(CostMatrix { values, drop_z, drop_x })
    }

    /// Match-only costs with dropping forbidden on both sides.
    pub fn without_drops(values: Matrix) -> Result<Self, TypeError> {
        let k = values.rows();
        let n = values.cols();
        CostMatrix::new(values, vec![DROP_FORBIDDEN; k], vec![DROP_FORBIDDEN; n])
    }

    /// Same costs with row drops forbidden (the one-sided setting).
    pub fn forbid_row_drops(mut self) -> Self {
        for d in &mut self.drop_z {
            *d = DROP_FORBIDDEN;
        }
        self
    }

    pub fn k(&self) -> usize {
        self.values.rows()
    }

    pub fn n(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn drop_z(&self) -> &[f64] {
        &self.drop_z
    }

    pub fn drop_x(&self) -> &[f64] {
        &self.drop_x
    }

    /// The same instance with both index orders reversed (element K-1 first).
    pub fn reversed(&self) -> CostMatrix {
        let mut dz = self.drop_z.clone();
        let mut dx = self.drop_x.clone();
        dz.reverse();
        dx.reverse();
        CostMatrix { values: self.values.reversed(), drop_z: dz, drop_x: dx }
    }

    /// The instance with the roles of Z and X exchanged.
    pub fn swapped(&self) -> CostMatrix {
        CostMatrix {
            values: self.values.transposed(),
            drop_z: self.drop_x.clone(),
            drop_x: self.drop_z.clone(),
        }
    }
}

/// Binary correspondence matrix, stored as its set entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    k: usize,
    n: usize,
    entries: Vec<(usize, usize)>,
}

impl AlignmentMatrix {
    /// Builds from (row, col) entries; sorts and deduplicates them.
    pub fn from_entries(
        k: usize,
        n: usize,
        mut entries: Vec<(usize, usize)>,
    ) -> Result<Self, TypeError> {
        for &(i, j) in &entries {
            if i >= k || j >= n {
                return Err(TypeError::EntryOutOfBounds(i, j));
            }
        }
        entries.sort_unstable();
        entries.dedup();
        Ok(AlignmentMatrix { k, n, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Set entries in lexicographic order.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Rows with no set entry.
    pub fn dropped_rows(&self) -> Vec<usize> {
        let mut hit = vec![false; self.k];
        for &(i, _) in &self.entries {
            hit[i] = true;
        }
        (0..self.k).filter(|&i| !hit[i]).collect()
    }

    /// Columns with no set entry.
    pub fn dropped_cols(&self) -> Vec<usize> {
        let mut hit = vec![false; self.n];
        for &(_, j) in &self.entries {
            hit[j] = true;
        }
        (0..self.n).filter(|&j| !hit[j]).collect()
    }
}

/// True iff the matrix satisfies the chain condition (every pair of set
/// entries is comparable under componentwise <=), and, when
/// `require_all_rows_matched` is set, every row has at least one entry.
pub fn is_feasible_alignment(m: &AlignmentMatrix, require_all_rows_matched: bool) -> bool {
    // Entries are kept lexicographically sorted, so the chain condition
    // reduces to the column indices being non-decreasing.
    let e = m.entries();
    for w in e.windows(2) {
        if w[1].1 < w[0].1 {
            return false;
        }
    }
    if require_all_rows_matched {
        let mut hit = vec![false; m.k()];
        for &(i, _) in e {
            hit[i] = true;
        }
        if hit.iter().any(|h| !h) {
            return false;
        }
    }
    true
}

/// An alignment produced by one of the aligners: its total cost, the ordered
/// match pairs, and the dropped indices on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub total_cost: f64,
    pub matches: Vec<(usize, usize)>,
    pub dropped_rows: Vec<usize>,
    pub dropped_cols: Vec<usize>,
}

impl AlignmentResult {
    /// Builds a result from match pairs, deriving the dropped sets as the
    /// complements of the matched rows and columns.
    pub fn from_matches(k: usize, n: usize, total_cost: f64, mut matches: Vec<(usize, usize)>) -> Self {
        matches.sort_unstable();
        matches.dedup();
        let mut row_hit = vec![false; k];
        let mut col_hit = vec![false; n];
        for &(i, j) in &matches {
            row_hit[i] = true;
            col_hit[j] = true;
        }
        AlignmentResult {
            total_cost,
            matches,
            dropped_rows: (0..k).filter(|&i| !row_hit[i]).collect(),
            dropped_cols: (0..n).filter(|&j| !col_hit[j]).collect(),
        }
    }

    pub fn as_matrix(&self, k: usize, n: usize) -> AlignmentMatrix {
        AlignmentMatrix::from_entries(k, n, self.matches.clone())
            .expect("match indices in bounds")
    }

    /// Re-evaluates the drop-augmented alignment objective on this result:
    /// the matched costs plus one drop cost per dropped row and column.
    pub fn objective(&self, costs: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for &(i, j) in &self.matches {
            total += costs.cost(i, j);
        }
        for &i in &self.dropped_rows {
            total += costs.drop_z()[i];
        }
        for &j in &self.dropped_cols {
            total += costs.drop_x()[j];
        }
        total
    }
}

/// Operator used by the alignment DPs when combining candidate costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinOperator {
    /// Exact minimum.
    Hard,
    /// `x . softmax(-x / gamma)`: a convex combination that tends to the
    /// minimum as gamma shrinks.
    SmoothMin(f64),
    /// `-gamma * log(sum(exp(-x / gamma)))`: a lower bound on the minimum.
    SoftMin(f64),
}

impl MinOperator {
    pub fn is_hard(&self) -> bool {
        matches!(self, MinOperator::Hard)
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            MinOperator::Hard => None,
            MinOperator::SmoothMin(g) | MinOperator::SoftMin(g) => Some(*g),
        }
    }
}

/// Which Drop-DTW recursion produced a set of tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpVariant {
    OneSided,
    TwoSided,
}

/// The DP value tables retained for traceback and gradients, together with
/// the instance and the operator that produced them.
///
/// All tables are (K+1) x (N+1); row and column 0 hold the initializations.
#[derive(Debug, Clone)]
pub enum DpTables {
    OneSided {
        costs: CostMatrix,
        min_op: MinOperator,
        /// Optimal-solution table D.
        d: Matrix,
        /// Match table D+.
        d_match: Matrix,
        /// Drop table D-.
        d_drop: Matrix,
    },
    TwoSided {
        costs: CostMatrix,
        min_op: MinOperator,
        /// Both ends matched.
        d_zx: Matrix,
        /// Z end matched, X end dropped.
        d_zd: Matrix,
        /// Z end dropped, X end matched.
        d_dx: Matrix,
        /// Both ends dropped.
        d_dd: Matrix,
    },
}

impl DpTables {
    pub fn variant(&self) -> DpVariant {
        match self {
            DpTables::OneSided { .. } => DpVariant::OneSided,
            DpTables::TwoSided { .. } => DpVariant::TwoSided,
        }
    }

    pub fn min_op(&self) -> MinOperator {
        match self {
            DpTables::OneSided { min_op, .. } | DpTables::TwoSided { min_op, .. } => *min_op,
        }
    }

    pub fn costs(&self) -> &CostMatrix {
        match self {
            DpTables::OneSided { costs, .. } | DpTables::TwoSided { costs, .. } => costs,
        }
    }

    /// The optimal (or smoothed) alignment cost D_{K,N}.
    pub fn final_cost(&self) -> f64 {
        let (k, n) = (self.costs().k(), self.costs().n());
        match self {
            DpTables::OneSided { d, .. } => d.get(k, n),
            DpTables::TwoSided { d_zx, d_zd, d_dx, d_dd, min_op, .. } => {
                let cands = [d_zx.get(k, n), d_zd.get(k, n), d_dx.get(k, n), d_dd.get(k, n)];
                crate::align::reduce_candidates(*min_op, &cands)
            }
        }
    }
}
