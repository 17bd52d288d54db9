//! Outlier-robust sequence alignment.
//!
//! The crate aligns two embedded sequences with dynamic time warping and its
//! drop-augmented extension, which jointly solves for the optimal monotone
//! correspondence while paying a per-element cost to leave outliers
//! unmatched on either side. A smoothed relaxation of the recursion makes
//! the alignment value differentiable in every match and drop cost.
//!
//! Alongside the aligners the crate ships the comparison baselines (greedy
//! drop + DTW, Needleman-Wunsch, LCSS, boundary-skip DTW), downstream task
//! procedures (retrieval scoring, subsequence localization, step-label
//! assignment and their metrics), brute-force reference oracles for
//! differential testing, and a deterministic synthetic trajectory-sequence
//! generator used by the benchmark harness.

pub mod align;
pub mod baselines;
pub mod costs;
pub mod grad;
pub mod oracle;
pub mod synth;
pub mod tasks;
pub mod types;

pub use align::{
    drop_dtw_one_sided, drop_dtw_one_sided_tables, drop_dtw_two_sided, drop_dtw_two_sided_tables,
    dtw, dtw_value, smooth_min, soft_min, traceback, AlignError,
};
pub use costs::{
    asymmetric_cost, build_cost_matrix, build_drop_costs, nearest_rank_percentile, symmetric_cost,
    CostError, CostKind, DropCostPolicy,
};
pub use grad::{drop_dtw_grad_with, drop_dtw_smooth_grad, GradientResult};
pub use types::{
    is_feasible_alignment, validate_pair, AlignmentMatrix, AlignmentResult, CostMatrix, DpTables,
    DpVariant, EmbeddedSequence, Matrix, MinOperator, TypeError, DROP_FORBIDDEN,
};
