//! Downstream procedures built on the aligners: retrieval scoring,
//! subsequence localization, step-label assignment, evaluation metrics, and
//! the loss values used when the alignment cost drives training.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::align::{
    drop_dtw_one_sided, drop_dtw_one_sided_tables, drop_dtw_two_sided, drop_dtw_two_sided_tables,
    dtw, AlignError,
};
use crate::baselines::{greedy_drop_then_dtw, lcss, needleman_wunsch, otam_boundary_skip, BaselineError};
use crate::costs::{build_cost_matrix, CostError, CostKind, DropCostPolicy};
use crate::types::{AlignmentResult, CostMatrix, EmbeddedSequence, Matrix, MinOperator, TypeError};

/// Default softmax temperature for the asymmetric cost and attention pooling.
pub const DEFAULT_GAMMA: f64 = 0.1;
/// Default drop-cost percentile for step localization.
pub const DEFAULT_PERCENTILE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("alignment produced {found} matched runs, fewer than the {requested} requested")]
    FewerRunsThanRequested {
        requested: usize,
        found: usize,
        runs: Vec<(usize, usize)>,
    },
    #[error("label vectors have different lengths: {0} vs {1}")]
    LabelLengthMismatch(usize, usize),
}

/// Which aligner a task should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dtw,
    DropDtwOneSided,
    DropDtwTwoSided,
    GreedyDropDtw,
    NeedlemanWunsch,
    Lcss,
    Otam,
}

/// Cost construction plus aligner choice for the task procedures.
#[derive(Debug, Clone)]
pub struct AlignConfig {
    pub cost: CostKind,
    pub drop: DropCostPolicy,
    pub algorithm: Algorithm,
}

impl AlignConfig {
    pub fn new(cost: CostKind, drop: DropCostPolicy, algorithm: Algorithm) -> Self {
        AlignConfig { cost, drop, algorithm }
    }
}

/// LCSS admissibility threshold for an instance: the drop-cost scale.
fn lcss_epsilon(costs: &CostMatrix) -> f64 {
    let finite: Vec<f64> = costs.drop_x().iter().copied().filter(|d| d.is_finite()).collect();
    if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

/// Runs the configured aligner on a prebuilt cost matrix.
pub fn run_aligner(costs: &CostMatrix, algorithm: Algorithm) -> Result<AlignmentResult, TaskError> {
    Ok(match algorithm {
        Algorithm::Dtw => dtw(costs.values(), MinOperator::Hard)?,
        Algorithm::DropDtwOneSided => {
            drop_dtw_one_sided(&costs.clone().forbid_row_drops(), MinOperator::Hard)?.0
        }
        Algorithm::DropDtwTwoSided => drop_dtw_two_sided(costs, MinOperator::Hard)?.0,
        Algorithm::GreedyDropDtw => greedy_drop_then_dtw(costs)?,
        Algorithm::NeedlemanWunsch => needleman_wunsch(costs),
        Algorithm::Lcss => lcss(costs, lcss_epsilon(costs)).1,
        Algorithm::Otam => otam_boundary_skip(costs, false)?,
    })
}

/// Alignment score between a query and a candidate under the configured
/// cost, drops, and aligner. Lower means more similar; no normalization.
pub fn retrieval_score(
    query: &EmbeddedSequence,
    candidate: &EmbeddedSequence,
    config: &AlignConfig,
) -> Result<f64, TaskError> {
    let costs = build_cost_matrix(query, candidate, &config.cost, &config.drop)?;
    Ok(run_aligner(&costs, config.algorithm)?.total_cost)
}

/// Fraction of queries whose best-scoring gallery item shares their class.
/// Score ties resolve to the lowest gallery index.
pub fn recall_at_1(
    queries: &[(EmbeddedSequence, u32)],
    gallery: &[(EmbeddedSequence, u32)],
    config: &AlignConfig,
) -> Result<f64, TaskError> {
    assert!(!queries.is_empty() && !gallery.is_empty());
    let mut correct = 0usize;
    for (query, class) in queries {
        let mut best = f64::INFINITY;
        let mut best_class = None;
        for (item, item_class) in gallery {
            let score = retrieval_score(query, item, config)?;
            if score < best {
                best = score;
                best_class = Some(*item_class);
            }
        }
        if best_class == Some(*class) {
            correct += 1;
        }
    }
    Ok(correct as f64 / queries.len() as f64)
}

/// Groups the matched signal columns of a two-sided Drop-DTW alignment into
/// maximal consecutive runs and returns the `n` longest as inclusive
/// (start, end) intervals ordered by start. Run-length ties prefer the
/// earlier start. Fewer than `n` runs is reported as an error carrying all
/// the runs found.
pub fn localize_subsequences(
    query: &EmbeddedSequence,
    signal: &EmbeddedSequence,
    n: usize,
    config: &AlignConfig,
) -> Result<Vec<(usize, usize)>, TaskError> {
    assert!(n >= 1);
    let costs = build_cost_matrix(query, signal, &config.cost, &config.drop)?;
    let (result, _) = drop_dtw_two_sided(&costs, MinOperator::Hard)?;
    let mut cols: Vec<usize> = result.matches.iter().map(|&(_, j)| j).collect();
    cols.sort_unstable();
    cols.dedup();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for c in cols {
        match runs.last_mut() {
            Some((_, e)) if *e + 1 == c => *e = c,
            _ => runs.push((c, c)),
        }
    }
    if runs.len() < n {
        return Err(TaskError::FewerRunsThanRequested { requested: n, found: runs.len(), runs });
    }
    // Longest n runs, ties by earlier start, reported in signal order.
    runs.sort_by_key(|&(s, e)| (usize::MAX - (e - s + 1), s));
    let mut picked: Vec<(usize, usize)> = runs.into_iter().take(n).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Per-element step labels with 0 reserved for background, plus the derived
/// per-step interval lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTimeline {
    labels: Vec<u32>,
    num_steps: u32,
    intervals: BTreeMap<u32, Vec<(usize, usize)>>,
}

impl LabeledTimeline {
    pub fn new(labels: Vec<u32>, num_steps: u32) -> Self {
        let intervals = intervals_from_labels(&labels);
        LabeledTimeline { labels, num_steps, intervals }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_steps(&self) -> u32 {
        self.num_steps
    }

    pub fn intervals(&self) -> &BTreeMap<u32, Vec<(usize, usize)>> {
        &self.intervals
    }
}

/// Maximal same-label runs for each non-background label.
fn intervals_from_labels(labels: &[u32]) -> BTreeMap<u32, Vec<(usize, usize)>> {
    let mut out: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    let mut i = 0;
    while i < labels.len() {
        let l = labels[i];
        let start = i;
        while i + 1 < labels.len() && labels[i + 1] == l {
            i += 1;
        }
        if l != 0 {
            out.entry(l).or_default().push((start, i));
        }
        i += 1;
    }
    out
}

/// Step-label assignment for every element of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLocalizationOutput {
    pub labels: Vec<u32>,
    pub intervals: BTreeMap<u32, Vec<(usize, usize)>>,
}

/// Configuration for [`assign_step_labels`].
#[derive(Debug, Clone)]
pub struct StepLabelConfig {
    pub gamma: f64,
    pub percentile: f64,
    pub cost: CostKind,
}

impl Default for StepLabelConfig {
    fn default() -> Self {
        StepLabelConfig {
            gamma: DEFAULT_GAMMA,
            percentile: DEFAULT_PERCENTILE,
            cost: CostKind::Asymmetric { gamma: DEFAULT_GAMMA, unique_denominator: true },
        }
    }
}

/// Aligns a sequence of ordered step embeddings against a video sequence
/// with one-sided Drop-DTW (every step must occur) under a percentile drop
/// cost on the video side. Matched elements get their step's 1-based index;
/// dropped elements get the background label 0.
pub fn assign_step_labels(
    video: &EmbeddedSequence,
    steps: &EmbeddedSequence,
    config: &StepLabelConfig,
) -> Result<StepLocalizationOutput, TaskError> {
    let costs = build_cost_matrix(
        steps,
        video,
        &config.cost,
        &DropCostPolicy::Percentile(config.percentile),
    )?
    .forbid_row_drops();
    let (result, _) = drop_dtw_one_sided(&costs, MinOperator::Hard)?;
    let mut labels = vec![0u32; video.len()];
    // Matches are sorted; the first row matching a column labels it.
    for &(i, j) in result.matches.iter().rev() {
        labels[j] = i as u32 + 1;
    }
    let intervals = intervals_from_labels(&labels);
    Ok(StepLocalizationOutput { labels, intervals })
}

/// Fraction of steps with at least one predicted element inside one of that
/// step's ground-truth intervals.
pub fn metric_recall(pred: &StepLocalizationOutput, truth: &LabeledTimeline) -> f64 {
    assert_eq!(pred.labels.len(), truth.len());
    let k = truth.num_steps();
    if k == 0 {
        return 1.0;
    }
    let mut recalled = 0u32;
    for step in 1..=k {
        let hit = pred
            .labels
            .iter()
            .zip(truth.labels())
            .any(|(&p, &t)| p == step && t == step);
        if hit {
            recalled += 1;
        }
    }
    recalled as f64 / k as f64
}

/// Exact per-element label agreement, background included.
pub fn metric_framewise_acc(pred: &StepLocalizationOutput, truth: &LabeledTimeline) -> f64 {
    assert_eq!(pred.labels.len(), truth.len());
    let agree = pred
        .labels
        .iter()
        .zip(truth.labels())
        .filter(|(p, t)| p == t)
        .count();
    agree as f64 / truth.len() as f64
}

/// Summed per-step intersection over summed per-step union of the predicted
/// and ground-truth element sets, background excluded. Both empty counts as
/// a perfect 1.0.
pub fn metric_iou(pred: &StepLocalizationOutput, truth: &LabeledTimeline) -> f64 {
    assert_eq!(pred.labels.len(), truth.len());
    let k = truth.num_steps();
    let mut inter = 0usize;
    let mut union = 0usize;
    for step in 1..=k {
        for (p, t) in pred.labels.iter().zip(truth.labels()) {
            let in_p = *p == step;
            let in_t = *t == step;
            inter += (in_p && in_t) as usize;
            union += (in_p || in_t) as usize;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Configuration for the differentiable alignment loss.
#[derive(Debug, Clone)]
pub struct LossConfig {
    pub gamma: f64,
    pub two_sided: bool,
    pub cost: CostKind,
    pub drop: DropCostPolicy,
}

/// Smoothed forward Drop-DTW value; the matching gradient is available via
/// [`crate::grad::drop_dtw_smooth_grad`] on the same cost matrix.
pub fn loss_drop_dtw(
    z: &EmbeddedSequence,
    x: &EmbeddedSequence,
    config: &LossConfig,
) -> Result<f64, TaskError> {
    let costs = build_cost_matrix(z, x, &config.cost, &config.drop)?;
    let op = MinOperator::SmoothMin(config.gamma);
    let value = if config.two_sided {
        drop_dtw_two_sided_tables(&costs, op)?.final_cost()
    } else {
        drop_dtw_one_sided_tables(&costs.forbid_row_drops(), op)?.final_cost()
    };
    Ok(value)
}

/// Clustering regularizer: attention-pool the sequence `x` against each
/// element of `z` and measure the Frobenius distance of the pooled Gram
/// matrix from the identity.
pub fn loss_clustering(
    z: &EmbeddedSequence,
    x: &EmbeddedSequence,
    gamma: f64,
) -> Result<f64, TaskError> {
    crate::types::validate_pair(z, x)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(TaskError::Align(AlignError::NonPositiveGamma(gamma)));
    }
    let k = z.len();
    let n = x.len();
    let d = z.dim();
    let mut pooled = Matrix::zeros(k, d);
    for i in 0..k {
        let zi = z.element(i);
        let logits: Vec<f64> = (0..n)
            .map(|j| x.element(j).iter().zip(zi).map(|(a, b)| a * b).sum::<f64>() / gamma)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (j, w) in weights.iter().enumerate() {
            for (c, v) in x.element(j).iter().enumerate() {
                pooled.set(i, c, pooled.get(i, c) + v * w / total);
            }
        }
    }
    // || I - pooled Z^T ||_F
    let mut sq = 0.0;
    for i in 0..k {
        for j in 0..k {
            let g: f64 = (0..d).map(|c| pooled.get(i, c) * z.element(j)[c]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            sq += (target - g) * (target - g);
        }
    }
    Ok(sq.sqrt())
}

/// Hinge margin on a positive/negative alignment-cost pair:
/// `max(d_pos - d_neg + beta, 0)` with `beta >= 0`.
pub fn loss_margin(d_pos: f64, d_neg: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    (d_pos - d_neg + beta).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_localization_instance, SynthConfig, TrajectoryClass, TrajectoryShape};

    fn seq(rows: &[&[f64]]) -> EmbeddedSequence {
        EmbeddedSequence::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn sym_config(algorithm: Algorithm, drop: DropCostPolicy) -> AlignConfig {
        AlignConfig::new(CostKind::Symmetric, drop, algorithm)
    }

    #[test]
    fn retrieval_score_is_zero_for_identical_sequences_under_dtw() {
        let q = seq(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let config = sym_config(Algorithm::Dtw, DropCostPolicy::Infinite);
        let s = retrieval_score(&q, &q, &config).unwrap();
        assert!(s.abs() < 1e-9);
        // And strictly lower than against an orthogonal-feature candidate.
        let far = seq(&[&[-1.0, 0.5], &[0.5, -1.0], &[-1.0, -1.0]]);
        assert!(retrieval_score(&q, &far, &config).unwrap() > s);
    }

    #[test]
    fn recall_at_1_forced_cases() {
        let a = seq(&[&[1.0, 0.0]]);
        let b = seq(&[&[0.0, 1.0]]);
        let config = sym_config(Algorithm::Dtw, DropCostPolicy::Infinite);
        // Gallery of one: always recalled.
        assert_eq!(recall_at_1(&[(a.clone(), 0)], &[(a.clone(), 0)], &config).unwrap(), 1.0);
        // Correct item scores second-best: never recalled.
        let r = recall_at_1(&[(a.clone(), 1)], &[(a.clone(), 0), (b, 1)], &config).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn localize_finds_the_planted_intervals() {
        // signal = [target | noise | target] with well-separated features.
        let target_block = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.1]];
        let noise_block = [[0.0, 1.0, 0.0], [0.0, 1.0, 0.1], [0.0, 1.0, 0.2]];
        let mut rows: Vec<Vec<f64>> = Vec::new();
        rows.extend(target_block.iter().map(|r| r.to_vec()));
        rows.extend(noise_block.iter().map(|r| r.to_vec()));
        rows.extend(target_block.iter().map(|r| r.to_vec()));
        let signal = EmbeddedSequence::new(&rows).unwrap();
        let query = seq(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.1], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.1]]);
        let config =
            sym_config(Algorithm::DropDtwTwoSided, DropCostPolicy::Constant(0.3));
        let runs = localize_subsequences(&query, &signal, 2, &config).unwrap();
        assert_eq!(runs, vec![(0, 1), (5, 6)]);
    }

    #[test]
    fn localize_full_match_returns_the_whole_range() {
        let q = seq(&[&[1.0, 0.2], &[0.9, 0.4], &[0.8, 0.6]]);
        let config = sym_config(Algorithm::DropDtwTwoSided, DropCostPolicy::Constant(0.3));
        let runs = localize_subsequences(&q, &q, 1, &config).unwrap();
        assert_eq!(runs, vec![(0, 2)]);
    }

    #[test]
    fn localize_reports_missing_runs() {
        let q = seq(&[&[1.0, 0.0]]);
        let config = sym_config(Algorithm::DropDtwTwoSided, DropCostPolicy::Constant(0.3));
        match localize_subsequences(&q, &q, 2, &config) {
            Err(TaskError::FewerRunsThanRequested { requested: 2, found: 1, runs }) => {
                assert_eq!(runs, vec![(0, 0)]);
            }
            other => panic!("expected FewerRunsThanRequested, got {other:?}"),
        }
    }

    #[test]
    fn localization_on_a_synthetic_instance() {
        let config = SynthConfig::default();
        let target = TrajectoryClass::new(4, TrajectoryShape::CircleCw);
        let inst = build_localization_instance(&target, 2, 6, &config);
        let align = sym_config(Algorithm::DropDtwTwoSided, DropCostPolicy::Constant(0.3));
        let runs = localize_subsequences(&inst.query, &inst.signal, 2, &align).unwrap();
        // Both predicted intervals overlap their ground-truth counterparts.
        for (run, truth) in runs.iter().zip(&inst.truth) {
            assert!(run.0 <= truth.1 && truth.0 <= run.1, "{run:?} vs {truth:?}");
        }
    }

    #[test]
    fn step_labels_on_a_constructed_three_step_video() {
        // Steps are three orthogonal directions; the video interleaves
        // step-aligned segments with far-away background frames.
        let steps = seq(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]]);
        let bg = [0.0, 0.0, 0.0, 1.0];
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            bg.to_vec(),
            vec![0.0, 1.0, 0.0, 0.0],
            bg.to_vec(),
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let video = EmbeddedSequence::new(&rows).unwrap();
        let config = StepLabelConfig {
            cost: CostKind::Symmetric,
            percentile: 30.0,
            gamma: DEFAULT_GAMMA,
        };
        let out = assign_step_labels(&video, &steps, &config).unwrap();
        assert_eq!(out.labels, vec![1, 1, 0, 2, 0, 3, 3]);
        assert_eq!(out.intervals[&1], vec![(0, 1)]);
        assert_eq!(out.intervals[&2], vec![(3, 3)]);
        assert_eq!(out.intervals[&3], vec![(5, 6)]);
    }

    #[test]
    fn single_step_video_with_identical_clips_is_all_foreground() {
        let steps = seq(&[&[0.5, 0.5]]);
        let video = seq(&[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]]);
        let config = StepLabelConfig { cost: CostKind::Symmetric, ..Default::default() };
        let out = assign_step_labels(&video, &steps, &config).unwrap();
        assert_eq!(out.labels, vec![1, 1, 1]);
    }

    #[test]
    fn metrics_trivial_and_constructed_cases() {
        let truth = LabeledTimeline::new(vec![1, 1, 0, 2, 2, 0], 2);
        let perfect = StepLocalizationOutput {
            labels: truth.labels().to_vec(),
            intervals: intervals_from_labels(truth.labels()),
        };
        assert_eq!(metric_recall(&perfect, &truth), 1.0);
        assert_eq!(metric_framewise_acc(&perfect, &truth), 1.0);
        assert_eq!(metric_iou(&perfect, &truth), 1.0);

        let all_bg = StepLocalizationOutput {
            labels: vec![0; truth.len()],
            intervals: BTreeMap::new(),
        };
        assert_eq!(metric_recall(&all_bg, &truth), 0.0);
        assert_eq!(metric_iou(&all_bg, &truth), 0.0);
        assert!((metric_framewise_acc(&all_bg, &truth) - 2.0 / 6.0).abs() < 1e-12);

        // One of two steps recalled.
        let half = StepLocalizationOutput {
            labels: vec![1, 1, 0, 0, 0, 0],
            intervals: intervals_from_labels(&[1, 1, 0, 0, 0, 0]),
        };
        assert_eq!(metric_recall(&half, &truth), 0.5);

        // Complement labeling on a binary case scores zero accuracy.
        let t2 = LabeledTimeline::new(vec![1, 0, 1, 0], 1);
        let flipped = StepLocalizationOutput {
            labels: vec![0, 1, 0, 1],
            intervals: intervals_from_labels(&[0, 1, 0, 1]),
        };
        assert_eq!(metric_framewise_acc(&flipped, &t2), 0.0);

        // Per-step half-overlap: |intersection| = 1, |union| = 3 per step.
        let t3 = LabeledTimeline::new(vec![1, 1, 0, 2, 2, 0], 2);
        let shifted = StepLocalizationOutput {
            labels: vec![0, 1, 1, 0, 2, 2],
            intervals: intervals_from_labels(&[0, 1, 1, 0, 2, 2]),
        };
        assert!((metric_iou(&shifted, &t3) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn loss_drop_dtw_smoothing_gap_shrinks_with_gamma() {
        let z = seq(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let x = seq(&[&[1.0, 0.0], &[0.4, 0.4], &[0.0, 1.0]]);
        let mk = |gamma| LossConfig {
            gamma,
            two_sided: true,
            cost: CostKind::Symmetric,
            drop: DropCostPolicy::Constant(0.3),
        };
        let costs = build_cost_matrix(&z, &x, &CostKind::Symmetric, &DropCostPolicy::Constant(0.3))
            .unwrap();
        let hard = drop_dtw_two_sided(&costs, MinOperator::Hard).unwrap().0.total_cost;
        let l1 = loss_drop_dtw(&z, &x, &mk(1.0)).unwrap();
        let l2 = loss_drop_dtw(&z, &x, &mk(0.01)).unwrap();
        assert!((l2 - hard).abs() <= (l1 - hard).abs() + 1e-12);
        assert!((l2 - hard).abs() < 1e-2);
    }

    #[test]
    fn loss_drop_dtw_identical_sequences_is_near_zero() {
        let z = seq(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let config = LossConfig {
            gamma: 0.05,
            two_sided: true,
            cost: CostKind::Symmetric,
            drop: DropCostPolicy::Constant(0.5),
        };
        let v = loss_drop_dtw(&z, &z, &config).unwrap();
        // Smoothing can only move the value by about gamma * log(#cands).
        assert!(v.abs() < 0.05 * 10.0);
    }

    #[test]
    fn loss_clustering_limits() {
        // Sharp softmax and matching orthonormal sequences: pooled Gram is
        // the identity, loss 0.
        let z = seq(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let v = loss_clustering(&z, &z, 1e-3).unwrap();
        assert!(v < 1e-9, "got {v}");
        // Pooled vectors orthogonal to every step: ||I||_F = sqrt(K).
        let x = seq(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        let v = loss_clustering(&z, &x, 1.0).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn loss_clustering_matches_a_two_step_oracle() {
        let z = seq(&[&[0.3, 0.8, -0.2], &[-0.5, 0.1, 0.9]]);
        let x = seq(&[&[0.2, 0.4, 0.6], &[0.9, -0.1, 0.3], &[-0.3, 0.5, 0.1]]);
        let gamma = 0.7;
        // Independent evaluation: pool, then norm, with separate loops.
        let mut pooled = vec![vec![0.0; 3]; 2];
        for i in 0..2 {
            let logits: Vec<f64> = (0..3)
                .map(|j| {
                    x.element(j).iter().zip(z.element(i)).map(|(a, b)| a * b).sum::<f64>() / gamma
                })
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ws: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let tot: f64 = ws.iter().sum();
            for j in 0..3 {
                for c in 0..3 {
                    pooled[i][c] += x.element(j)[c] * ws[j] / tot;
                }
            }
        }
        let mut sq = 0.0;
        for i in 0..2 {
            for jj in 0..2 {
                let g: f64 = (0..3).map(|c| pooled[i][c] * z.element(jj)[c]).sum();
                let t = if i == jj { 1.0 } else { 0.0 };
                sq += (t - g) * (t - g);
            }
        }
        let oracle = sq.sqrt();
        let v = loss_clustering(&z, &x, gamma).unwrap();
        assert!((v - oracle).abs() < 1e-9);
    }

    #[test]
    fn loss_margin_cases() {
        assert!((loss_margin(0.7, 0.7, 0.5) - 0.5).abs() < 1e-12);
        assert_eq!(loss_margin(0.1, 1.0, 0.5), 0.0);
        assert!((loss_margin(1.0, 0.2, 0.5) - 1.3).abs() < 1e-12);
    }
}
