//! Deterministic synthetic trajectory sequences for the benchmark harness.
//!
//! Each of the 80 classes pairs a digit (0..9) with one of eight parametric
//! curves. An element's feature vector is the digit one-hot (10 dims)
//! concatenated with the curve position (2 dims) at that element's
//! parameter, so class identity and trajectory dynamics are both encoded
//! without any learned frame encoder. Everything is a pure function of
//! (class, config, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::EmbeddedSequence;

pub const NUM_DIGITS: u8 = 10;
pub const NUM_SHAPES: u8 = 8;
pub const NUM_CLASSES: u32 = (NUM_DIGITS as u32) * (NUM_SHAPES as u32);
pub const FEATURE_DIM: usize = 12;

/// The eight parametric curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrajectoryShape {
    FigureEightCw,
    LemniscateCw,
    CircleCw,
    FigureEightCcw,
    LemniscateCcw,
    CircleCcw,
    DiagonalUp,
    DiagonalDown,
}

impl TrajectoryShape {
    pub const ALL: [TrajectoryShape; 8] = [
        TrajectoryShape::FigureEightCw,
        TrajectoryShape::LemniscateCw,
        TrajectoryShape::CircleCw,
        TrajectoryShape::FigureEightCcw,
        TrajectoryShape::LemniscateCcw,
        TrajectoryShape::CircleCcw,
        TrajectoryShape::DiagonalUp,
        TrajectoryShape::DiagonalDown,
    ];

    pub fn index(&self) -> u8 {
        Self::ALL.iter().position(|s| s == self).unwrap() as u8
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryShape::FigureEightCw => "figure_eight_cw",
            TrajectoryShape::LemniscateCw => "lemniscate_cw",
            TrajectoryShape::CircleCw => "circle_cw",
            TrajectoryShape::FigureEightCcw => "figure_eight_ccw",
            TrajectoryShape::LemniscateCcw => "lemniscate_ccw",
            TrajectoryShape::CircleCcw => "circle_ccw",
            TrajectoryShape::DiagonalUp => "diagonal_up",
            TrajectoryShape::DiagonalDown => "diagonal_down",
        }
    }

    /// Curve position at parameter `t` in [0, 1].
    pub fn position(&self, t: f64) -> (f64, f64) {
        use std::f64::consts::TAU;
        match self {
            TrajectoryShape::CircleCw => (0.5 * (TAU * t).cos(), 0.5 * (TAU * t).sin()),
            TrajectoryShape::LemniscateCw => (0.5 * (TAU * t).sin(), 0.25 * (2.0 * TAU * t).sin()),
            TrajectoryShape::FigureEightCw => (0.25 * (TAU * t).sin(), 0.5 * (2.0 * TAU * t).sin()),
            TrajectoryShape::CircleCcw => TrajectoryShape::CircleCw.position(1.0 - t),
            TrajectoryShape::LemniscateCcw => TrajectoryShape::LemniscateCw.position(1.0 - t),
            TrajectoryShape::FigureEightCcw => TrajectoryShape::FigureEightCw.position(1.0 - t),
            TrajectoryShape::DiagonalUp => (t, t),
            TrajectoryShape::DiagonalDown => (t, 1.0 - t),
        }
    }
}

/// One of the 80 digit-trajectory classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrajectoryClass {
    pub digit: u8,
    pub shape: TrajectoryShape,
}

impl TrajectoryClass {
    pub fn new(digit: u8, shape: TrajectoryShape) -> Self {
        assert!(digit < NUM_DIGITS);
        TrajectoryClass { digit, shape }
    }

    pub fn index(&self) -> u32 {
        self.digit as u32 * NUM_SHAPES as u32 + self.shape.index() as u32
    }

    pub fn from_index(index: u32) -> Self {
        assert!(index < NUM_CLASSES);
        TrajectoryClass {
            digit: (index / NUM_SHAPES as u32) as u8,
            shape: TrajectoryShape::ALL[(index % NUM_SHAPES as u32) as usize],
        }
    }

    pub fn all() -> Vec<TrajectoryClass> {
        (0..NUM_CLASSES).map(TrajectoryClass::from_index).collect()
    }

    fn feature(&self, t: f64) -> Vec<f64> {
        let mut f = vec![0.0; FEATURE_DIM];
        f[self.digit as usize] = 1.0;
        let (x, y) = self.shape.position(t);
        f[10] = x;
        f[11] = y;
        f
    }
}

/// Generation parameters. Lengths are sampled uniformly from
/// `t_min..=t_max`; partial clips cover a contiguous parameter window whose
/// width is drawn from `part_fraction_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub t_min: usize,
    pub t_max: usize,
    pub part_fraction_range: (f64, f64),
    pub noise_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            t_min: 30,
            t_max: 50,
            part_fraction_range: (0.3, 0.7),
            noise_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(&self, seed: u64) -> SynthConfig {
        SynthConfig { seed, ..self.clone() }
    }
}

/// SplitMix64 step; used to derive independent deterministic streams.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15)
        .wrapping_mul(0xBF58476D1CE4E5B9)
        ^ tag.wrapping_mul(0x94D049BB133111EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn stream(config: &SynthConfig, class: &TrajectoryClass, kind: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(config.seed, class.index() as u64), kind))
}

fn emit(class: &TrajectoryClass, params: impl Iterator<Item = f64>) -> EmbeddedSequence {
    let rows: Vec<Vec<f64>> = params.map(|t| class.feature(t)).collect();
    let n = rows.len();
    EmbeddedSequence::new(&rows)
        .expect("curve features are finite")
        .with_labels(vec![class.index(); n])
        .expect("one label per element")
}

fn sample_len(rng: &mut ChaCha8Rng, config: &SynthConfig) -> usize {
    rng.gen_range(config.t_min..=config.t_max)
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    })
}

/// A clip covering the full trajectory: T elements at equally spaced
/// parameters over [0, 1], T drawn from the configured length range.
pub fn generate_full(class: &TrajectoryClass, config: &SynthConfig) -> EmbeddedSequence {
    let mut rng = stream(config, class, 1);
    let t = sample_len(&mut rng, config);
    emit(class, linspace(0.0, 1.0, t))
}

/// A clip covering a random contiguous portion of the trajectory.
pub fn generate_part(class: &TrajectoryClass, config: &SynthConfig) -> EmbeddedSequence {
    let mut rng = stream(config, class, 2);
    let t = sample_len(&mut rng, config);
    let (lo, hi) = config.part_fraction_range;
    let fraction = rng.gen_range(lo..=hi);
    let start = rng.gen_range(0.0..=(1.0 - fraction));
    emit(class, linspace(start, start + fraction, t))
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1], keeps ln finite
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Replaces a uniformly chosen `floor(rate * N)`-subset of elements with
/// zero-mean Gaussian vectors whose per-coordinate standard deviation
/// matches the clean sequence. Element positions and order are preserved.
pub fn contaminate(seq: &EmbeddedSequence, noise_rate: f64, seed: u64) -> EmbeddedSequence {
    assert!((0.0..=1.0).contains(&noise_rate));
    let n = seq.len();
    let d = seq.dim();
    let m = (noise_rate * n as f64).floor() as usize;
    if m == 0 {
        return seq.clone();
    }
    let mut std = vec![0.0; d];
    let mean = seq.mean();
    for i in 0..n {
        for (c, (v, mu)) in seq.element(i).iter().zip(&mean).enumerate() {
            std[c] += (v - mu) * (v - mu);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    // Partial Fisher-Yates over the index vector picks the outlier subset.
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let swap = rng.gen_range(k..n);
        idx.swap(k, swap);
    }
    let mut outliers = idx[..m].to_vec();
    outliers.sort_unstable();

    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| seq.element(i).to_vec()).collect();
    for &i in &outliers {
        for (c, v) in rows[i].iter_mut().enumerate() {
            *v = std[c] * box_muller(&mut rng);
        }
    }
    let out = EmbeddedSequence::new(&rows).expect("noise vectors are finite");
    match seq.labels() {
        Some(l) => out.with_labels(l.to_vec()).unwrap(),
        None => out,
    }
}

/// A subsequence-localization instance: a signal of `m` concatenated partial
/// clips of which exactly `n` belong to the target class, the query of `n`
/// full target clips, and the ground-truth element intervals (inclusive) of
/// the target clips inside the signal.
pub struct LocalizationInstance {
    pub signal: EmbeddedSequence,
    pub query: EmbeddedSequence,
    pub truth: Vec<(usize, usize)>,
}

pub fn build_localization_instance(
    target: &TrajectoryClass,
    n: usize,
    m: usize,
    config: &SynthConfig,
) -> LocalizationInstance {
    assert!(n >= 1 && n < m);
    let mut rng = stream(config, target, 4);

    // Which of the m slots hold target clips.
    let mut slots: Vec<usize> = (0..m).collect();
    for k in 0..n {
        let swap = rng.gen_range(k..m);
        slots.swap(k, swap);
    }
    let mut target_slots = slots[..n].to_vec();
    target_slots.sort_unstable();

    // Distractor classes, distinct and different from the target.
    let mut others: Vec<u32> = (0..NUM_CLASSES).filter(|c| *c != target.index()).collect();
    for k in 0..(m - n) {
        let swap = rng.gen_range(k..others.len());
        others.swap(k, swap);
    }

    let mut clips = Vec::with_capacity(m);
    let mut truth = Vec::new();
    let mut cursor = 0usize;
    let mut distractor_idx = 0usize;
    for slot in 0..m {
        let clip = if target_slots.contains(&slot) {
            generate_part(target, &config.with_seed(mix_seed(config.seed, 100 + slot as u64)))
        } else {
            let class = TrajectoryClass::from_index(others[distractor_idx]);
            distractor_idx += 1;
            generate_part(&class, &config.with_seed(mix_seed(config.seed, 200 + slot as u64)))
        };
        if target_slots.contains(&slot) {
            truth.push((cursor, cursor + clip.len() - 1));
        }
        cursor += clip.len();
        clips.push(clip);
    }
    let signal = EmbeddedSequence::concat(&clips.iter().collect::<Vec<_>>()).unwrap();

    let queries: Vec<EmbeddedSequence> = (0..n)
        .map(|q| generate_full(target, &config.with_seed(mix_seed(config.seed, 300 + q as u64))))
        .collect();
    let query = EmbeddedSequence::concat(&queries.iter().collect::<Vec<_>>()).unwrap();

    LocalizationInstance { signal, query, truth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::symmetric_cost;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::default();
        let class = TrajectoryClass::new(3, TrajectoryShape::CircleCw);
        assert_eq!(generate_full(&class, &config), generate_full(&class, &config));
        assert_eq!(generate_part(&class, &config), generate_part(&class, &config));
        let other = generate_full(&class, &config.with_seed(1));
        assert_ne!(generate_full(&class, &config), other);
    }

    #[test]
    fn circle_parameters_zero_and_half_are_antipodal() {
        let (x0, y0) = TrajectoryShape::CircleCw.position(0.0);
        let (x1, y1) = TrajectoryShape::CircleCw.position(0.5);
        assert!((x0 + x1).abs() < 1e-12);
        assert!((y0 + y1).abs() < 1e-12);
    }

    #[test]
    fn all_80_classes_have_distinct_feature_blocks() {
        let config = SynthConfig::default();
        let seqs: Vec<EmbeddedSequence> =
            TrajectoryClass::all().iter().map(|c| generate_full(c, &config)).collect();
        assert_eq!(seqs.len(), 80);
        // One-hot blocks separate digits; shapes separate within a digit via
        // the position coordinates over the clip.
        for a in 0..seqs.len() {
            for b in (a + 1)..seqs.len() {
                let same = seqs[a].len() == seqs[b].len()
                    && (0..seqs[a].len()).all(|i| seqs[a].element(i) == seqs[b].element(i));
                assert!(!same, "classes {a} and {b} collide");
            }
        }
    }

    #[test]
    fn different_digits_are_cost_separated() {
        let config = SynthConfig::default();
        let a = generate_full(&TrajectoryClass::new(0, TrajectoryShape::CircleCw), &config);
        let b = generate_full(&TrajectoryClass::new(1, TrajectoryShape::CircleCw), &config);
        let c = symmetric_cost(&a, &b).unwrap();
        let mut min_cost = f64::INFINITY;
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                min_cost = min_cost.min(c.get(i, j));
            }
        }
        assert!(min_cost > 0.3, "cross-digit match cost floor was {min_cost}");
    }

    #[test]
    fn same_class_equal_parameter_costs_zero() {
        let class = TrajectoryClass::new(7, TrajectoryShape::LemniscateCw);
        let config = SynthConfig::default();
        let a = generate_full(&class, &config);
        let c = symmetric_cost(&a, &a).unwrap();
        for i in 0..a.len() {
            assert!(c.get(i, i).abs() < 1e-12);
        }
    }

    #[test]
    fn contaminate_rate_zero_is_identity_and_rate_one_replaces_all() {
        let class = TrajectoryClass::new(5, TrajectoryShape::DiagonalUp);
        let config = SynthConfig::default();
        let clean = generate_full(&class, &config);
        assert_eq!(contaminate(&clean, 0.0, 9), clean);
        let all = contaminate(&clean, 1.0, 9);
        for i in 0..clean.len() {
            assert_ne!(all.element(i), clean.element(i), "element {i} untouched");
        }
        // Same seed reproduces the same outlier set.
        assert_eq!(contaminate(&clean, 0.5, 42), contaminate(&clean, 0.5, 42));
        let half = contaminate(&clean, 0.5, 42);
        let changed = (0..clean.len()).filter(|&i| half.element(i) != clean.element(i)).count();
        assert_eq!(changed, clean.len() / 2);
    }

    #[test]
    fn localization_instance_structure() {
        let config = SynthConfig::default();
        let target = TrajectoryClass::new(3, TrajectoryShape::CircleCw);
        let inst = build_localization_instance(&target, 2, 6, &config);
        assert_eq!(inst.truth.len(), 2);
        // Intervals are disjoint, ordered, and inside the signal.
        assert!(inst.truth[0].1 < inst.truth[1].0);
        assert!(inst.truth[1].1 < inst.signal.len());
        // Truth intervals carry the target label; the query is all-target.
        let labels = inst.signal.labels().unwrap();
        for &(s, e) in &inst.truth {
            for i in s..=e {
                assert_eq!(labels[i], target.index());
            }
        }
        let outside: usize =
            labels.iter().filter(|&&l| l == target.index()).count();
        assert_eq!(outside, inst.truth.iter().map(|(s, e)| e - s + 1).sum::<usize>());
        assert!(inst.query.labels().unwrap().iter().all(|&l| l == target.index()));
    }

    #[test]
    fn one_distractor_when_n_is_m_minus_one() {
        let config = SynthConfig::default();
        let target = TrajectoryClass::new(1, TrajectoryShape::DiagonalDown);
        let inst = build_localization_instance(&target, 4, 5, &config);
        assert_eq!(inst.truth.len(), 4);
        let labels = inst.signal.labels().unwrap();
        let non_target = labels.iter().filter(|&&l| l != target.index()).count();
        assert!(non_target >= config.t_min && non_target <= config.t_max);
    }
}
