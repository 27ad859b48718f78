//! Time-binned densities and utterance-emotion-dynamics metrics.
//!
//! Aggregation is a commutative, associative reduction over per-post
//! integer counts, so sharded computation merges to exactly the same
//! densities as a single pass. The metric functions (home bases,
//! variability, trajectories) are pure functions over materialized vectors.
//!
//! Home bases follow the standard confidence-region formulation: a t-based
//! band in one dimension and a chi-square-scaled covariance ellipse in two.
//! Emotional variability is the population standard deviation (a
//! variance-valued variant is kept behind [`EvFormula`] for literal
//! reproduction of the alternative printed form).

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::lexicon::{
    EmotionCategory, EmotionLexicon, PostScore, WarmthDimension, WarmthLexicon, score_text,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("degenerate covariance (lambda2 = {lambda2:.3e}); use a one-dimensional home base")]
    DegenerateCovariance { lambda2: f64 },
    #[error("era `{era}` has only {got} bins for category `{category}`; need at least 2")]
    EraTooSmall {
        era: String,
        category: String,
        got: usize,
    },
}

/// Per-month emotion-word density for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDensity {
    pub bin: String,
    pub category: String,
    pub emotion_word_count: u64,
    pub token_total: u64,
    pub density: f64,
}

const EMO_N: usize = 10;
const WARM_N: usize = 4;

const WARM_DIMS: [WarmthDimension; WARM_N] = [
    WarmthDimension::Warmth,
    WarmthDimension::Sociability,
    WarmthDimension::Trust,
    WarmthDimension::Competence,
];

/// Integer count accumulator for one calendar month.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinCounts {
    pub token_total: u64,
    pub emotion: [u64; EMO_N],
    pub warmth_sums: [f64; WARM_N],
    pub warmth_hits: u64,
    pub per_post_mean_sums: [f64; WARM_N],
    pub posts_with_hits: u64,
    pub post_count: u64,
}

impl BinCounts {
    fn merge(&mut self, other: &BinCounts) {
        self.token_total += other.token_total;
        for i in 0..EMO_N {
            self.emotion[i] += other.emotion[i];
        }
        for i in 0..WARM_N {
            self.warmth_sums[i] += other.warmth_sums[i];
            self.per_post_mean_sums[i] += other.per_post_mean_sums[i];
        }
        self.warmth_hits += other.warmth_hits;
        self.posts_with_hits += other.posts_with_hits;
        self.post_count += other.post_count;
    }
}

/// Monthly aggregation of post scores. Integer counts make the shard
/// merge exact; merge order is fixed by the caller so the float warmth
/// sums are reproducible too.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityAccumulator {
    bins: BTreeMap<String, BinCounts>,
}

impl DensityAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, month: &str, score: &PostScore) {
        let bin = self.bins.entry(month.to_string()).or_default();
        bin.token_total += u64::from(score.token_count);
        for (i, cat) in EmotionCategory::ALL.iter().enumerate() {
            bin.emotion[i] += u64::from(score.emotion_count(*cat));
        }
        let sums = [
            score.warmth_sum,
            score.sociability_sum,
            score.trust_sum,
            score.competence_sum,
        ];
        for i in 0..WARM_N {
            bin.warmth_sums[i] += sums[i];
        }
        bin.warmth_hits += u64::from(score.warmth_hits);
        if score.warmth_hits > 0 {
            for i in 0..WARM_N {
                bin.per_post_mean_sums[i] += sums[i] / f64::from(score.warmth_hits);
            }
            bin.posts_with_hits += 1;
        }
        bin.post_count += 1;
    }

    pub fn merge(&mut self, other: &DensityAccumulator) {
        for (month, counts) in &other.bins {
            self.bins.entry(month.clone()).or_default().merge(counts);
        }
    }

    pub fn months(&self) -> impl Iterator<Item = &str> {
        self.bins.keys().map(|s| s.as_str())
    }

    pub fn bin(&self, month: &str) -> Option<&BinCounts> {
        self.bins.get(month)
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Densities for one category, chronological order, empty bins omitted.
    pub fn densities(&self, category: EmotionCategory) -> Vec<BinDensity> {
        let idx = EmotionCategory::ALL
            .iter()
            .position(|c| *c == category)
            .expect("category in ALL");
        self.bins
            .iter()
            .filter(|(_, counts)| counts.token_total > 0)
            .map(|(month, counts)| BinDensity {
                bin: month.clone(),
                category: category.as_str().to_string(),
                emotion_word_count: counts.emotion[idx],
                token_total: counts.token_total,
                density: counts.emotion[idx] as f64 / counts.token_total as f64,
            })
            .collect()
    }

    /// All categories, chronological within category.
    pub fn all_densities(&self) -> Vec<BinDensity> {
        EmotionCategory::ALL
            .iter()
            .flat_map(|c| self.densities(*c))
            .collect()
    }

    /// Monthly warmth-dimension series: token-weighted mean of lexicon
    /// scores (default) or the mean of per-post means.
    pub fn warmth_series(&self, dim: WarmthDimension, mode: WarmthSeriesMode) -> Vec<MonthlyWarmth> {
        let idx = WARM_DIMS
            .iter()
            .position(|d| *d == dim)
            .expect("warmth series dimension");
        self.bins
            .iter()
            .filter_map(|(month, counts)| {
                let (mean, n) = match mode {
                    WarmthSeriesMode::TokenWeighted => {
                        if counts.warmth_hits == 0 {
                            return None;
                        }
                        (
                            counts.warmth_sums[idx] / counts.warmth_hits as f64,
                            counts.warmth_hits,
                        )
                    }
                    WarmthSeriesMode::PerPostMean => {
                        if counts.posts_with_hits == 0 {
                            return None;
                        }
                        (
                            counts.per_post_mean_sums[idx] / counts.posts_with_hits as f64,
                            counts.posts_with_hits,
                        )
                    }
                };
                Some(MonthlyWarmth {
                    bin: month.clone(),
                    dimension: dim.as_str().to_string(),
                    mean,
                    n,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmthSeriesMode {
    #[default]
    TokenWeighted,
    PerPostMean,
}

/// One point of a monthly warmth-dimension series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyWarmth {
    pub bin: String,
    pub dimension: String,
    pub mean: f64,
    pub n: u64,
}

/// Per-bin density for one category over (month, score) pairs.
pub fn bin_density<'a>(
    scores: impl IntoIterator<Item = (&'a str, &'a PostScore)>,
    category: EmotionCategory,
) -> Vec<BinDensity> {
    let mut acc = DensityAccumulator::new();
    for (month, score) in scores {
        acc.add(month, score);
    }
    acc.densities(category)
}

/// Unweighted mean over posts of per-post density
/// (emotion_word_count / token_count). Zero-token posts are skipped and
/// counted.
pub fn per_post_density<'a>(
    scores: impl IntoIterator<Item = &'a PostScore>,
    category: EmotionCategory,
) -> (f64, u64) {
    let mut sum = 0.0;
    let mut n = 0u64;
    let mut skipped = 0u64;
    for score in scores {
        if score.token_count == 0 {
            skipped += 1;
            continue;
        }
        sum += f64::from(score.emotion_count(category)) / f64::from(score.token_count);
        n += 1;
    }
    let mean = if n == 0 { 0.0 } else { sum / n as f64 };
    (mean, skipped)
}

/// Trailing rolling mean; positions with fewer than `window` predecessors
/// average over the available prefix. Output length equals input length.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>, DynamicsError> {
    if window < 1 {
        return Err(DynamicsError::Param("rolling window must be >= 1".into()));
    }
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let start = i.saturating_sub(window - 1);
            let slice = &series[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Centered rolling mean with shrinking edges; available by flag since
/// either convention is defensible for figure reproduction.
pub fn rolling_mean_centered(series: &[f64], window: usize) -> Result<Vec<f64>, DynamicsError> {
    if window < 1 {
        return Err(DynamicsError::Param("rolling window must be >= 1".into()));
    }
    let half = (window - 1) / 2;
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let start = i.saturating_sub(half);
            let end = (i + window - half).min(series.len());
            let slice = &series[start..end];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// One-dimensional home base: a two-sided t confidence band around the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeBase1D {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub n: usize,
    pub variance: f64,
    pub t_crit: f64,
}

/// Band = mean +/- t_{1-alpha/2, N-1} * sqrt(s^2 / N) with sample variance
/// (divisor N-1). Constant input gives a zero-width band.
pub fn home_base_1d(values: &[f64], alpha: f64) -> Result<HomeBase1D, DynamicsError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(DynamicsError::Param(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let n = values.len();
    if n < 2 {
        return Err(DynamicsError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0).expect("valid t distribution");
    let t_crit = t.inverse_cdf(1.0 - alpha / 2.0);
    let half_width = t_crit * (variance / nf).sqrt();
    Ok(HomeBase1D {
        mean,
        lower: mean - half_width,
        upper: mean + half_width,
        alpha,
        n,
        variance,
        t_crit,
    })
}

/// Two-dimensional home base: the chi-square-scaled covariance ellipse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeBase2D {
    pub mean_w: f64,
    pub mean_c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Orientation of the lambda1 eigenvector, radians.
    pub angle: f64,
    /// Chi-square critical value at confidence 1 - alpha, 2 df.
    pub psi: f64,
    pub alpha: f64,
    pub n: usize,
}

impl HomeBase2D {
    /// Ellipse membership value: <= 1 means inside or on the boundary.
    pub fn membership(&self, w: f64, c: f64) -> f64 {
        let dx = w - self.mean_w;
        let dy = c - self.mean_c;
        let (sin, cos) = self.angle.sin_cos();
        let u1 = cos * dx + sin * dy;
        let u2 = -sin * dx + cos * dy;
        u1 * u1 / (self.psi * self.lambda1) + u2 * u2 / (self.psi * self.lambda2)
    }

    pub fn contains(&self, w: f64, c: f64) -> bool {
        self.membership(w, c) <= 1.0
    }

    /// Point on the ellipse boundary at parameter `t` in [0, 2 pi).
    pub fn boundary_point(&self, t: f64) -> (f64, f64) {
        let a = (self.psi * self.lambda1).sqrt();
        let b = (self.psi * self.lambda2).sqrt();
        let (sin, cos) = self.angle.sin_cos();
        let u1 = a * t.cos();
        let u2 = b * t.sin();
        (
            self.mean_w + cos * u1 - sin * u2,
            self.mean_c + sin * u1 + cos * u2,
        )
    }

    /// Semi-axes of the ellipse (major, minor).
    pub fn semi_axes(&self) -> (f64, f64) {
        (
            (self.psi * self.lambda1).sqrt(),
            (self.psi * self.lambda2).sqrt(),
        )
    }
}

/// Fit the confidence ellipse to (w, c) points: sample covariance,
/// closed-form 2x2 eigendecomposition, chi-square quantile at confidence
/// 1 - alpha with 2 degrees of freedom.
pub fn home_base_2d(points: &[(f64, f64)], alpha: f64) -> Result<HomeBase2D, DynamicsError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(DynamicsError::Param(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let n = points.len();
    if n < 3 {
        return Err(DynamicsError::TooFewPoints { need: 3, got: n });
    }
    let nf = n as f64;
    let mean_w = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_c = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sww = 0.0;
    let mut scc = 0.0;
    let mut swc = 0.0;
    for &(w, c) in points {
        let dw = w - mean_w;
        let dc = c - mean_c;
        sww += dw * dw;
        scc += dc * dc;
        swc += dw * dc;
    }
    let denom = nf - 1.0;
    let (a, b, c) = (sww / denom, swc / denom, scc / denom);
    // Eigenvalues of [[a, b], [b, c]].
    let half_trace = (a + c) / 2.0;
    let disc = ((a - c) / 2.0).powi(2) + b * b;
    let root = disc.sqrt();
    let lambda1 = half_trace + root;
    let lambda2 = half_trace - root;
    if lambda2 <= 1e-12 * lambda1.max(f64::MIN_POSITIVE) {
        return Err(DynamicsError::DegenerateCovariance { lambda2 });
    }
    let angle = if b.abs() < f64::EPSILON && (a - c).abs() < f64::EPSILON {
        0.0
    } else {
        0.5 * (2.0 * b).atan2(a - c)
    };
    // chi-square(2) quantile at 1 - alpha; the df = 2 CDF is
    // 1 - exp(-x/2), so the inverse is closed-form
    let psi = -2.0 * alpha.ln();
    Ok(HomeBase2D {
        mean_w,
        mean_c,
        lambda1,
        lambda2,
        angle,
        psi,
        alpha,
        n,
    })
}

/// Which dispersion formula the variability metric uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvFormula {
    /// Population standard deviation (default).
    #[default]
    Sd,
    /// Population variance, i.e. the dispersion without the radical.
    PrintedVariance,
}

/// Emotional variability: population SD, divisor N.
pub fn emotional_variability(values: &[f64]) -> f64 {
    ev_with_formula(values, EvFormula::Sd)
}

pub fn ev_with_formula(values: &[f64], formula: EvFormula) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    match formula {
        EvFormula::Sd => var.sqrt(),
        EvFormula::PrintedVariance => var,
    }
}

/// Two-dimensional variability: mean of the per-dimension SDs.
pub fn ev_2d(points: &[(f64, f64)]) -> f64 {
    let w: Vec<f64> = points.iter().map(|p| p.0).collect();
    let c: Vec<f64> = points.iter().map(|p| p.1).collect();
    (emotional_variability(&w) + emotional_variability(&c)) / 2.0
}

/// One step of a windowed emotional arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub index: usize,
    pub mean_w: f64,
    pub mean_c: f64,
}

/// Sliding-window means over word-level (warmth, competence) scores,
/// step 1. A window longer than the series collapses to a single point
/// over the whole series (with a warning).
pub fn trajectory(
    scores: &[(f64, f64)],
    window: usize,
) -> Result<Vec<TrajectoryPoint>, DynamicsError> {
    if window < 1 {
        return Err(DynamicsError::Param("trajectory window must be >= 1".into()));
    }
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let window = if window > scores.len() {
        log::warn!(
            "trajectory window {window} exceeds series length {}; using one global point",
            scores.len()
        );
        scores.len()
    } else {
        window
    };
    let wf = window as f64;
    Ok(scores
        .windows(window)
        .enumerate()
        .map(|(index, win)| TrajectoryPoint {
            index,
            mean_w: win.iter().map(|p| p.0).sum::<f64>() / wf,
            mean_c: win.iter().map(|p| p.1).sum::<f64>() / wf,
        })
        .collect())
}

/// Descriptive summary of one era's monthly densities for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub densities: Vec<f64>,
}

/// Pre/post era comparison for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraComparison {
    pub category: String,
    pub pre: EraSummary,
    pub post: EraSummary,
}

fn summarize(densities: Vec<f64>) -> EraSummary {
    let n = densities.len();
    let nf = n as f64;
    let mean = densities.iter().sum::<f64>() / nf;
    let sd = (densities.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    EraSummary {
        mean,
        sd,
        n,
        densities,
    }
}

/// Split monthly bins at `split` (bins whose month starts before the date
/// are "pre") and summarize each side. Bins must already be for a single
/// category list; output is grouped per category.
pub fn era_compare(
    bins: &[BinDensity],
    split: NaiveDate,
) -> Result<Vec<EraComparison>, DynamicsError> {
    let mut by_category: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for bin in bins {
        let month_start = NaiveDate::parse_from_str(&format!("{}-01", bin.bin), "%Y-%m-%d")
            .map_err(|_| DynamicsError::Param(format!("bad month bin `{}`", bin.bin)))?;
        let entry = by_category.entry(&bin.category).or_default();
        if month_start < split {
            entry.0.push(bin.density);
        } else {
            entry.1.push(bin.density);
        }
    }
    let mut out = Vec::new();
    for (category, (pre, post)) in by_category {
        for (era, values) in [("pre", &pre), ("post", &post)] {
            if values.len() < 2 {
                return Err(DynamicsError::EraTooSmall {
                    era: era.to_string(),
                    category: category.to_string(),
                    got: values.len(),
                });
            }
        }
        out.push(EraComparison {
            category: category.to_string(),
            pre: summarize(pre),
            post: summarize(post),
        });
    }
    Ok(out)
}

/// Streaming scoring + monthly aggregation. Posts are consumed in fixed
/// batches; each batch is scored in deterministic chunks and merged in
/// order, so the result does not depend on the worker count.
pub fn aggregate_stream(
    posts: impl Iterator<Item = (String, String)>,
    elex: &EmotionLexicon,
    wlex: &WarmthLexicon,
) -> DensityAccumulator {
    const BATCH: usize = 8192;
    let mut acc = DensityAccumulator::new();
    let mut batch: Vec<(String, String)> = Vec::with_capacity(BATCH);
    for item in posts {
        batch.push(item);
        if batch.len() == BATCH {
            aggregate_batch(&batch, elex, wlex, &mut acc);
            batch.clear();
        }
    }
    if !batch.is_empty() {
        aggregate_batch(&batch, elex, wlex, &mut acc);
    }
    acc
}

/// Sequential reference path; also the fallback when the `parallel`
/// feature is disabled.
pub fn aggregate_stream_seq(
    posts: impl Iterator<Item = (String, String)>,
    elex: &EmotionLexicon,
    wlex: &WarmthLexicon,
) -> DensityAccumulator {
    let mut acc = DensityAccumulator::new();
    for (month, text) in posts {
        let score = score_text("", &text, elex, wlex);
        acc.add(&month, &score);
    }
    acc
}

#[cfg(feature = "parallel")]
fn aggregate_batch(
    batch: &[(String, String)],
    elex: &EmotionLexicon,
    wlex: &WarmthLexicon,
    acc: &mut DensityAccumulator,
) {
    use rayon::prelude::*;
    const CHUNK: usize = 512;
    let partials: Vec<DensityAccumulator> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut partial = DensityAccumulator::new();
            for (month, text) in chunk {
                let score = score_text("", text, elex, wlex);
                partial.add(month, &score);
            }
            partial
        })
        .collect();
    for partial in &partials {
        acc.merge(partial);
    }
}

#[cfg(not(feature = "parallel"))]
fn aggregate_batch(
    batch: &[(String, String)],
    elex: &EmotionLexicon,
    wlex: &WarmthLexicon,
    acc: &mut DensityAccumulator,
) {
    for (month, text) in batch {
        let score = score_text("", text, elex, wlex);
        acc.add(month, &score);
    }
}
