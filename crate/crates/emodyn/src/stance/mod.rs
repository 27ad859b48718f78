//! Stance classification harness: monthly sampling, endpoint-backed
//! labeling, and evaluation against gold labels.

pub mod endpoint;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::PostRecord;
use crate::error::ErrorClass;

pub use endpoint::{ChatEndpoint, ClassifyOptions, HttpChatEndpoint, MockChatEndpoint, classify};

#[derive(Debug, Error)]
pub enum StanceError {
    #[error("empty corpus: nothing to sample")]
    EmptyCorpus,
    #[error("per-month sample size must be >= 1")]
    BadSampleSize,
    #[error("prompt template is missing the `{{text}}` slot")]
    TemplateMissingSlot,
    #[error("chat endpoint persistently unavailable: {reason}; resume checkpoint at {checkpoint}")]
    EndpointExhausted { reason: String, checkpoint: String },
    #[error("prediction/gold id mismatch; missing from predictions: {missing_pred:?}, missing from gold: {missing_gold:?}")]
    IdMismatch {
        missing_pred: Vec<String>,
        missing_gold: Vec<String>,
    },
    #[error("checkpoint i/o error at {path}: {source}")]
    Checkpoint {
        path: String,
        source: std::io::Error,
    },
    #[error("no predictions to evaluate")]
    EmptyEvaluation,
    #[error("bad gold-label file {path}: {reason}")]
    GoldLabels { path: String, reason: String },
}

impl StanceError {
    pub fn class(&self) -> ErrorClass {
        match self {
            StanceError::EndpointExhausted { .. } => ErrorClass::Provider,
            StanceError::Checkpoint { .. } => ErrorClass::Internal,
            _ => ErrorClass::Data,
        }
    }
}

/// Three-way stance toward the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Favor,
    Against,
    Neutral,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Favor, StanceLabel::Against, StanceLabel::Neutral];

    pub fn as_str(&self) -> &'static str {
        match self {
            StanceLabel::Favor => "favor",
            StanceLabel::Against => "against",
            StanceLabel::Neutral => "neutral",
        }
    }

    /// Normalize a model response to a label. Case, whitespace, punctuation
    /// and the long "neither ..." phrasing are tolerated; anything else is
    /// unmappable (None) and must be recorded as a parse failure.
    pub fn normalize(raw: &str) -> Option<StanceLabel> {
        let cleaned: String = raw
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || c.is_ascii_whitespace() || *c == '-')
            .collect::<String>()
            .to_ascii_lowercase();
        let cleaned = cleaned.split_ascii_whitespace().collect::<Vec<_>>().join(" ");
        match cleaned.as_str() {
            "favor" | "in favor" | "in-favor" | "favour" | "in favour" => Some(StanceLabel::Favor),
            "against" => Some(StanceLabel::Against),
            "neutral" | "neither" => Some(StanceLabel::Neutral),
            s if s.starts_with("neither of the two inferences") => Some(StanceLabel::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StanceLabel::normalize(s).ok_or_else(|| format!("unmappable stance label: {s}"))
    }
}

/// One classified post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceRecord {
    pub post_id: String,
    pub label: StanceLabel,
    pub model_id: String,
    pub temperature: f64,
    pub prompt_hash: String,
    pub run_id: String,
}

/// A response the normalization table could not map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub post_id: String,
    pub raw_response: String,
}

/// SHA-256 of the rendered prompt template (with the target substituted,
/// before the per-post text goes in). Stored per record for provenance.
pub fn prompt_hash(template: &str, target: &str) -> String {
    let rendered = template.replace("{target}", target);
    let digest = Sha256::digest(rendered.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Uniform per-calendar-month sample without replacement, seeded and
/// reproducible. Months with fewer posts than requested return all of them
/// with a warning.
pub fn sample_monthly(
    corpus: &[PostRecord],
    per_month: usize,
    seed: u64,
) -> Result<Vec<PostRecord>, StanceError> {
    if per_month < 1 {
        return Err(StanceError::BadSampleSize);
    }
    if corpus.is_empty() {
        return Err(StanceError::EmptyCorpus);
    }
    let mut by_month: BTreeMap<String, Vec<&PostRecord>> = BTreeMap::new();
    for post in corpus {
        by_month.entry(post.month()).or_default().push(post);
    }
    let mut out = Vec::new();
    for (month, mut posts) in by_month {
        posts.sort_by(|a, b| a.id.cmp(&b.id));
        if posts.len() <= per_month {
            if posts.len() < per_month {
                log::warn!(
                    "month {month}: only {} posts available for a sample of {per_month}",
                    posts.len()
                );
            }
            out.extend(posts.into_iter().cloned());
            continue;
        }
        // month-specific stream so adding a month never reshuffles others
        let month_seed = seed ^ u64::from_le_bytes(
            Sha256::digest(month.as_bytes())[..8].try_into().unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(month_seed);
        let mut sampled: Vec<&PostRecord> = posts
            .choose_multiple(&mut rng, per_month)
            .copied()
            .collect();
        sampled.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(sampled.into_iter().cloned());
    }
    Ok(out)
}

/// Per-class precision/recall/F1 plus the global rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: BTreeMap<StanceLabel, ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    pub total: usize,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Build a per-class precision/recall/F1 report from aligned prediction and gold label
/// maps (post_id -> label). The id sets must match exactly.
pub fn evaluate(
    predictions: &HashMap<String, StanceLabel>,
    gold: &HashMap<String, StanceLabel>,
) -> Result<ClassificationReport, StanceError> {
    let mut missing_pred: Vec<String> = gold
        .keys()
        .filter(|k| !predictions.contains_key(*k))
        .cloned()
        .collect();
    let mut missing_gold: Vec<String> = predictions
        .keys()
        .filter(|k| !gold.contains_key(*k))
        .cloned()
        .collect();
    if !missing_pred.is_empty() || !missing_gold.is_empty() {
        missing_pred.sort();
        missing_gold.sort();
        return Err(StanceError::IdMismatch {
            missing_pred,
            missing_gold,
        });
    }
    let total = gold.len();
    if total == 0 {
        return Err(StanceError::EmptyEvaluation);
    }

    let mut tp: BTreeMap<StanceLabel, usize> = BTreeMap::new();
    let mut pred_count: BTreeMap<StanceLabel, usize> = BTreeMap::new();
    let mut gold_count: BTreeMap<StanceLabel, usize> = BTreeMap::new();
    let mut correct = 0usize;
    for (id, gold_label) in gold {
        let pred_label = predictions[id];
        *pred_count.entry(pred_label).or_insert(0) += 1;
        *gold_count.entry(*gold_label).or_insert(0) += 1;
        if pred_label == *gold_label {
            *tp.entry(*gold_label).or_insert(0) += 1;
            correct += 1;
        }
    }

    let mut per_class = BTreeMap::new();
    for label in StanceLabel::ALL {
        let tp = *tp.get(&label).unwrap_or(&0) as f64;
        let predicted = *pred_count.get(&label).unwrap_or(&0) as f64;
        let support = *gold_count.get(&label).unwrap_or(&0);
        let precision = if predicted == 0.0 { 0.0 } else { tp / predicted };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        per_class.insert(
            label,
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
            },
        );
    }

    let k = StanceLabel::ALL.len() as f64;
    let macro_avg = ClassMetrics {
        precision: per_class.values().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.values().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.values().map(|m| m.f1).sum::<f64>() / k,
        support: total,
    };
    let tf = total as f64;
    let weighted_avg = ClassMetrics {
        precision: per_class
            .values()
            .map(|m| m.precision * m.support as f64)
            .sum::<f64>()
            / tf,
        recall: per_class
            .values()
            .map(|m| m.recall * m.support as f64)
            .sum::<f64>()
            / tf,
        f1: per_class.values().map(|m| m.f1 * m.support as f64).sum::<f64>() / tf,
        support: total,
    };
    let report = ClassificationReport {
        per_class,
        accuracy: correct as f64 / tf,
        macro_avg,
        weighted_avg,
        total,
    };
    debug_assert!(
        (report.weighted_avg.recall - report.accuracy).abs() < 1e-12,
        "weighted recall must equal accuracy for single-label classification"
    );
    Ok(report)
}

/// Mean and SD of one report cell across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: f64,
    pub sd: f64,
}

fn cell(values: &[f64]) -> CellStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    CellStat { mean, sd }
}

/// Multi-run aggregation: mean +/- SD per cell, matching the "k
/// independent runs" presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub per_class: BTreeMap<StanceLabel, BTreeMap<String, CellStat>>,
    pub accuracy: CellStat,
    pub macro_f1: CellStat,
    pub weighted_f1: CellStat,
}

pub fn aggregate_reports(reports: &[ClassificationReport]) -> Option<AggregateReport> {
    if reports.is_empty() {
        return None;
    }
    let mut per_class = BTreeMap::new();
    for label in StanceLabel::ALL {
        let mut cells = BTreeMap::new();
        let metric = |f: fn(&ClassMetrics) -> f64| -> Vec<f64> {
            reports.iter().map(|r| f(&r.per_class[&label])).collect()
        };
        cells.insert("precision".to_string(), cell(&metric(|m| m.precision)));
        cells.insert("recall".to_string(), cell(&metric(|m| m.recall)));
        cells.insert("f1".to_string(), cell(&metric(|m| m.f1)));
        per_class.insert(label, cells);
    }
    Some(AggregateReport {
        runs: reports.len(),
        per_class,
        accuracy: cell(&reports.iter().map(|r| r.accuracy).collect::<Vec<_>>()),
        macro_f1: cell(&reports.iter().map(|r| r.macro_avg.f1).collect::<Vec<_>>()),
        weighted_f1: cell(&reports.iter().map(|r| r.weighted_avg.f1).collect::<Vec<_>>()),
    })
}

/// Monthly stance proportions over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyStance {
    pub month: String,
    pub n_sampled: usize,
    pub favor_frac: f64,
    pub against_frac: f64,
    pub neutral_frac: f64,
}

pub fn monthly_proportions(
    records: &[StanceRecord],
    months: &HashMap<String, String>,
) -> Vec<MonthlyStance> {
    let mut by_month: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for record in records {
        let Some(month) = months.get(&record.post_id) else {
            continue;
        };
        let counts = by_month.entry(month.clone()).or_insert([0; 3]);
        match record.label {
            StanceLabel::Favor => counts[0] += 1,
            StanceLabel::Against => counts[1] += 1,
            StanceLabel::Neutral => counts[2] += 1,
        }
    }
    by_month
        .into_iter()
        .map(|(month, [favor, against, neutral])| {
            let n = favor + against + neutral;
            let nf = n as f64;
            MonthlyStance {
                month,
                n_sampled: n,
                favor_frac: favor as f64 / nf,
                against_frac: against as f64 / nf,
                neutral_frac: neutral as f64 / nf,
            }
        })
        .collect()
}
