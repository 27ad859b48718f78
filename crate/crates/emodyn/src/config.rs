//! Run configuration: plain-text `key = value` file, `#` comments,
//! environment-variable override for the endpoint secret. Every run writes
//! a frozen copy of its effective configuration next to its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::corpus::FilterOrder;
use crate::dynamics::{EvFormula, WarmthSeriesMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
}

/// Environment variable consulted for the chat endpoint key.
pub const API_KEY_ENV: &str = "EMODYN_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // paths
    pub input: Option<PathBuf>,
    pub corpus_dir: PathBuf,
    pub lexicon_dir: PathBuf,
    pub out_dir: PathBuf,
    pub emotion_lexicon: Option<PathBuf>,
    pub warmth_lexicon: Option<PathBuf>,
    pub exclusions: Vec<PathBuf>,
    pub gold_labels: Option<PathBuf>,

    // preprocessing
    pub filter_anchor: String,
    pub filter_threshold: f64,
    pub filter_order: FilterOrder,
    pub embedding_provider: String,
    pub embedding_batch_size: usize,
    pub embedding_retries: u32,

    // analysis
    pub rolling_window: usize,
    pub rolling_centered: bool,
    pub alpha: f64,
    pub era_split: NaiveDate,
    pub low_score_threshold: f64,
    pub ev_formula: EvFormula,
    pub warmth_series_mode: WarmthSeriesMode,
    pub trajectory_window: usize,

    // stance
    pub stance_endpoint: String,
    pub stance_model: String,
    pub stance_api_key: Option<String>,
    pub stance_target: String,
    pub stance_temperature: f64,
    pub stance_per_month: usize,
    pub stance_concurrency: usize,
    pub stance_retries: u32,
    pub prompt_template: Option<PathBuf>,

    // report
    pub treemap_k: usize,
    pub treemap_weight_by_posts: bool,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            corpus_dir: PathBuf::from("out/corpus"),
            lexicon_dir: PathBuf::from("lexicons"),
            out_dir: PathBuf::from("out"),
            emotion_lexicon: None,
            warmth_lexicon: None,
            exclusions: Vec::new(),
            gold_labels: None,
            filter_anchor: "The Vaccines music band".to_string(),
            filter_threshold: 0.7,
            filter_order: FilterOrder::AfterDedup,
            embedding_provider: "mock".to_string(),
            embedding_batch_size: 64,
            embedding_retries: 3,
            rolling_window: 3,
            rolling_centered: false,
            alpha: 0.32,
            era_split: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            low_score_threshold: 1.0 / 3.0,
            ev_formula: EvFormula::Sd,
            warmth_series_mode: WarmthSeriesMode::TokenWeighted,
            trajectory_window: 10,
            stance_endpoint: "mock".to_string(),
            stance_model: "mock-stance-v1".to_string(),
            stance_api_key: None,
            stance_target: "vaccines".to_string(),
            stance_temperature: 0.4,
            stance_per_month: 2000,
            stance_concurrency: 8,
            stance_retries: 3,
            prompt_template: None,
            treemap_k: 15,
            treemap_weight_by_posts: false,
            seed: 20130101,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        reason: format!("not a number: `{value}`"),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        reason: format!("not an integer: `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            reason: format!("not a boolean: `{value}`"),
        }),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = RunConfig::default();
        config.apply_str(&raw)?;
        config.apply_env();
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.stance_api_key = Some(key);
            }
        }
    }

    pub fn apply_str(&mut self, raw: &str) -> Result<(), ConfigError> {
        for (idx, line) in raw.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: lineno })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "corpus-dir" => self.corpus_dir = PathBuf::from(value),
            "lexicon-dir" => self.lexicon_dir = PathBuf::from(value),
            "out-dir" => self.out_dir = PathBuf::from(value),
            "emotion-lexicon" => self.emotion_lexicon = Some(PathBuf::from(value)),
            "warmth-lexicon" => self.warmth_lexicon = Some(PathBuf::from(value)),
            "exclusions" => {
                self.exclusions = value
                    .split(',')
                    .map(|p| PathBuf::from(p.trim()))
                    .collect();
            }
            "gold-labels" => self.gold_labels = Some(PathBuf::from(value)),
            "filter-anchor" => self.filter_anchor = value.to_string(),
            "filter-threshold" => self.filter_threshold = parse_f64(key, value)?,
            "filter-order" => {
                self.filter_order = match value {
                    "after-dedup" => FilterOrder::AfterDedup,
                    "before-dedup" => FilterOrder::BeforeDedup,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            reason: "expected `after-dedup` or `before-dedup`".into(),
                        })
                    }
                }
            }
            "embedding-provider" => self.embedding_provider = value.to_string(),
            "embedding-batch-size" => self.embedding_batch_size = parse_usize(key, value)?,
            "embedding-retries" => self.embedding_retries = parse_usize(key, value)? as u32,
            "rolling-window" => self.rolling_window = parse_usize(key, value)?,
            "rolling-centered" => self.rolling_centered = parse_bool(key, value)?,
            "alpha" => self.alpha = parse_f64(key, value)?,
            "era-split" => {
                self.era_split =
                    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|e| {
                        ConfigError::BadValue {
                            key: key.into(),
                            reason: e.to_string(),
                        }
                    })?;
            }
            "low-score-threshold" => self.low_score_threshold = parse_f64(key, value)?,
            "ev-formula" => {
                self.ev_formula = match value {
                    "sd" => EvFormula::Sd,
                    "printed-variance" => EvFormula::PrintedVariance,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            reason: "expected `sd` or `printed-variance`".into(),
                        })
                    }
                }
            }
            "warmth-series" => {
                self.warmth_series_mode = match value {
                    "token-weighted" => WarmthSeriesMode::TokenWeighted,
                    "per-post-mean" => WarmthSeriesMode::PerPostMean,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            reason: "expected `token-weighted` or `per-post-mean`".into(),
                        })
                    }
                }
            }
            "trajectory-window" => self.trajectory_window = parse_usize(key, value)?,
            "stance-endpoint" => self.stance_endpoint = value.to_string(),
            "stance-model" => self.stance_model = value.to_string(),
            "stance-api-key" => self.stance_api_key = Some(value.to_string()),
            "stance-target" => self.stance_target = value.to_string(),
            "stance-temperature" => self.stance_temperature = parse_f64(key, value)?,
            "stance-per-month" => self.stance_per_month = parse_usize(key, value)?,
            "stance-concurrency" => self.stance_concurrency = parse_usize(key, value)?,
            "stance-retries" => self.stance_retries = parse_usize(key, value)? as u32,
            "prompt-template" => self.prompt_template = Some(PathBuf::from(value)),
            "treemap-k" => self.treemap_k = parse_usize(key, value)?,
            "treemap-weight-by-posts" => self.treemap_weight_by_posts = parse_bool(key, value)?,
            "seed" => {
                self.seed = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("not an integer: `{value}`"),
                })?
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check_unit = |key: &'static str, v: f64, lo: f64, hi: f64| {
            if v > lo && v <= hi {
                Ok(())
            } else {
                Err(ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("must be in ({lo}, {hi}], got {v}"),
                })
            }
        };
        check_unit("filter-threshold", self.filter_threshold, 0.0, 1.0)?;
        check_unit("low-score-threshold", self.low_score_threshold, 0.0, 1.0)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::BadValue {
                key: "alpha".into(),
                reason: format!("must be in (0, 1), got {}", self.alpha),
            });
        }
        if !(0.0..=2.0).contains(&self.stance_temperature) {
            return Err(ConfigError::BadValue {
                key: "stance-temperature".into(),
                reason: format!("must be in [0, 2], got {}", self.stance_temperature),
            });
        }
        if self.rolling_window < 1 {
            return Err(ConfigError::BadValue {
                key: "rolling-window".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.stance_per_month < 1 {
            return Err(ConfigError::BadValue {
                key: "stance-per-month".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// Deterministic key = value dump of the effective settings. Secrets
    /// are redacted.
    pub fn to_frozen_string(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        if let Some(p) = &self.input {
            kv.insert("input", p.display().to_string());
        }
        kv.insert("corpus-dir", self.corpus_dir.display().to_string());
        kv.insert("lexicon-dir", self.lexicon_dir.display().to_string());
        kv.insert("out-dir", self.out_dir.display().to_string());
        if let Some(p) = &self.emotion_lexicon {
            kv.insert("emotion-lexicon", p.display().to_string());
        }
        if let Some(p) = &self.warmth_lexicon {
            kv.insert("warmth-lexicon", p.display().to_string());
        }
        if !self.exclusions.is_empty() {
            kv.insert(
                "exclusions",
                self.exclusions
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        if let Some(p) = &self.gold_labels {
            kv.insert("gold-labels", p.display().to_string());
        }
        kv.insert("filter-anchor", self.filter_anchor.clone());
        kv.insert("filter-threshold", format!("{}", self.filter_threshold));
        kv.insert(
            "filter-order",
            match self.filter_order {
                FilterOrder::AfterDedup => "after-dedup".into(),
                FilterOrder::BeforeDedup => "before-dedup".into(),
            },
        );
        kv.insert("embedding-provider", self.embedding_provider.clone());
        kv.insert("embedding-batch-size", self.embedding_batch_size.to_string());
        kv.insert("embedding-retries", self.embedding_retries.to_string());
        kv.insert("rolling-window", self.rolling_window.to_string());
        kv.insert("rolling-centered", self.rolling_centered.to_string());
        kv.insert("alpha", format!("{}", self.alpha));
        kv.insert("era-split", self.era_split.format("%Y-%m-%d").to_string());
        kv.insert("low-score-threshold", format!("{}", self.low_score_threshold));
        kv.insert(
            "ev-formula",
            match self.ev_formula {
                EvFormula::Sd => "sd".into(),
                EvFormula::PrintedVariance => "printed-variance".into(),
            },
        );
        kv.insert(
            "warmth-series",
            match self.warmth_series_mode {
                WarmthSeriesMode::TokenWeighted => "token-weighted".into(),
                WarmthSeriesMode::PerPostMean => "per-post-mean".into(),
            },
        );
        kv.insert("trajectory-window", self.trajectory_window.to_string());
        kv.insert("stance-endpoint", self.stance_endpoint.clone());
        kv.insert("stance-model", self.stance_model.clone());
        if self.stance_api_key.is_some() {
            kv.insert("stance-api-key", "<redacted>".into());
        }
        kv.insert("stance-target", self.stance_target.clone());
        kv.insert("stance-temperature", format!("{}", self.stance_temperature));
        kv.insert("stance-per-month", self.stance_per_month.to_string());
        kv.insert("stance-concurrency", self.stance_concurrency.to_string());
        kv.insert("stance-retries", self.stance_retries.to_string());
        if let Some(p) = &self.prompt_template {
            kv.insert("prompt-template", p.display().to_string());
        }
        kv.insert("treemap-k", self.treemap_k.to_string());
        kv.insert("treemap-weight-by-posts", self.treemap_weight_by_posts.to_string());
        kv.insert("seed", self.seed.to_string());
        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_and_comments() {
        let mut c = RunConfig::default();
        c.apply_str(
            "# comment\nalpha = 0.05\nrolling-window = 6 # trailing\nfilter-anchor = Some Band\n",
        )
        .unwrap();
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.rolling_window, 6);
        assert_eq!(c.filter_anchor, "Some Band");
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        assert!(matches!(
            c.apply_str("bogus-key = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn bad_syntax_names_line() {
        let mut c = RunConfig::default();
        match c.apply_str("alpha = 0.1\nnot a kv line\n") {
            Err(ConfigError::Syntax { line }) => assert_eq!(line, 2),
            other => panic!("expected Syntax, got {other:?}"),
        }
    }

    #[test]
    fn validation_bounds() {
        let mut c = RunConfig::default();
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        c.alpha = 0.32;
        c.stance_temperature = 3.0;
        assert!(c.validate().is_err());
        c.stance_temperature = 0.4;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn frozen_dump_is_deterministic_and_redacts() {
        let mut c = RunConfig::default();
        c.stance_api_key = Some("secret-token".into());
        let frozen = c.to_frozen_string();
        assert!(!frozen.contains("secret-token"));
        assert!(frozen.contains("stance-api-key = <redacted>"));
        assert_eq!(frozen, c.to_frozen_string());
    }

    #[test]
    fn frozen_dump_round_trips() {
        let c = RunConfig::default();
        let mut parsed = RunConfig::default();
        parsed.apply_str(&c.to_frozen_string()).unwrap();
        assert_eq!(parsed, c);
    }
}
