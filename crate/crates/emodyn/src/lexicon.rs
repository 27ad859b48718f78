//! Word-emotion lexicons and per-post scoring.
//!
//! Two lexicons drive the analysis: a categorical emotion lexicon
//! (word -> set of emotion/sentiment flags, NRC tab-separated format) and a
//! continuous warmth lexicon (word -> warmth/sociability/trust/competence/
//! arousal scores in [0, 1], CSV format). Exclusion lists are applied at
//! load time; excluded words never match during scoring but still count in
//! density denominators.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: unknown emotion category `{category}`")]
    UnknownCategory { line: usize, category: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("missing column `{0}` in warmth lexicon header")]
    MissingColumn(String),
    #[error("line {line}: score {value} out of range [0, 1] for `{column}`")]
    ScoreOutOfRange {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("line {line}: non-numeric score for `{column}`")]
    NonNumericScore { line: usize, column: String },
}

/// The eight Plutchik emotions plus the two sentiment polarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionCategory {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
    Positive,
    Negative,
}

impl EmotionCategory {
    pub const ALL: [EmotionCategory; 10] = [
        EmotionCategory::Anger,
        EmotionCategory::Anticipation,
        EmotionCategory::Disgust,
        EmotionCategory::Fear,
        EmotionCategory::Joy,
        EmotionCategory::Sadness,
        EmotionCategory::Surprise,
        EmotionCategory::Trust,
        EmotionCategory::Positive,
        EmotionCategory::Negative,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionCategory::Anger => "anger",
            EmotionCategory::Anticipation => "anticipation",
            EmotionCategory::Disgust => "disgust",
            EmotionCategory::Fear => "fear",
            EmotionCategory::Joy => "joy",
            EmotionCategory::Sadness => "sadness",
            EmotionCategory::Surprise => "surprise",
            EmotionCategory::Trust => "trust",
            EmotionCategory::Positive => "positive",
            EmotionCategory::Negative => "negative",
        }
    }
}

impl fmt::Display for EmotionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anger" => Ok(EmotionCategory::Anger),
            "anticipation" => Ok(EmotionCategory::Anticipation),
            "disgust" => Ok(EmotionCategory::Disgust),
            "fear" => Ok(EmotionCategory::Fear),
            "joy" => Ok(EmotionCategory::Joy),
            "sadness" => Ok(EmotionCategory::Sadness),
            "surprise" => Ok(EmotionCategory::Surprise),
            "trust" => Ok(EmotionCategory::Trust),
            "positive" => Ok(EmotionCategory::Positive),
            "negative" => Ok(EmotionCategory::Negative),
            other => Err(format!("unknown emotion category: {other}")),
        }
    }
}

/// Compact per-word category set, one bit per [`EmotionCategory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CategorySet(u16);

impl CategorySet {
    pub fn insert(&mut self, cat: EmotionCategory) {
        self.0 |= 1 << cat as u16;
    }

    pub fn remove(&mut self, cat: EmotionCategory) {
        self.0 &= !(1 << cat as u16);
    }

    pub fn contains(&self, cat: EmotionCategory) -> bool {
        self.0 & (1 << cat as u16) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = EmotionCategory> + '_ {
        EmotionCategory::ALL
            .iter()
            .copied()
            .filter(move |c| self.contains(*c))
    }
}

/// Categorical word-emotion lexicon (NRC style).
#[derive(Debug, Clone, Default)]
pub struct EmotionLexicon {
    entries: HashMap<String, CategorySet>,
}

impl EmotionLexicon {
    pub fn get(&self, word: &str) -> Option<CategorySet> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Build from (word, category) pairs. Used by tests and fixtures.
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, EmotionCategory)>,
        S: Into<String>,
    {
        let mut entries: HashMap<String, CategorySet> = HashMap::new();
        for (word, cat) in pairs {
            entries.entry(word.into()).or_default().insert(cat);
        }
        EmotionLexicon { entries }
    }
}

/// Continuous per-word scores on the five warmth-lexicon dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmthScores {
    pub warmth: f64,
    pub sociability: f64,
    pub trust: f64,
    pub competence: f64,
    pub arousal: f64,
}

impl WarmthScores {
    pub fn dimension(&self, dim: WarmthDimension) -> f64 {
        match dim {
            WarmthDimension::Warmth => self.warmth,
            WarmthDimension::Sociability => self.sociability,
            WarmthDimension::Trust => self.trust,
            WarmthDimension::Competence => self.competence,
            WarmthDimension::Arousal => self.arousal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmthDimension {
    Warmth,
    Sociability,
    Trust,
    Competence,
    Arousal,
}

impl WarmthDimension {
    pub const ALL: [WarmthDimension; 5] = [
        WarmthDimension::Warmth,
        WarmthDimension::Sociability,
        WarmthDimension::Trust,
        WarmthDimension::Competence,
        WarmthDimension::Arousal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WarmthDimension::Warmth => "warmth",
            WarmthDimension::Sociability => "sociability",
            WarmthDimension::Trust => "trust",
            WarmthDimension::Competence => "competence",
            WarmthDimension::Arousal => "arousal",
        }
    }
}

impl fmt::Display for WarmthDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WarmthDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "warmth" => Ok(WarmthDimension::Warmth),
            "sociability" => Ok(WarmthDimension::Sociability),
            "trust" => Ok(WarmthDimension::Trust),
            "competence" => Ok(WarmthDimension::Competence),
            "arousal" => Ok(WarmthDimension::Arousal),
            other => Err(format!("unknown warmth dimension: {other}")),
        }
    }
}

/// Continuous warmth/competence lexicon.
#[derive(Debug, Clone, Default)]
pub struct WarmthLexicon {
    entries: HashMap<String, WarmthScores>,
}

impl WarmthLexicon {
    pub fn get(&self, word: &str) -> Option<&WarmthScores> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, WarmthScores)>,
        S: Into<String>,
    {
        WarmthLexicon {
            entries: entries.into_iter().map(|(w, s)| (w.into(), s)).collect(),
        }
    }
}

/// Load an exclusion list: one word per line, `#` starts a comment.
pub fn load_exclusions(path: &Path) -> Result<HashSet<String>, LexiconError> {
    let raw = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_exclusions(&raw))
}

pub fn parse_exclusions(raw: &str) -> HashSet<String> {
    raw.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.to_ascii_lowercase())
        .collect()
}

/// Load the NRC-format emotion lexicon: `word<TAB>category<TAB>{0|1}`.
///
/// Only flag=1 rows are retained; excluded words are dropped entirely.
/// Duplicate (word, category) rows: last wins, with a warning.
pub fn load_emotion_lexicon(
    path: &Path,
    exclusions: &HashSet<String>,
) -> Result<EmotionLexicon, LexiconError> {
    let raw = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_emotion_lexicon(&raw, exclusions)
}

pub fn parse_emotion_lexicon(
    raw: &str,
    exclusions: &HashSet<String>,
) -> Result<EmotionLexicon, LexiconError> {
    let mut entries: HashMap<String, CategorySet> = HashMap::new();
    let mut seen: HashSet<(String, EmotionCategory)> = HashSet::new();
    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (word, category, flag) = match (parts.next(), parts.next(), parts.next()) {
            (Some(w), Some(c), Some(f)) => (w, c, f),
            _ => {
                return Err(LexiconError::MalformedRow {
                    line: lineno,
                    reason: "expected word<TAB>category<TAB>flag".into(),
                })
            }
        };
        let category =
            EmotionCategory::from_str(category).map_err(|_| LexiconError::UnknownCategory {
                line: lineno,
                category: category.to_string(),
            })?;
        let flag: u8 = flag
            .trim()
            .parse()
            .map_err(|_| LexiconError::MalformedRow {
                line: lineno,
                reason: format!("flag must be 0 or 1, got `{}`", flag.trim()),
            })?;
        if flag > 1 {
            return Err(LexiconError::MalformedRow {
                line: lineno,
                reason: format!("flag must be 0 or 1, got `{flag}`"),
            });
        }
        let word = word.to_ascii_lowercase();
        if !seen.insert((word.clone(), category)) {
            log::warn!("line {lineno}: duplicate entry ({word}, {category}), last wins");
        }
        if exclusions.contains(&word) {
            continue;
        }
        let set = entries.entry(word).or_default();
        if flag == 1 {
            set.insert(category);
        } else {
            set.remove(category);
        }
    }
    entries.retain(|_, set| !set.is_empty());
    Ok(EmotionLexicon { entries })
}

/// Load the warmth lexicon CSV with header
/// `word,warmth,sociability,trust,competence,arousal`.
pub fn load_warmth_lexicon(
    path: &Path,
    exclusions: &HashSet<String>,
) -> Result<WarmthLexicon, LexiconError> {
    let raw = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_warmth_lexicon(&raw, exclusions)
}

pub fn parse_warmth_lexicon(
    raw: &str,
    exclusions: &HashSet<String>,
) -> Result<WarmthLexicon, LexiconError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| LexiconError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let expected = ["word", "warmth", "sociability", "trust", "competence", "arousal"];
    let mut col_idx = [0usize; 6];
    for (i, name) in expected.iter().enumerate() {
        col_idx[i] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| LexiconError::MissingColumn(name.to_string()))?;
    }
    let mut entries = HashMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let lineno = row_idx + 2; // header is line 1
        let record = record.map_err(|e| LexiconError::MalformedRow {
            line: lineno,
            reason: e.to_string(),
        })?;
        let word = record
            .get(col_idx[0])
            .ok_or_else(|| LexiconError::MalformedRow {
                line: lineno,
                reason: "missing word field".into(),
            })?
            .to_ascii_lowercase();
        let mut scores = [0.0f64; 5];
        for (i, column) in expected[1..].iter().enumerate() {
            let field = record
                .get(col_idx[i + 1])
                .ok_or_else(|| LexiconError::MalformedRow {
                    line: lineno,
                    reason: format!("missing `{column}` field"),
                })?;
            let value: f64 = field.trim().parse().map_err(|_| LexiconError::NonNumericScore {
                line: lineno,
                column: column.to_string(),
            })?;
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(LexiconError::ScoreOutOfRange {
                    line: lineno,
                    column: column.to_string(),
                    value,
                });
            }
            scores[i] = value;
        }
        if exclusions.contains(&word) {
            continue;
        }
        entries.insert(
            word,
            WarmthScores {
                warmth: scores[0],
                sociability: scores[1],
                trust: scores[2],
                competence: scores[3],
                arousal: scores[4],
            },
        );
    }
    Ok(WarmthLexicon { entries })
}

/// Lowercase, split on any non-alphanumeric character, keep tokens of
/// length >= 1. `#word` yields `word`. Input is expected to be cleaned
/// ASCII, but the splitter is total on any string.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            current.push(ch.to_ascii_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Per-post emotion counts and warmth-dimension sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostScore {
    pub post_id: String,
    pub token_count: u32,
    pub emotion_counts: BTreeMap<EmotionCategory, u32>,
    pub warmth_sum: f64,
    pub sociability_sum: f64,
    pub trust_sum: f64,
    pub competence_sum: f64,
    pub warmth_hits: u32,
}

impl PostScore {
    pub fn emotion_count(&self, cat: EmotionCategory) -> u32 {
        self.emotion_counts.get(&cat).copied().unwrap_or(0)
    }
}

/// Score one cleaned post against both lexicons.
///
/// A word carrying k categories contributes 1 to each of the k counts.
/// Tokens absent from a lexicon contribute only to `token_count`.
pub fn score_text(
    post_id: &str,
    text: &str,
    elex: &EmotionLexicon,
    wlex: &WarmthLexicon,
) -> PostScore {
    let tokens = tokenize(text);
    let mut emotion_counts: BTreeMap<EmotionCategory, u32> = BTreeMap::new();
    let mut warmth_sum = 0.0;
    let mut sociability_sum = 0.0;
    let mut trust_sum = 0.0;
    let mut competence_sum = 0.0;
    let mut warmth_hits = 0u32;
    for token in &tokens {
        if let Some(set) = elex.get(token) {
            for cat in set.iter() {
                *emotion_counts.entry(cat).or_insert(0) += 1;
            }
        }
        if let Some(scores) = wlex.get(token) {
            warmth_sum += scores.warmth;
            sociability_sum += scores.sociability;
            trust_sum += scores.trust;
            competence_sum += scores.competence;
            warmth_hits += 1;
        }
    }
    PostScore {
        post_id: post_id.to_string(),
        token_count: tokens.len() as u32,
        emotion_counts,
        warmth_sum,
        sociability_sum,
        trust_sum,
        competence_sum,
        warmth_hits,
    }
}
