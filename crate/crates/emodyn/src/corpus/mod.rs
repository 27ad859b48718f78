//! Corpus ingestion and preprocessing.
//!
//! Raw JSONL post collections go through text cleaning, one-post-per-user-
//! per-day deduplication, and a semantic off-topic filter, producing a
//! canonical corpus sorted by (created_at, id). The result is byte-identical
//! for any input line order and worker count.

pub mod embed;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorClass;
use crate::lexicon::tokenize;

pub use embed::{
    EmbeddingProvider, FilterDecision, FilterError, HttpEmbeddingProvider, MockEmbeddingProvider,
    semantic_filter,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate post id `{0}` in input")]
    DuplicateId(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

impl CorpusError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CorpusError::Filter(_) => ErrorClass::Provider,
            CorpusError::DuplicateId(_) => ErrorClass::Data,
            CorpusError::Io { .. } => ErrorClass::Internal,
        }
    }
}

/// One raw post as found in the input JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_repost: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One cleaned, deduplicated post in the canonical corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub token_count: u32,
}

impl PostRecord {
    /// UTC calendar month, `YYYY-MM`.
    pub fn month(&self) -> String {
        self.created_at.format("%Y-%m").to_string()
    }

    pub fn day(&self) -> NaiveDate {
        self.created_at.date_naive()
    }
}

/// Counts reported after an ingest run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub raw_lines: u64,
    pub rejected: u64,
    pub reposts_removed: u64,
    pub after_dedup: u64,
    pub after_filter: u64,
    pub filtered_out: u64,
    pub unique_users: u64,
}

static URL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());
static MENTION_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"@\w+").unwrap());

/// Default ASCII emoticon list; the emoji codepoints are covered by the
/// non-ASCII strip.
pub const DEFAULT_ASCII_EMOTICONS: &[&str] = &[
    ":-)", ":-(", ":-D", ":-P", ":-/", ":-|", ":)", ":(", ":D", ":P", ":/", ":|", ";-)", ";)",
    ":'(", "xD", "XD", "<3", "=)", "=(",
];

/// Remove URLs, user mentions, emoticons, and non-ASCII characters, then
/// collapse whitespace. Total on any UTF-8 input; empty output is allowed.
pub fn clean_text(raw: &str) -> String {
    clean_text_with(raw, DEFAULT_ASCII_EMOTICONS)
}

pub fn clean_text_with(raw: &str, ascii_emoticons: &[&str]) -> String {
    let no_urls = URL_RE.replace_all(raw, " ");
    let no_mentions = MENTION_RE.replace_all(&no_urls, " ");
    let mut text = no_mentions.into_owned();
    for emo in ascii_emoticons {
        if text.contains(emo) {
            text = text.replace(emo, " ");
        }
    }
    let ascii: String = text.chars().filter(|c| c.is_ascii()).collect();
    ascii.split_ascii_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when the post is a re-post: explicit input flag or `RT @` prefix.
pub fn is_repost(post: &RawPost) -> bool {
    post.is_repost || post.text.trim_start().starts_with("RT @")
}

/// Keep exactly one post per (user_id, UTC calendar day): the earliest by
/// created_at, ties broken by smallest id. Output sorted by (created_at, id).
///
/// Errors on a duplicate id anywhere in the input.
pub fn dedup_daily(posts: impl IntoIterator<Item = RawPost>) -> Result<Vec<RawPost>, CorpusError> {
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut by_key: HashMap<(String, NaiveDate), RawPost> = HashMap::new();
    for post in posts {
        if !seen_ids.insert(post.id.clone()) {
            return Err(CorpusError::DuplicateId(post.id));
        }
        let key = (post.user_id.clone(), post.created_at.date_naive());
        match by_key.get_mut(&key) {
            None => {
                by_key.insert(key, post);
            }
            Some(existing) => {
                if (post.created_at, &post.id) < (existing.created_at, &existing.id) {
                    *existing = post;
                }
            }
        }
    }
    let mut out: Vec<RawPost> = by_key.into_values().collect();
    out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    Ok(out)
}

/// One rejected input line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectRecord {
    pub line: u64,
    pub reason: String,
}

/// Pipeline stage order for the semantic filter relative to dedup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterOrder {
    /// clean -> dedup -> filter (default)
    #[default]
    AfterDedup,
    /// clean -> filter -> dedup
    BeforeDedup,
}

/// Ingest options beyond the raw input path.
pub struct IngestOptions<'a> {
    pub anchor: String,
    pub threshold: f64,
    pub provider: &'a dyn EmbeddingProvider,
    pub filter_order: FilterOrder,
    pub batch_size: usize,
    pub retries: u32,
    pub ascii_emoticons: Vec<String>,
}

/// Run the full preprocessing pipeline over a raw JSONL file and write the
/// canonical corpus plus side files into `out_dir`:
///
/// * `corpus.jsonl` — canonical records sorted by (created_at, id)
/// * `rejects.jsonl` — `{line, reason}` per malformed input line
/// * `filter_decisions.jsonl` — one [`FilterDecision`] per filtered post
pub fn ingest(
    input: &Path,
    out_dir: &Path,
    opts: &IngestOptions,
) -> Result<CorpusSummary, CorpusError> {
    let file = File::open(input).map_err(|source| CorpusError::Io {
        path: input.display().to_string(),
        source,
    })?;
    std::fs::create_dir_all(out_dir).map_err(|source| CorpusError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let mut summary = CorpusSummary::default();
    let mut rejects: Vec<RejectRecord> = Vec::new();
    let mut raw_posts: Vec<RawPost> = Vec::new();
    let emoticons: Vec<&str> = opts.ascii_emoticons.iter().map(|s| s.as_str()).collect();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = (idx + 1) as u64;
        let line = line.map_err(|source| CorpusError::Io {
            path: input.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        summary.raw_lines += 1;
        match serde_json::from_str::<RawPost>(&line) {
            Ok(post) if post.id.is_empty() => {
                summary.rejected += 1;
                rejects.push(RejectRecord {
                    line: lineno,
                    reason: "empty id".into(),
                });
            }
            Ok(post) => {
                if is_repost(&post) {
                    summary.reposts_removed += 1;
                } else {
                    raw_posts.push(post);
                }
            }
            Err(e) => {
                summary.rejected += 1;
                rejects.push(RejectRecord {
                    line: lineno,
                    reason: e.to_string(),
                });
            }
        }
    }

    // Clean text up front; cleaning never changes dedup keys.
    for post in &mut raw_posts {
        post.text = clean_text_with(&post.text, &emoticons);
    }

    let to_records = |posts: Vec<RawPost>| -> Vec<PostRecord> {
        posts
            .into_iter()
            .map(|p| {
                let token_count = tokenize(&p.text).len() as u32;
                PostRecord {
                    id: p.id,
                    user_id: p.user_id,
                    created_at: p.created_at,
                    text: p.text,
                    token_count,
                }
            })
            .collect()
    };
    let to_raw = |records: Vec<PostRecord>| -> Vec<RawPost> {
        records
            .into_iter()
            .map(|r| RawPost {
                id: r.id,
                user_id: r.user_id,
                created_at: r.created_at,
                text: r.text,
                is_repost: false,
            })
            .collect()
    };

    let checkpoint = out_dir.join("filter_checkpoint.jsonl");
    let (records, decisions) = match opts.filter_order {
        FilterOrder::AfterDedup => {
            let deduped = dedup_daily(raw_posts)?;
            summary.after_dedup = deduped.len() as u64;
            let (kept, decisions) = semantic_filter(
                to_records(deduped),
                &opts.anchor,
                opts.threshold,
                opts.provider,
                opts.batch_size,
                opts.retries,
                Some(&checkpoint),
            )?;
            (kept, decisions)
        }
        FilterOrder::BeforeDedup => {
            let (kept, decisions) = semantic_filter(
                to_records(raw_posts),
                &opts.anchor,
                opts.threshold,
                opts.provider,
                opts.batch_size,
                opts.retries,
                Some(&checkpoint),
            )?;
            let deduped = dedup_daily(to_raw(kept))?;
            summary.after_dedup = deduped.len() as u64;
            (to_records(deduped), decisions)
        }
    };
    // The checkpoint only matters for resuming a failed provider run.
    let _ = std::fs::remove_file(&checkpoint);

    let mut records = records;
    records.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    summary.after_filter = records.len() as u64;
    summary.filtered_out = decisions.iter().filter(|d| !d.kept).count() as u64;
    summary.unique_users = records
        .iter()
        .map(|r| r.user_id.as_str())
        .collect::<HashSet<_>>()
        .len() as u64;

    write_jsonl(&out_dir.join("corpus.jsonl"), &records)?;
    write_jsonl(&out_dir.join("rejects.jsonl"), &rejects)?;
    let mut sorted_decisions = decisions;
    sorted_decisions.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    write_jsonl(&out_dir.join("filter_decisions.jsonl"), &sorted_decisions)?;
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(out_dir.join("summary.json"), summary_json + "\n").map_err(|source| {
        CorpusError::Io {
            path: out_dir.join("summary.json").display().to_string(),
            source,
        }
    })?;
    Ok(summary)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("jsonl item serializes");
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a canonical corpus written by [`ingest`].
pub fn read_corpus(path: &Path) -> Result<Vec<PostRecord>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PostRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })?;
        out.push(record);
    }
    Ok(out)
}

/// Path to the canonical corpus inside an ingest output directory.
pub fn corpus_file(dir: &Path) -> PathBuf {
    dir.join("corpus.jsonl")
}
