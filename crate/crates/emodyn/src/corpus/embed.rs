//! Embedding provider interface and the semantic off-topic filter.
//!
//! The filter embeds every post text plus an anchor phrase and keeps a post
//! iff cosine(embed(text), embed(anchor)) < threshold (strict: the boundary
//! is filtered out). Providers are pluggable: an HTTP endpoint for real
//! runs and a deterministic token-hash provider for tests and offline runs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::PostRecord;
use crate::lexicon::tokenize;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("embedding provider failed after {retries} retries: {reason}; resume checkpoint at {checkpoint}")]
    ProviderExhausted {
        retries: u32,
        reason: String,
        checkpoint: String,
    },
    #[error("embedding provider returned {got} vectors for {expected} texts")]
    VectorCountMismatch { expected: usize, got: usize },
    #[error("checkpoint i/o error at {path}: {source}")]
    Checkpoint {
        path: String,
        source: std::io::Error,
    },
}

/// Per-post filter outcome. `kept` holds iff `similarity < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub post_id: String,
    pub similarity: f64,
    pub kept: bool,
}

/// Batched text-embedding source.
pub trait EmbeddingProvider: Sync {
    /// Embed a batch of texts. Vectors need not be unit norm; the filter
    /// normalizes. A transient failure should be returned as `Err`.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String>;
}

/// HTTP provider: `POST {base_url}` with `{"texts": [...]}` returning
/// `{"vectors": [[...], ...]}`.
pub struct HttpEmbeddingProvider {
    base_url: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbeddingProvider {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpEmbeddingProvider {
            base_url: base_url.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("client builds"),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let resp = self
            .client
            .post(&self.base_url)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("embedding endpoint returned {}", resp.status()));
        }
        let body: EmbedResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(body.vectors)
    }
}

/// Deterministic offline provider: a text maps to a normalized
/// bag-of-hashed-tokens vector, so texts sharing vocabulary score high
/// cosine similarity and disjoint texts score near zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEmbeddingProvider {
    pub dims: usize,
}

impl MockEmbeddingProvider {
    pub fn new() -> Self {
        MockEmbeddingProvider { dims: 32 }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let dims = if self.dims == 0 { 32 } else { self.dims };
        let mut v = vec![0.0f64; dims];
        for token in tokenize(text) {
            let digest = Sha256::digest(token.as_bytes());
            let idx = u64::from_le_bytes(digest[..8].try_into().unwrap()) as usize % dims;
            v[idx] += 1.0;
        }
        v
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// A provider that fails a fixed number of times before delegating.
/// Test-support type, also used to exercise checkpoint resume.
pub struct FlakyProvider<P> {
    inner: P,
    failures: std::sync::atomic::AtomicU32,
}

impl<P> FlakyProvider<P> {
    pub fn new(inner: P, failures: u32) -> Self {
        FlakyProvider {
            inner,
            failures: std::sync::atomic::AtomicU32::new(failures),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for FlakyProvider<P> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        use std::sync::atomic::Ordering;
        let remaining = self.failures.load(Ordering::SeqCst);
        if remaining > 0 {
            self.failures.store(remaining - 1, Ordering::SeqCst);
            return Err("transient provider failure".into());
        }
        self.inner.embed(texts)
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn load_checkpoint(path: &Path) -> Result<HashMap<String, FilterDecision>, FilterError> {
    let mut map = HashMap::new();
    if !path.exists() {
        return Ok(map);
    }
    let file = File::open(path).map_err(|source| FilterError::Checkpoint {
        path: path.display().to_string(),
        source,
    })?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| FilterError::Checkpoint {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(d) = serde_json::from_str::<FilterDecision>(&line) {
            map.insert(d.post_id.clone(), d);
        }
    }
    Ok(map)
}

fn write_checkpoint(path: &Path, decisions: &[FilterDecision]) -> Result<(), FilterError> {
    let file = File::create(path).map_err(|source| FilterError::Checkpoint {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for d in decisions {
        let line = serde_json::to_string(d).expect("decision serializes");
        writeln!(w, "{line}").map_err(|source| FilterError::Checkpoint {
            path: path.display().to_string(),
            source,
        })?;
    }
    w.flush().map_err(|source| FilterError::Checkpoint {
        path: path.display().to_string(),
        source,
    })
}

/// Filter posts by cosine similarity to `anchor`. Every post receives a
/// [`FilterDecision`]; kept iff similarity strictly below `threshold`.
///
/// On persistent provider failure the decisions made so far are written to
/// `checkpoint` and the run aborts; a re-run with the same checkpoint path
/// resumes without re-embedding decided posts. No post is ever silently
/// dropped.
pub fn semantic_filter(
    posts: Vec<PostRecord>,
    anchor: &str,
    threshold: f64,
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
    retries: u32,
    checkpoint: Option<&Path>,
) -> Result<(Vec<PostRecord>, Vec<FilterDecision>), FilterError> {
    assert!(threshold > 0.0 && threshold <= 1.0, "threshold in (0, 1]");
    let batch_size = batch_size.max(1);
    let mut decided: HashMap<String, FilterDecision> = match checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => HashMap::new(),
    };

    let anchor_vec = embed_with_retry(provider, &[anchor.to_string()], retries, checkpoint, &decided)?
        .pop()
        .ok_or(FilterError::VectorCountMismatch {
            expected: 1,
            got: 0,
        })?;

    let pending: Vec<&PostRecord> = posts
        .iter()
        .filter(|p| !decided.contains_key(&p.id))
        .collect();
    for chunk in pending.chunks(batch_size) {
        let texts: Vec<String> = chunk.iter().map(|p| p.text.clone()).collect();
        let vectors = match embed_with_retry(provider, &texts, retries, checkpoint, &decided) {
            Ok(v) => v,
            Err(e) => return Err(e),
        };
        if vectors.len() != texts.len() {
            return Err(FilterError::VectorCountMismatch {
                expected: texts.len(),
                got: vectors.len(),
            });
        }
        for (post, vec) in chunk.iter().zip(vectors) {
            let similarity = cosine_similarity(&vec, &anchor_vec);
            decided.insert(
                post.id.clone(),
                FilterDecision {
                    post_id: post.id.clone(),
                    similarity,
                    kept: similarity < threshold,
                },
            );
        }
    }

    let mut kept = Vec::new();
    let mut decisions = Vec::with_capacity(posts.len());
    for post in posts {
        let d = decided
            .get(&post.id)
            .expect("every post decided")
            .clone();
        if d.kept {
            kept.push(post);
        }
        decisions.push(d);
    }
    Ok((kept, decisions))
}

fn embed_with_retry(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
    retries: u32,
    checkpoint: Option<&Path>,
    decided: &HashMap<String, FilterDecision>,
) -> Result<Vec<Vec<f64>>, FilterError> {
    let mut last_err = String::new();
    for attempt in 0..=retries {
        match provider.embed(texts) {
            Ok(v) => return Ok(v),
            Err(e) => {
                last_err = e;
                if attempt < retries {
                    std::thread::sleep(Duration::from_millis(20 << attempt.min(6)));
                }
            }
        }
    }
    let checkpoint_path = match checkpoint {
        Some(path) => {
            let mut snapshot: Vec<FilterDecision> = decided.values().cloned().collect();
            snapshot.sort_by(|a, b| a.post_id.cmp(&b.post_id));
            write_checkpoint(path, &snapshot)?;
            path.display().to_string()
        }
        None => "<none>".to_string(),
    };
    Err(FilterError::ProviderExhausted {
        retries,
        reason: last_err,
        checkpoint: checkpoint_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn record(id: &str, text: &str) -> PostRecord {
        PostRecord {
            id: id.into(),
            user_id: format!("u-{id}"),
            created_at: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
            text: text.into(),
            token_count: 0,
        }
    }

    /// Maps any text containing "band" onto the anchor's exact vector and
    /// everything else onto an orthogonal one.
    struct TwoVectorProvider;

    impl EmbeddingProvider for TwoVectorProvider {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
            Ok(texts
                .iter()
                .map(|t| {
                    if t.contains("band") || t.contains("anchor") {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    }
                })
                .collect())
        }
    }

    /// Returns a vector at a fixed cosine angle to the anchor.
    struct FixedSimilarityProvider(f64);

    impl EmbeddingProvider for FixedSimilarityProvider {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
            Ok(texts
                .iter()
                .map(|t| {
                    if t.contains("anchor") {
                        vec![1.0, 0.0]
                    } else {
                        let c = self.0;
                        vec![c, (1.0 - c * c).sqrt()]
                    }
                })
                .collect())
        }
    }

    #[test]
    fn band_posts_filtered_out() {
        let posts = vec![record("a", "great band show"), record("b", "get your shot")];
        let (kept, decisions) = semantic_filter(
            posts,
            "anchor phrase",
            0.7,
            &TwoVectorProvider,
            16,
            0,
            None,
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "b");
        assert_eq!(decisions.len(), 2);
        let a = decisions.iter().find(|d| d.post_id == "a").unwrap();
        assert!(!a.kept);
        assert!((a.similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_posts_kept() {
        let posts = vec![record("b", "get your shot")];
        let (kept, decisions) =
            semantic_filter(posts, "anchor", 0.7, &TwoVectorProvider, 16, 0, None).unwrap();
        assert_eq!(kept.len(), 1);
        assert!((decisions[0].similarity).abs() < 1e-12);
    }

    #[test]
    fn boundary_similarity_is_filtered() {
        // similarity exactly at the threshold: strict `<` keeps, so 0.7 goes out
        let posts = vec![record("x", "boundary case")];
        let (kept, decisions) = semantic_filter(
            posts,
            "anchor",
            0.7,
            &FixedSimilarityProvider(0.7),
            16,
            0,
            None,
        )
        .unwrap();
        assert!(kept.is_empty());
        assert!(!decisions[0].kept);
        assert!((decisions[0].similarity - 0.7).abs() < 1e-12);
    }

    #[test]
    fn completeness_kept_plus_filtered() {
        let posts: Vec<PostRecord> = (0..10)
            .map(|i| {
                record(
                    &format!("p{i}"),
                    if i % 3 == 0 { "band gig" } else { "health topic" },
                )
            })
            .collect();
        let n = posts.len();
        let (kept, decisions) =
            semantic_filter(posts, "anchor", 0.7, &TwoVectorProvider, 3, 0, None).unwrap();
        let filtered = decisions.iter().filter(|d| !d.kept).count();
        assert_eq!(kept.len() + filtered, n);
        for d in &decisions {
            assert_eq!(d.kept, d.similarity < 0.7);
        }
    }

    #[test]
    fn retry_recovers_from_transient_failure() {
        let provider = FlakyProvider::new(TwoVectorProvider, 2);
        let posts = vec![record("a", "health topic")];
        let (kept, _) = semantic_filter(posts, "anchor", 0.7, &provider, 16, 3, None).unwrap();
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn exhausted_retries_write_checkpoint_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let checkpoint = dir.path().join("ck.jsonl");
        let posts: Vec<PostRecord> = (0..6)
            .map(|i| record(&format!("p{i}"), "health topic"))
            .collect();
        // Anchor embed + first batch succeed, second batch fails.
        let provider = FailAfter {
            inner: TwoVectorProvider,
            allowed: std::sync::atomic::AtomicU32::new(2),
        };
        let err = semantic_filter(
            posts.clone(),
            "anchor",
            0.7,
            &provider,
            3,
            0,
            Some(&checkpoint),
        )
        .unwrap_err();
        match err {
            FilterError::ProviderExhausted { checkpoint: c, .. } => {
                assert!(c.ends_with("ck.jsonl"));
            }
            other => panic!("unexpected error: {other:?}"),
        }
        assert!(checkpoint.exists());
        // Resume with a healthy provider completes every post.
        let (kept, decisions) = semantic_filter(
            posts,
            "anchor",
            0.7,
            &TwoVectorProvider,
            3,
            0,
            Some(&checkpoint),
        )
        .unwrap();
        assert_eq!(kept.len(), 6);
        assert_eq!(decisions.len(), 6);
    }

    struct FailAfter<P> {
        inner: P,
        allowed: std::sync::atomic::AtomicU32,
    }

    impl<P: EmbeddingProvider> EmbeddingProvider for FailAfter<P> {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
            use std::sync::atomic::Ordering;
            let left = self.allowed.load(Ordering::SeqCst);
            if left == 0 {
                return Err("provider down".into());
            }
            self.allowed.store(left - 1, Ordering::SeqCst);
            self.inner.embed(texts)
        }
    }

    #[test]
    fn mock_provider_is_deterministic() {
        let p = MockEmbeddingProvider::new();
        let texts = vec!["the vaccines music band".to_string()];
        assert_eq!(p.embed(&texts).unwrap(), p.embed(&texts).unwrap());
    }

    #[test]
    fn mock_provider_shared_vocab_scores_high() {
        let p = MockEmbeddingProvider::new();
        let v = p
            .embed(&[
                "The Vaccines music band".into(),
                "love this music band the vaccines".into(),
                "got my second dose today".into(),
            ])
            .unwrap();
        let near = cosine_similarity(&v[0], &v[1]);
        let far = cosine_similarity(&v[0], &v[2]);
        assert!(near > 0.7, "near = {near}");
        assert!(far < 0.7, "far = {far}");
    }
}
