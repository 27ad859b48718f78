//! Chat endpoint client for stance classification.
//!
//! Speaks the common chat-completions JSON shape:
//! `{model, temperature, messages: [{role, content}]}` ->
//! `{choices: [{message: {content}}]}`. A deterministic keyword-based mock
//! stands in for offline runs and tests.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ParseFailure, StanceError, StanceLabel, StanceRecord, prompt_hash};
use crate::corpus::PostRecord;

/// A chat-style text completion source.
pub trait ChatEndpoint: Sync {
    fn model_id(&self) -> &str;

    /// Send one prompt, return the raw text content of the first choice.
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, String>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

/// HTTP chat endpoint. The API key comes from configuration or an
/// environment variable and is sent as a bearer token when present.
pub struct HttpChatEndpoint {
    base_url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        HttpChatEndpoint {
            base_url: base_url.into(),
            model: model.into(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("client builds"),
        }
    }
}

impl ChatEndpoint for HttpChatEndpoint {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, String> {
        let request = ChatRequest {
            model: &self.model,
            temperature,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: user,
                },
            ],
        };
        let mut builder = self.client.post(&self.base_url).json(&request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("chat endpoint returned {}", resp.status()));
        }
        let body: ChatResponse = resp.json().map_err(|e| e.to_string())?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "chat endpoint returned no choices".into())
    }
}

/// Deterministic keyword mock: "favor" cues beat "against" cues, ties and
/// absence go to the long neutral phrasing.
#[derive(Debug, Clone, Default)]
pub struct MockChatEndpoint;

const FAVOR_CUES: &[&str] = &["grateful", "safe", "effective", "protect", "love", "glad", "boosted"];
const AGAINST_CUES: &[&str] = &["dangerous", "forced", "mandatory", "refuse", "hoax", "poison", "injury"];

impl ChatEndpoint for MockChatEndpoint {
    fn model_id(&self) -> &str {
        "mock-stance-v1"
    }

    fn complete(&self, _system: &str, user: &str, _temperature: f64) -> Result<String, String> {
        let lower = user.to_ascii_lowercase();
        let favor = FAVOR_CUES.iter().filter(|c| lower.contains(*c)).count();
        let against = AGAINST_CUES.iter().filter(|c| lower.contains(*c)).count();
        Ok(if favor > against {
            "favor".to_string()
        } else if against > favor {
            "against".to_string()
        } else {
            "neither of the two inferences can be reasonably made".to_string()
        })
    }
}

/// Options for a classification run.
pub struct ClassifyOptions {
    pub template: String,
    pub system_prompt: String,
    pub target: String,
    pub temperature: f64,
    pub run_id: String,
    pub concurrency: usize,
    pub retries: u32,
    /// Append-only run log; doubles as the resume checkpoint.
    pub checkpoint: Option<PathBuf>,
}

/// Outcome of a classification run: records sorted by post_id plus any
/// responses the normalization table could not map.
pub struct ClassifyOutcome {
    pub records: Vec<StanceRecord>,
    pub parse_failures: Vec<ParseFailure>,
}

fn load_existing(path: &Path, run_id: &str) -> Result<Vec<StanceRecord>, StanceError> {
    let mut out = Vec::new();
    if !path.exists() {
        return Ok(out);
    }
    let file = File::open(path).map_err(|source| StanceError::Checkpoint {
        path: path.display().to_string(),
        source,
    })?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| StanceError::Checkpoint {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(record) = serde_json::from_str::<StanceRecord>(&line) {
            if record.run_id == run_id {
                out.push(record);
            }
        }
    }
    Ok(out)
}

/// Classify each post with respect to the configured target. One record per
/// post; unparseable responses are retried once and then logged as parse
/// failures, never silently coerced. Requests fan out over a bounded
/// number of worker threads; progress appends to the run log so an
/// interrupted run resumes without re-querying decided posts.
pub fn classify(
    posts: &[PostRecord],
    endpoint: &dyn ChatEndpoint,
    opts: &ClassifyOptions,
) -> Result<ClassifyOutcome, StanceError> {
    if !opts.template.contains("{text}") {
        return Err(StanceError::TemplateMissingSlot);
    }
    let hash = prompt_hash(&opts.template, &opts.target);
    let mut records: Vec<StanceRecord> = match &opts.checkpoint {
        Some(path) => load_existing(path, &opts.run_id)?,
        None => Vec::new(),
    };
    let done: HashSet<String> = records.iter().map(|r| r.post_id.clone()).collect();
    let pending: Vec<&PostRecord> = posts.iter().filter(|p| !done.contains(&p.id)).collect();

    let log_file = match &opts.checkpoint {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| StanceError::Checkpoint {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path).map_err(
                |source| StanceError::Checkpoint {
                    path: path.display().to_string(),
                    source,
                },
            )?))
        }
        None => None,
    };

    let concurrency = opts.concurrency.max(1);
    let results: Mutex<Vec<Result<(StanceRecord, Option<ParseFailure>), String>>> =
        Mutex::new(Vec::new());
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..concurrency.min(pending.len().max(1)) {
            scope.spawn(|| {
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    let Some(post) = pending.get(i) else { break };
                    let outcome = classify_one(post, endpoint, opts, &hash);
                    if let (Ok((record, None)), Some(log)) = (&outcome, &log_file) {
                        let line = serde_json::to_string(record).expect("record serializes");
                        let mut file = log.lock().unwrap();
                        let _ = writeln!(file, "{line}");
                    }
                    results.lock().unwrap().push(outcome);
                }
            });
        }
    });

    let mut parse_failures = Vec::new();
    for result in results.into_inner().unwrap() {
        match result {
            Ok((record, failure)) => {
                if let Some(f) = failure {
                    parse_failures.push(f);
                } else {
                    records.push(record);
                }
            }
            Err(reason) => {
                return Err(StanceError::EndpointExhausted {
                    reason,
                    checkpoint: opts
                        .checkpoint
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_else(|| "<none>".into()),
                });
            }
        }
    }
    records.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    parse_failures.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    Ok(ClassifyOutcome {
        records,
        parse_failures,
    })
}

/// One post: transport retries with backoff, then one extra attempt if the
/// response text does not normalize.
fn classify_one(
    post: &PostRecord,
    endpoint: &dyn ChatEndpoint,
    opts: &ClassifyOptions,
    hash: &str,
) -> Result<(StanceRecord, Option<ParseFailure>), String> {
    let user = opts
        .template
        .replace("{target}", &opts.target)
        .replace("{text}", &post.text);
    let mut raw = complete_with_retry(endpoint, &opts.system_prompt, &user, opts.temperature, opts.retries)?;
    let mut label = StanceLabel::normalize(&raw);
    if label.is_none() {
        raw = complete_with_retry(endpoint, &opts.system_prompt, &user, opts.temperature, opts.retries)?;
        label = StanceLabel::normalize(&raw);
    }
    match label {
        Some(label) => Ok((
            StanceRecord {
                post_id: post.id.clone(),
                label,
                model_id: endpoint.model_id().to_string(),
                temperature: opts.temperature,
                prompt_hash: hash.to_string(),
                run_id: opts.run_id.clone(),
            },
            None,
        )),
        None => Ok((
            // placeholder record is discarded by the caller when a failure
            // is attached
            StanceRecord {
                post_id: post.id.clone(),
                label: StanceLabel::Neutral,
                model_id: endpoint.model_id().to_string(),
                temperature: opts.temperature,
                prompt_hash: hash.to_string(),
                run_id: opts.run_id.clone(),
            },
            Some(ParseFailure {
                post_id: post.id.clone(),
                raw_response: raw,
            }),
        )),
    }
}

fn complete_with_retry(
    endpoint: &dyn ChatEndpoint,
    system: &str,
    user: &str,
    temperature: f64,
    retries: u32,
) -> Result<String, String> {
    let mut last = String::new();
    for attempt in 0..=retries {
        match endpoint.complete(system, user, temperature) {
            Ok(text) => return Ok(text),
            Err(e) => {
                last = e;
                if attempt < retries {
                    std::thread::sleep(Duration::from_millis(20 << attempt.min(6)));
                }
            }
        }
    }
    Err(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn post(id: &str, text: &str) -> PostRecord {
        PostRecord {
            id: id.into(),
            user_id: format!("u{id}"),
            created_at: Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap(),
            text: text.into(),
            token_count: 3,
        }
    }

    fn options(checkpoint: Option<PathBuf>) -> ClassifyOptions {
        ClassifyOptions {
            template: "Stance toward {target}: {text}".into(),
            system_prompt: "You classify stance.".into(),
            target: "vaccines".into(),
            temperature: 0.4,
            run_id: "run-1".into(),
            concurrency: 4,
            retries: 1,
            checkpoint,
        }
    }

    struct FixedEndpoint(&'static str);

    impl ChatEndpoint for FixedEndpoint {
        fn model_id(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _s: &str, _u: &str, _t: f64) -> Result<String, String> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn all_favor_endpoint() {
        let posts: Vec<PostRecord> = (0..5).map(|i| post(&format!("p{i}"), "text")).collect();
        let out = classify(&posts, &FixedEndpoint("favor"), &options(None)).unwrap();
        assert_eq!(out.records.len(), 5);
        assert!(out.records.iter().all(|r| r.label == StanceLabel::Favor));
    }

    #[test]
    fn noisy_case_is_normalized() {
        let posts = vec![post("a", "text")];
        let out = classify(&posts, &FixedEndpoint("FAVOR\n"), &options(None)).unwrap();
        assert_eq!(out.records[0].label, StanceLabel::Favor);
    }

    struct GarbageForOne;

    impl ChatEndpoint for GarbageForOne {
        fn model_id(&self) -> &str {
            "garbage-for-one"
        }
        fn complete(&self, _s: &str, user: &str, _t: f64) -> Result<String, String> {
            if user.contains("post-3-text") {
                Ok("???".to_string())
            } else {
                Ok("against".to_string())
            }
        }
    }

    #[test]
    fn garbage_response_becomes_parse_failure() {
        let posts: Vec<PostRecord> = (0..10)
            .map(|i| post(&format!("p{i}"), &format!("post-{i}-text")))
            .collect();
        let out = classify(&posts, &GarbageForOne, &options(None)).unwrap();
        assert_eq!(out.records.len(), 9);
        assert_eq!(out.parse_failures.len(), 1);
        assert_eq!(out.parse_failures[0].post_id, "p3");
    }

    #[test]
    fn missing_text_slot_rejected() {
        let mut opts = options(None);
        opts.template = "no slot here".into();
        assert!(matches!(
            classify(&[post("a", "x")], &FixedEndpoint("favor"), &opts),
            Err(StanceError::TemplateMissingSlot)
        ));
    }

    struct DownThenUp {
        fail_for: &'static str,
    }

    impl ChatEndpoint for DownThenUp {
        fn model_id(&self) -> &str {
            "mock-stance-v1"
        }
        fn complete(&self, _s: &str, user: &str, _t: f64) -> Result<String, String> {
            if user.contains(self.fail_for) {
                Err("endpoint down".into())
            } else {
                MockChatEndpoint.complete(_s, user, _t)
            }
        }
    }

    #[test]
    fn checkpoint_resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("records.jsonl");
        let posts: Vec<PostRecord> = (0..12)
            .map(|i| {
                post(
                    &format!("p{i:02}"),
                    if i % 3 == 0 {
                        "vaccines are safe and effective"
                    } else if i % 3 == 1 {
                        "forced mandatory shots are dangerous"
                    } else {
                        "got an appointment today"
                    },
                )
            })
            .collect();
        let mut opts = options(Some(log.clone()));
        opts.retries = 0;
        // first run fails on a subset of posts
        let err = classify(&posts, &DownThenUp { fail_for: "appointment" }, &opts);
        assert!(matches!(err, Err(StanceError::EndpointExhausted { .. })));
        // resume completes
        let resumed = classify(&posts, &MockChatEndpoint, &opts).unwrap();
        // reference: uninterrupted run, no checkpoint
        let clean = classify(&posts, &MockChatEndpoint, &options(None)).unwrap();
        assert_eq!(resumed.records, clean.records);
    }

    #[test]
    fn records_sorted_by_post_id() {
        let posts: Vec<PostRecord> = (0..20).rev().map(|i| post(&format!("p{i:02}"), "x")).collect();
        let out = classify(&posts, &FixedEndpoint("neutral"), &options(None)).unwrap();
        let ids: Vec<&str> = out.records.iter().map(|r| r.post_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }
}
