//! Figure/table artifacts: top-k low-score word sets, deterministic SVG
//! rendering, and the per-directory artifact manifest.

pub mod svg;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::{WarmthLexicon, tokenize};
use crate::stance::StanceLabel;

pub use svg::{EllipseStyle, Series, render_ellipses, render_timeseries, render_treemap};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
}

/// Which low-score vocabulary a treemap covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowDimension {
    LowWarmth,
    LowCompetence,
}

impl LowDimension {
    pub fn as_str(&self) -> &'static str {
        match self {
            LowDimension::LowWarmth => "low-warmth",
            LowDimension::LowCompetence => "low-competence",
        }
    }
}

/// Top-k word frequencies for one stance subset and one low dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreemapSpec {
    pub stance: StanceLabel,
    pub dimension: LowDimension,
    pub entries: Vec<(String, u64)>,
}

/// Count token frequencies over the stance subset, restricted to words
/// whose lexicon score on the chosen dimension is strictly below
/// `threshold`; return the k most frequent (ties alphabetical).
///
/// `weight_by_posts` counts each word at most once per post instead of
/// once per token.
pub fn top_k_low_words<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    wlex: &WarmthLexicon,
    stance: StanceLabel,
    dimension: LowDimension,
    threshold: f64,
    k: usize,
    weight_by_posts: bool,
) -> Result<TreemapSpec, ReportError> {
    if k < 1 {
        return Err(ReportError::Param("k must be >= 1".into()));
    }
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(ReportError::Param(format!(
            "threshold must be in (0, 1), got {threshold}"
        )));
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut any = false;
    for text in texts {
        any = true;
        let mut seen: HashSet<String> = HashSet::new();
        for token in tokenize(text) {
            let Some(scores) = wlex.get(&token) else {
                continue;
            };
            let score = match dimension {
                LowDimension::LowWarmth => scores.warmth,
                LowDimension::LowCompetence => scores.competence,
            };
            if score >= threshold {
                continue;
            }
            if weight_by_posts && !seen.insert(token.clone()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    if !any {
        log::warn!("top_k_low_words: empty stance subset for {stance} / {}", dimension.as_str());
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    // frequency descending, ties alphabetical (BTreeMap already gave us
    // alphabetical order, and the sort is stable)
    entries.sort_by(|a, b| b.1.cmp(&a.1));
    entries.truncate(k);
    Ok(TreemapSpec {
        stance,
        dimension,
        entries,
    })
}

/// One artifact line in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Build a manifest of every file under `dir` (recursive), sorted by
/// relative path. `manifest.json` itself and `config.frozen` are excluded.
pub fn build_manifest(dir: &Path) -> Result<Manifest, ReportError> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Manifest { files })
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<ManifestEntry>) -> Result<(), ReportError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .expect("child of root")
            .to_string_lossy()
            .replace('\\', "/");
        // run metadata, not artifacts: the frozen config embeds absolute
        // paths, which would make manifests machine-specific
        if rel == "manifest.json" || rel == "config.frozen" {
            continue;
        }
        let data = std::fs::read(&path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        out.push(ManifestEntry {
            path: rel,
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        });
    }
    Ok(())
}

/// Write `manifest.json` into `dir`.
pub fn write_manifest(dir: &Path) -> Result<Manifest, ReportError> {
    let manifest = build_manifest(dir)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.json");
    std::fs::write(&path, json + "\n").map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::WarmthScores;

    fn wlex() -> WarmthLexicon {
        let entry = |w, c| WarmthScores {
            warmth: w,
            sociability: 0.5,
            trust: 0.5,
            competence: c,
            arousal: 0.5,
        };
        WarmthLexicon::from_entries([
            ("bad", entry(0.1, 0.3)),
            ("dangerous", entry(0.15, 0.5)),
            ("kind", entry(0.9, 0.6)),
            ("weak", entry(0.5, 0.1)),
        ])
    }

    #[test]
    fn single_low_word() {
        let spec = top_k_low_words(
            ["bad day bad outcome"],
            &wlex(),
            StanceLabel::Against,
            LowDimension::LowWarmth,
            1.0 / 3.0,
            15,
            false,
        )
        .unwrap();
        assert_eq!(spec.entries, vec![("bad".to_string(), 2)]);
    }

    #[test]
    fn high_warmth_word_never_included() {
        let spec = top_k_low_words(
            ["kind kind kind bad"],
            &wlex(),
            StanceLabel::Favor,
            LowDimension::LowWarmth,
            1.0 / 3.0,
            15,
            false,
        )
        .unwrap();
        assert!(spec.entries.iter().all(|(w, _)| w != "kind"));
    }

    #[test]
    fn ranking_and_tiebreak() {
        // dangerous x2, bad x2 -> alphabetical tie, then weak (low comp only)
        let spec = top_k_low_words(
            ["bad dangerous", "dangerous bad"],
            &wlex(),
            StanceLabel::Against,
            LowDimension::LowWarmth,
            1.0 / 3.0,
            15,
            false,
        )
        .unwrap();
        assert_eq!(
            spec.entries,
            vec![("bad".to_string(), 2), ("dangerous".to_string(), 2)]
        );
    }

    #[test]
    fn hand_ranked_synthetic_subset() {
        // 20 tokens; low-competence words are `weak` (comp .1) and `bad`
        // (comp .3); frequencies by hand: weak 3, bad 2
        let texts = [
            "weak weak bad kind kind",
            "weak bad kind dangerous kind",
            "kind kind kind kind kind kind kind kind kind kind",
        ];
        let spec = top_k_low_words(
            texts,
            &wlex(),
            StanceLabel::Neutral,
            LowDimension::LowCompetence,
            1.0 / 3.0,
            2,
            false,
        )
        .unwrap();
        assert_eq!(
            spec.entries,
            vec![("weak".to_string(), 3), ("bad".to_string(), 2)]
        );
    }

    #[test]
    fn post_weighting_counts_once_per_post() {
        let spec = top_k_low_words(
            ["bad bad bad", "bad"],
            &wlex(),
            StanceLabel::Against,
            LowDimension::LowWarmth,
            1.0 / 3.0,
            15,
            true,
        )
        .unwrap();
        assert_eq!(spec.entries, vec![("bad".to_string(), 2)]);
    }

    #[test]
    fn empty_subset_is_empty_spec() {
        let spec = top_k_low_words(
            std::iter::empty::<&str>(),
            &wlex(),
            StanceLabel::Favor,
            LowDimension::LowWarmth,
            0.5,
            15,
            false,
        )
        .unwrap();
        assert!(spec.entries.is_empty());
    }

    #[test]
    fn manifest_lists_sorted_checksums() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "bbb").unwrap();
        std::fs::write(dir.path().join("a.txt"), "aaa").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/c.txt"), "ccc").unwrap();
        let manifest = write_manifest(dir.path()).unwrap();
        let paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, vec!["a.txt", "b.txt", "sub/c.txt"]);
        assert_eq!(manifest.files[0].sha256, sha256_hex(b"aaa"));
        // manifest.json itself is not listed
        let again = build_manifest(dir.path()).unwrap();
        assert_eq!(again.files.len(), 3);
    }
}
