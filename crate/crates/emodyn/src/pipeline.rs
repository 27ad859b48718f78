//! Stage orchestration. Stages communicate only through files so they can
//! be run independently or via `all`, which skips any stage whose output
//! directory already carries a manifest.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::embed::{EmbeddingProvider, HttpEmbeddingProvider, MockEmbeddingProvider};
use crate::corpus::{self, IngestOptions};
use crate::dynamics::{self, BinDensity, HomeBase1D, HomeBase2D, MonthlyWarmth};
use crate::error::PipelineError;
use crate::lexicon::{
    load_emotion_lexicon, load_exclusions, load_warmth_lexicon, EmotionLexicon, WarmthDimension,
    WarmthLexicon,
};
use crate::report::{
    self, render_ellipses, render_timeseries, render_treemap, LowDimension, Series,
};
use crate::stance::endpoint::{ChatEndpoint, ClassifyOptions, HttpChatEndpoint, MockChatEndpoint};
use crate::stance::{self, StanceLabel, StanceRecord};
use crate::stats;

/// Shipped three-way stance instruction; `{target}` and `{text}` are
/// substituted at request time.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "Read the social media post below and infer the \
stance of its author towards {target}. Answer with exactly one of: \"favor\", \"against\", or \
\"neither of the two inferences can be reasonably made\".\n\nPost: {text}";

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are a careful annotator. Answer with only the requested label.";

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Report(report::ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, content: &str) -> Result<(), PipelineError> {
    std::fs::write(path, content).map_err(|e| io_err(path, e))
}

fn freeze_config(config: &RunConfig, dir: &Path) -> Result<(), PipelineError> {
    write_text(&dir.join("config.frozen"), &config.to_frozen_string())
}

fn emotion_lexicon_path(config: &RunConfig) -> PathBuf {
    config
        .emotion_lexicon
        .clone()
        .unwrap_or_else(|| config.lexicon_dir.join("emotion.tsv"))
}

fn warmth_lexicon_path(config: &RunConfig) -> PathBuf {
    config
        .warmth_lexicon
        .clone()
        .unwrap_or_else(|| config.lexicon_dir.join("warmth.csv"))
}

fn load_lexicons(config: &RunConfig) -> Result<(EmotionLexicon, WarmthLexicon), PipelineError> {
    let mut exclusions = std::collections::HashSet::new();
    for path in &config.exclusions {
        exclusions.extend(load_exclusions(path)?);
    }
    let elex = load_emotion_lexicon(&emotion_lexicon_path(config), &exclusions)?;
    let wlex = load_warmth_lexicon(&warmth_lexicon_path(config), &exclusions)?;
    Ok((elex, wlex))
}

fn embedding_provider(config: &RunConfig) -> Box<dyn EmbeddingProvider> {
    if config.embedding_provider == "mock" {
        Box::new(MockEmbeddingProvider::new())
    } else {
        Box::new(HttpEmbeddingProvider::new(config.embedding_provider.clone()))
    }
}

fn chat_endpoint(config: &RunConfig) -> Box<dyn ChatEndpoint> {
    if config.stance_endpoint == "mock" {
        Box::new(MockChatEndpoint)
    } else {
        Box::new(HttpChatEndpoint::new(
            config.stance_endpoint.clone(),
            config.stance_model.clone(),
            config.stance_api_key.clone(),
        ))
    }
}

pub fn analysis_dir(config: &RunConfig) -> PathBuf {
    config.out_dir.join("analysis")
}

pub fn stance_dir(config: &RunConfig) -> PathBuf {
    config.out_dir.join("stance")
}

pub fn report_dir(config: &RunConfig) -> PathBuf {
    config.out_dir.join("report")
}

/// Preprocess the raw input into the canonical corpus directory.
pub fn ingest_stage(config: &RunConfig) -> Result<corpus::CorpusSummary, PipelineError> {
    let input = config.input.as_ref().ok_or(PipelineError::Config(
        crate::config::ConfigError::Missing("input"),
    ))?;
    let provider = embedding_provider(config);
    let opts = IngestOptions {
        anchor: config.filter_anchor.clone(),
        threshold: config.filter_threshold,
        provider: provider.as_ref(),
        filter_order: config.filter_order,
        batch_size: config.embedding_batch_size,
        retries: config.embedding_retries,
        ascii_emoticons: Vec::new(),
    };
    let summary = corpus::ingest(input, &config.corpus_dir, &opts)?;
    freeze_config(config, &config.corpus_dir)?;
    report::write_manifest(&config.corpus_dir)?;
    Ok(summary)
}

/// Per-era emotional summary in `home_base.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraHomeBase {
    pub n_months: usize,
    pub warmth_band: HomeBase1D,
    pub competence_band: HomeBase1D,
    pub ellipse: HomeBase2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeBaseReport {
    pub alpha: f64,
    pub split: String,
    pub pre: EraHomeBase,
    pub covid: EraHomeBase,
}

fn era_home_base(
    months: &[MonthlyWarmth],
    competence: &[MonthlyWarmth],
    alpha: f64,
) -> Result<EraHomeBase, PipelineError> {
    let w: Vec<f64> = months.iter().map(|m| m.mean).collect();
    let c: Vec<f64> = competence.iter().map(|m| m.mean).collect();
    let points: Vec<(f64, f64)> = w.iter().copied().zip(c.iter().copied()).collect();
    Ok(EraHomeBase {
        n_months: points.len(),
        warmth_band: dynamics::home_base_1d(&w, alpha)?,
        competence_band: dynamics::home_base_1d(&c, alpha)?,
        ellipse: dynamics::home_base_2d(&points, alpha)?,
    })
}

fn densities_csv(bins: &[BinDensity]) -> String {
    let mut out = String::from("month,category,emotion_word_count,token_total,density\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            b.bin, b.category, b.emotion_word_count, b.token_total, b.density
        ));
    }
    out
}

fn warmth_csv(series: &[MonthlyWarmth]) -> String {
    let mut out = String::from("month,dimension,mean,n\n");
    for m in series {
        out.push_str(&format!("{},{},{},{}\n", m.bin, m.dimension, m.mean, m.n));
    }
    out
}

/// Score the corpus, aggregate by month, and write the analysis tables.
pub fn analyze_stage(config: &RunConfig) -> Result<(), PipelineError> {
    let corpus_path = corpus::corpus_file(&config.corpus_dir);
    let posts = corpus::read_corpus(&corpus_path)?;
    let (elex, wlex) = load_lexicons(config)?;
    let out = analysis_dir(config);
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let acc = dynamics::aggregate_stream(
        posts.iter().map(|p| (p.month(), p.text.clone())),
        &elex,
        &wlex,
    );

    let bins = acc.all_densities();
    write_text(&out.join("monthly_densities.csv"), &densities_csv(&bins))?;

    let mut warmth_rows = Vec::new();
    for dim in [
        WarmthDimension::Warmth,
        WarmthDimension::Sociability,
        WarmthDimension::Trust,
        WarmthDimension::Competence,
    ] {
        warmth_rows.extend(acc.warmth_series(dim, config.warmth_series_mode));
    }
    write_text(&out.join("monthly_warmth.csv"), &warmth_csv(&warmth_rows))?;

    // home base per era from monthly (warmth, competence) means
    let split_month = config.era_split.format("%Y-%m").to_string();
    let warmth = acc.warmth_series(WarmthDimension::Warmth, config.warmth_series_mode);
    let competence = acc.warmth_series(WarmthDimension::Competence, config.warmth_series_mode);
    let split_idx = warmth.partition_point(|m| m.bin < split_month);
    let home = HomeBaseReport {
        alpha: config.alpha,
        split: config.era_split.format("%Y-%m-%d").to_string(),
        pre: era_home_base(&warmth[..split_idx], &competence[..split_idx], config.alpha)?,
        covid: era_home_base(&warmth[split_idx..], &competence[split_idx..], config.alpha)?,
    };
    let home_json = serde_json::to_string_pretty(&home).expect("home base serializes");
    write_text(&out.join("home_base.json"), &(home_json + "\n"))?;

    // era comparison table
    let comparisons = dynamics::era_compare(&bins, config.era_split)?;
    let mut table = String::from(
        "category,pre_mean,pre_sd,covid_mean,covid_sd,pct_change,p_value,significant_at_0.05,significant_at_0.001\n",
    );
    for cmp in &comparisons {
        let test = stats::mann_whitney(&cmp.pre.densities, &cmp.post.densities)?;
        // a category absent before the split has no defined percent change
        let pct = match stats::percent_change(cmp.pre.mean, cmp.post.mean) {
            Ok(pct) => pct.to_string(),
            Err(_) => {
                log::warn!("category {}: zero pre-era mean, percent change undefined", cmp.category);
                String::new()
            }
        };
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cmp.category,
            cmp.pre.mean,
            cmp.pre.sd,
            cmp.post.mean,
            cmp.post.sd,
            pct,
            test.p_value,
            test.p_value < 0.05,
            test.p_value < 0.001,
        ));
    }
    write_text(&out.join("era_report.csv"), &table)?;

    freeze_config(config, &out)?;
    report::write_manifest(&out)?;
    Ok(())
}

fn load_gold_labels(path: &Path) -> Result<HashMap<String, StanceLabel>, PipelineError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| {
        PipelineError::Stance(stance::StanceError::GoldLabels {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    })?;
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            PipelineError::Stance(stance::StanceError::GoldLabels {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        })?;
        let id = row.get(0).unwrap_or("").to_string();
        let raw = row.get(1).unwrap_or("");
        let label = raw.parse::<StanceLabel>().map_err(|_| {
            PipelineError::Stance(stance::StanceError::GoldLabels {
                path: path.display().to_string(),
                reason: format!("unknown label `{raw}` for post {id}"),
            })
        })?;
        out.insert(id, label);
    }
    Ok(out)
}

fn proportions_csv(rows: &[stance::MonthlyStance]) -> String {
    let mut out = String::from("month,n_sampled,favor_frac,against_frac,neutral_frac\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.month, r.n_sampled, r.favor_frac, r.against_frac, r.neutral_frac
        ));
    }
    out
}

/// Sample per month, classify, and write stance records plus the monthly
/// proportion table (and the evaluation report when gold labels exist).
pub fn stance_stage(config: &RunConfig) -> Result<(), PipelineError> {
    let corpus_path = corpus::corpus_file(&config.corpus_dir);
    let posts = corpus::read_corpus(&corpus_path)?;
    let out = stance_dir(config);
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let sampled = stance::sample_monthly(&posts, config.stance_per_month, config.seed)?;
    let template = match &config.prompt_template {
        Some(path) => std::fs::read_to_string(path).map_err(|e| io_err(path, e))?,
        None => DEFAULT_PROMPT_TEMPLATE.to_string(),
    };
    let endpoint = chat_endpoint(config);
    let checkpoint = out.join("classify_log.jsonl");
    let opts = ClassifyOptions {
        template,
        system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
        target: config.stance_target.clone(),
        temperature: config.stance_temperature,
        run_id: format!("run-{}", config.seed),
        concurrency: config.stance_concurrency,
        retries: config.stance_retries,
        checkpoint: Some(checkpoint.clone()),
    };
    let outcome = stance::endpoint::classify(&sampled, endpoint.as_ref(), &opts)?;
    // the run log only matters for resuming an aborted run
    let _ = std::fs::remove_file(&checkpoint);

    corpus::write_jsonl(&out.join("stance_records.jsonl"), &outcome.records)?;
    if !outcome.parse_failures.is_empty() {
        log::warn!("{} responses could not be mapped to a label", outcome.parse_failures.len());
        corpus::write_jsonl(&out.join("parse_failures.jsonl"), &outcome.parse_failures)?;
    }

    let months: HashMap<String, String> =
        sampled.iter().map(|p| (p.id.clone(), p.month())).collect();
    let rows = stance::monthly_proportions(&outcome.records, &months);
    write_text(
        &out.join("monthly_stance_proportions.csv"),
        &proportions_csv(&rows),
    )?;

    if let Some(gold_path) = &config.gold_labels {
        let gold = load_gold_labels(gold_path)?;
        let predictions: HashMap<String, StanceLabel> = outcome
            .records
            .iter()
            .filter(|r| gold.contains_key(&r.post_id))
            .map(|r| (r.post_id.clone(), r.label))
            .collect();
        let eval = stance::evaluate(&predictions, &gold)?;
        let json = serde_json::to_string_pretty(&eval).expect("report serializes");
        write_text(&out.join("classification_report.json"), &(json + "\n"))?;
    }

    freeze_config(config, &out)?;
    report::write_manifest(&out)?;
    Ok(())
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| {
        io_err(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
        )
    })?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            io_err(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
            )
        })?;
        out.push(row.iter().map(|s| s.to_string()).collect());
    }
    Ok(out)
}

fn copy_into(src: &Path, dst_dir: &Path) -> Result<(), PipelineError> {
    let name = src.file_name().expect("file name");
    std::fs::copy(src, dst_dir.join(name)).map_err(|e| io_err(src, e))?;
    Ok(())
}

fn rolled_or_raw(values: &[f64], config: &RunConfig) -> Option<Vec<f64>> {
    if values.len() < config.rolling_window {
        return None;
    }
    let rolled = if config.rolling_centered {
        dynamics::rolling_mean_centered(values, config.rolling_window)
    } else {
        dynamics::rolling_mean(values, config.rolling_window)
    };
    rolled.ok()
}

/// Render charts from a finished analysis directory (plus the stance
/// directory next to it, when present). Every chart sits beside a copy of
/// the data file it was drawn from.
pub fn report_stage(config: &RunConfig, from: &Path, out: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    // emotion-density chart
    let densities_path = from.join("monthly_densities.csv");
    let rows = read_csv_rows(&densities_path)?;
    let mut months: Vec<String> = Vec::new();
    let mut by_category: std::collections::BTreeMap<String, HashMap<String, f64>> =
        std::collections::BTreeMap::new();
    for row in &rows {
        if !months.contains(&row[0]) {
            months.push(row[0].clone());
        }
        by_category
            .entry(row[1].clone())
            .or_default()
            .insert(row[0].clone(), row[4].parse().unwrap_or(0.0));
    }
    months.sort();
    let density_series: Vec<Series> = by_category
        .iter()
        .map(|(category, values)| {
            let raw: Vec<f64> = months
                .iter()
                .map(|m| values.get(m).copied().unwrap_or(0.0))
                .collect();
            let rolled = rolled_or_raw(&raw, config);
            Series {
                label: category.clone(),
                values: raw,
                rolled,
            }
        })
        .collect();
    render_timeseries(
        "monthly emotion-word density",
        &months,
        &density_series,
        &out.join("emotion_density.svg"),
    )?;
    copy_into(&densities_path, out)?;

    // warmth/competence chart
    let warmth_path = from.join("monthly_warmth.csv");
    let rows = read_csv_rows(&warmth_path)?;
    let mut by_dim: std::collections::BTreeMap<String, HashMap<String, f64>> =
        std::collections::BTreeMap::new();
    for row in &rows {
        by_dim
            .entry(row[1].clone())
            .or_default()
            .insert(row[0].clone(), row[2].parse().unwrap_or(0.0));
    }
    let warmth_series: Vec<Series> = by_dim
        .iter()
        .map(|(dim, values)| {
            let raw: Vec<f64> = months
                .iter()
                .map(|m| values.get(m).copied().unwrap_or(0.0))
                .collect();
            let rolled = rolled_or_raw(&raw, config);
            Series {
                label: dim.clone(),
                values: raw,
                rolled,
            }
        })
        .collect();
    render_timeseries(
        "monthly warmth dimensions",
        &months,
        &warmth_series,
        &out.join("warmth_series.svg"),
    )?;
    copy_into(&warmth_path, out)?;

    // home-base ellipses
    let home_path = from.join("home_base.json");
    let home_raw = std::fs::read_to_string(&home_path).map_err(|e| io_err(&home_path, e))?;
    let home: HomeBaseReport = serde_json::from_str(&home_raw).map_err(|e| {
        io_err(
            &home_path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        )
    })?;
    render_ellipses(
        &[
            ("pre".to_string(), home.pre.ellipse.clone()),
            ("covid".to_string(), home.covid.ellipse.clone()),
        ],
        &out.join("home_base.svg"),
    )?;
    copy_into(&home_path, out)?;
    copy_into(&from.join("era_report.csv"), out)?;

    // stance outputs, when the stance stage has run
    let sdir = from
        .parent()
        .map(|p| p.join("stance"))
        .unwrap_or_else(|| PathBuf::from("stance"));
    let props_path = sdir.join("monthly_stance_proportions.csv");
    if props_path.exists() {
        let rows = read_csv_rows(&props_path)?;
        let stance_months: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
        let series: Vec<Series> = [
            ("favor", 2usize),
            ("against", 3),
            ("neutral", 4),
        ]
        .iter()
        .map(|(label, col)| {
            let raw: Vec<f64> = rows.iter().map(|r| r[*col].parse().unwrap_or(0.0)).collect();
            let rolled = rolled_or_raw(&raw, config);
            Series {
                label: label.to_string(),
                values: raw,
                rolled,
            }
        })
        .collect();
        render_timeseries(
            "monthly stance proportions",
            &stance_months,
            &series,
            &out.join("stance_proportions.svg"),
        )?;
        copy_into(&props_path, out)?;
    }

    // treemaps need the corpus texts and the per-post stance labels
    let records_path = sdir.join("stance_records.jsonl");
    let corpus_path = corpus::corpus_file(&config.corpus_dir);
    if records_path.exists() && corpus_path.exists() {
        let posts = corpus::read_corpus(&corpus_path)?;
        let texts: HashMap<&str, &str> = posts
            .iter()
            .map(|p| (p.id.as_str(), p.text.as_str()))
            .collect();
        let records = read_stance_records(&records_path)?;
        let (_, wlex) = load_lexicons(config)?;
        for label in [StanceLabel::Favor, StanceLabel::Against, StanceLabel::Neutral] {
            let subset: Vec<&str> = records
                .iter()
                .filter(|r| r.label == label)
                .filter_map(|r| texts.get(r.post_id.as_str()).copied())
                .collect();
            for dimension in [LowDimension::LowWarmth, LowDimension::LowCompetence] {
                let spec = report::top_k_low_words(
                    subset.iter().copied(),
                    &wlex,
                    label,
                    dimension,
                    config.low_score_threshold,
                    config.treemap_k,
                    config.treemap_weight_by_posts,
                )?;
                let stem = format!("treemap_{}_{}", label.as_str(), dimension.as_str());
                let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
                write_text(&out.join(format!("{stem}.json")), &(json + "\n"))?;
                render_treemap(&spec, &out.join(format!("{stem}.svg")))?;
            }
        }
    }

    freeze_config(config, out)?;
    report::write_manifest(out)?;
    Ok(())
}

fn read_stance_records(path: &Path) -> Result<Vec<StanceRecord>, PipelineError> {
    let raw = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let record: StanceRecord = serde_json::from_str(line).map_err(|e| {
            io_err(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        out.push(record);
    }
    Ok(out)
}

fn stage_done(dir: &Path) -> bool {
    dir.join("manifest.json").exists()
}

/// Run every stage in order, skipping stages whose output directory
/// already carries a manifest.
pub fn run_all(config: &RunConfig) -> Result<(), PipelineError> {
    if stage_done(&config.corpus_dir) {
        log::info!("ingest already complete, skipping");
    } else {
        ingest_stage(config)?;
    }
    let adir = analysis_dir(config);
    if stage_done(&adir) {
        log::info!("analyze already complete, skipping");
    } else {
        analyze_stage(config)?;
    }
    let sdir = stance_dir(config);
    if stage_done(&sdir) {
        log::info!("stance already complete, skipping");
    } else {
        stance_stage(config)?;
    }
    let rdir = report_dir(config);
    if stage_done(&rdir) {
        log::info!("report already complete, skipping");
    } else {
        report_stage(config, &adir, &rdir)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn synthetic_corpus(dir: &Path) -> PathBuf {
        // 8 users x 30 months x a few posts, cue words so both the mock
        // embedder and mock stance endpoint have signal
        let path = dir.join("raw.jsonl");
        let mut lines = Vec::new();
        let texts = [
            "so grateful the vaccine kept my family safe and protected",
            "this mandate is dangerous and forced on us, total hoax",
            "got my shot today, queue was long",
            "reading about vaccines and feeling unsure",
            "love that boosters are effective, science wins",
            "refuse the poison, my body my choice",
        ];
        let mut i = 0u32;
        for year in 2018..2021u32 {
            for month in 1..=10u32 {
                // vary the text mix per month so monthly means are not
                // constant across bins
                for user in 0..6u32 {
                    i += 1;
                    let ts = Utc
                        .with_ymd_and_hms(year as i32, month, (user % 27) + 1, 10, 0, 0)
                        .unwrap();
                    let t = ((year * 31 + month * 7 + user * user * 13) % 6) as usize;
                    lines.push(format!(
                        "{{\"id\":\"p{i:04}\",\"user_id\":\"u{user}\",\"created_at\":\"{}\",\"text\":\"{}\"}}",
                        ts.to_rfc3339(),
                        texts[t],
                    ));
                }
            }
        }
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    fn fixture_lexicons(dir: &Path) -> (PathBuf, PathBuf) {
        let elex = dir.join("emotion.tsv");
        std::fs::write(
            &elex,
            "grateful\tjoy\t1\ngrateful\tpositive\t1\nsafe\ttrust\t1\ndangerous\tfear\t1\n\
             hoax\tanger\t1\nhoax\tnegative\t1\nlove\tjoy\t1\npoison\tdisgust\t1\n\
             unsure\tanticipation\t1\nlong\tsadness\t0\nshot\tsurprise\t1\n",
        )
        .unwrap();
        let wlex = dir.join("warmth.csv");
        std::fs::write(
            &wlex,
            "word,warmth,sociability,trust,competence,arousal\n\
             grateful,0.9,0.8,0.85,0.6,0.4\n\
             safe,0.8,0.6,0.9,0.7,0.2\n\
             dangerous,0.2,0.3,0.1,0.4,0.9\n\
             hoax,0.1,0.2,0.05,0.2,0.7\n\
             love,0.95,0.9,0.8,0.5,0.6\n\
             poison,0.05,0.1,0.05,0.3,0.8\n\
             forced,0.15,0.2,0.1,0.5,0.7\n\
             effective,0.6,0.5,0.7,0.9,0.3\n",
        )
        .unwrap();
        (elex, wlex)
    }

    fn test_config(root: &Path) -> RunConfig {
        let input = synthetic_corpus(root);
        let (elex, wlex) = fixture_lexicons(root);
        let mut config = RunConfig::default();
        config.input = Some(input);
        config.corpus_dir = root.join("out/corpus");
        config.out_dir = root.join("out");
        config.emotion_lexicon = Some(elex);
        config.warmth_lexicon = Some(wlex);
        config.stance_per_month = 4;
        config.stance_concurrency = 2;
        config
    }

    #[test]
    fn all_stages_produce_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        run_all(&config).unwrap();
        for sub in ["corpus", "analysis", "stance", "report"] {
            let d = config.out_dir.join(sub);
            assert!(d.join("manifest.json").exists(), "{sub} manifest missing");
            assert!(d.join("config.frozen").exists(), "{sub} frozen config missing");
        }
        assert!(config.out_dir.join("analysis/monthly_densities.csv").exists());
        assert!(config.out_dir.join("analysis/era_report.csv").exists());
        assert!(config.out_dir.join("analysis/home_base.json").exists());
        assert!(config.out_dir.join("stance/stance_records.jsonl").exists());
        assert!(config
            .out_dir
            .join("stance/monthly_stance_proportions.csv")
            .exists());
        assert!(config.out_dir.join("report/emotion_density.svg").exists());
        assert!(config.out_dir.join("report/home_base.svg").exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let c1 = test_config(d1.path());
        let c2 = test_config(d2.path());
        run_all(&c1).unwrap();
        run_all(&c2).unwrap();
        for sub in ["analysis", "stance", "report"] {
            let m1 = std::fs::read_to_string(c1.out_dir.join(sub).join("manifest.json")).unwrap();
            let m2 = std::fs::read_to_string(c2.out_dir.join(sub).join("manifest.json")).unwrap();
            assert_eq!(m1, m2, "{sub} manifests differ between identical runs");
        }
    }

    #[test]
    fn all_skips_completed_stages() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        run_all(&config).unwrap();
        let marker = config.out_dir.join("analysis/monthly_densities.csv");
        let before = std::fs::metadata(&marker).unwrap().modified().unwrap();
        run_all(&config).unwrap();
        let after = std::fs::metadata(&marker).unwrap().modified().unwrap();
        assert_eq!(before, after, "completed stage was re-run");
    }

    #[test]
    fn missing_input_is_config_error() {
        let config = RunConfig::default();
        let err = ingest_stage(&config).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Config);
    }

    #[test]
    fn era_report_has_expected_columns() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        ingest_stage(&config).unwrap();
        analyze_stage(&config).unwrap();
        let table =
            std::fs::read_to_string(config.out_dir.join("analysis/era_report.csv")).unwrap();
        let header = table.lines().next().unwrap();
        assert_eq!(
            header,
            "category,pre_mean,pre_sd,covid_mean,covid_sd,pct_change,p_value,significant_at_0.05,significant_at_0.001"
        );
        assert!(table.lines().count() > 1);
    }
}
