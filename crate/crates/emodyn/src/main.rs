use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emodyn::config::RunConfig;
use emodyn::pipeline;
use emodyn::PipelineError;

/// Corpus emotion-dynamics toolkit: preprocess a post corpus, score it
/// against emotion and warmth lexicons, compute home-base and variability
/// metrics, classify stance, and render the report artifacts.
#[derive(Parser)]
#[command(name = "emodyn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Config file (`key = value` lines); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, dedup, and filter a raw JSONL post file into a corpus
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Raw JSONL input file
        #[arg(long)]
        input: Option<PathBuf>,
        /// Anchor phrase for the off-topic similarity filter
        #[arg(long)]
        filter_anchor: Option<String>,
        /// Posts with similarity >= this to the anchor are removed
        #[arg(long)]
        filter_threshold: Option<f64>,
    },
    /// Score the corpus and compute monthly densities, home bases, and the
    /// era comparison table
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Corpus directory written by `ingest`
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory holding the lexicon files
        #[arg(long)]
        lexicons: Option<PathBuf>,
        /// Time bin (only `month` is supported)
        #[arg(long, default_value = "month")]
        bin: String,
        /// Rolling-average window in bins
        #[arg(long)]
        rolling: Option<usize>,
        /// Home-base confidence level parameter
        #[arg(long)]
        alpha: Option<f64>,
        /// Era split date (YYYY-MM-DD)
        #[arg(long)]
        split: Option<String>,
    },
    /// Sample posts per month and classify stance toward the target
    Stance {
        #[command(flatten)]
        common: Common,
        /// Corpus directory written by `ingest`
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Posts sampled per calendar month
        #[arg(long)]
        per_month: Option<usize>,
        /// Sampling temperature passed to the endpoint
        #[arg(long)]
        temperature: Option<f64>,
        /// Gold label CSV (`post_id,label`) to evaluate against
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Render charts and tables from a finished analysis directory
    Report {
        #[command(flatten)]
        common: Common,
        /// Analysis directory written by `analyze`
        #[arg(long)]
        from: Option<PathBuf>,
        /// Chart format (only `svg` is supported)
        #[arg(long, default_value = "svg")]
        charts: String,
        /// Table format (only `csv` is supported)
        #[arg(long, default_value = "csv")]
        tables: String,
    },
    /// Run ingest, analyze, stance, and report in order, skipping stages
    /// that already have a manifest
    All {
        #[command(flatten)]
        common: Common,
        /// Raw JSONL input file
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn base_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env();
            c
        }
    };
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
        config.corpus_dir = out.join("corpus");
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest {
            common,
            input,
            filter_anchor,
            filter_threshold,
        } => {
            let mut config = base_config(&common)?;
            if let Some(input) = input {
                config.input = Some(input);
            }
            if let Some(anchor) = filter_anchor {
                config.filter_anchor = anchor;
            }
            if let Some(threshold) = filter_threshold {
                config.filter_threshold = threshold;
            }
            config.validate()?;
            let summary = pipeline::ingest_stage(&config)?;
            println!(
                "ingest: {} raw lines, {} kept, {} filtered, {} users",
                summary.raw_lines, summary.after_filter, summary.filtered_out, summary.unique_users
            );
            Ok(())
        }
        Command::Analyze {
            common,
            corpus,
            lexicons,
            bin,
            rolling,
            alpha,
            split,
        } => {
            let mut config = base_config(&common)?;
            if bin != "month" {
                return Err(PipelineError::Config(
                    emodyn::config::ConfigError::BadValue {
                        key: "bin".into(),
                        reason: format!("only `month` is supported, got `{bin}`"),
                    },
                ));
            }
            if let Some(corpus) = corpus {
                config.corpus_dir = corpus;
            }
            if let Some(lexicons) = lexicons {
                config.lexicon_dir = lexicons;
            }
            if let Some(rolling) = rolling {
                config.rolling_window = rolling;
            }
            if let Some(alpha) = alpha {
                config.alpha = alpha;
            }
            if let Some(split) = split {
                config.set("era-split", &split)?;
            }
            config.validate()?;
            pipeline::analyze_stage(&config)?;
            println!("analyze: wrote {}", pipeline::analysis_dir(&config).display());
            Ok(())
        }
        Command::Stance {
            common,
            corpus,
            per_month,
            temperature,
            gold,
        } => {
            let mut config = base_config(&common)?;
            if let Some(corpus) = corpus {
                config.corpus_dir = corpus;
            }
            if let Some(per_month) = per_month {
                config.stance_per_month = per_month;
            }
            if let Some(temperature) = temperature {
                config.stance_temperature = temperature;
            }
            if let Some(gold) = gold {
                config.gold_labels = Some(gold);
            }
            config.validate()?;
            pipeline::stance_stage(&config)?;
            println!("stance: wrote {}", pipeline::stance_dir(&config).display());
            Ok(())
        }
        Command::Report {
            common,
            from,
            charts,
            tables,
        } => {
            let config = base_config(&common)?;
            if charts != "svg" {
                return Err(PipelineError::Config(
                    emodyn::config::ConfigError::BadValue {
                        key: "charts".into(),
                        reason: format!("only `svg` is supported, got `{charts}`"),
                    },
                ));
            }
            if tables != "csv" {
                return Err(PipelineError::Config(
                    emodyn::config::ConfigError::BadValue {
                        key: "tables".into(),
                        reason: format!("only `csv` is supported, got `{tables}`"),
                    },
                ));
            }
            config.validate()?;
            let from = from.unwrap_or_else(|| pipeline::analysis_dir(&config));
            let out = pipeline::report_dir(&config);
            pipeline::report_stage(&config, &from, &out)?;
            println!("report: wrote {}", out.display());
            Ok(())
        }
        Command::All { common, input } => {
            let mut config = base_config(&common)?;
            if let Some(input) = input {
                config.input = Some(input);
            }
            config.validate()?;
            pipeline::run_all(&config)?;
            println!("all: wrote {}", config.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.class().exit_code() as u8)
        }
    }
}
