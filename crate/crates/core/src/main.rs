//! Command-line driver for the clustering toolkit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tweetclust::config::{apply_overrides, parse_config_text, ConfigError, PipelineConfig};
use tweetclust::corpus::{load_corpus, save_corpus, synth_corpus};
use tweetclust::fuzzymatch::{build_ground_truth, load_topics, match_corpus};
use tweetclust::pipeline::{
    cmd_compare, cmd_cpcc_scan, cmd_pipeline, pool_from_runs, PipelineError,
};
use tweetclust::tweet2vec::{save_model, train, TrainConfig};

#[derive(Parser)]
#[command(name = "tweetclust", version, about = "Short-text clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run corpus -> representation -> clustering -> reports end to end.
    Pipeline {
        /// Flat key=value config file.
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. --set seed=7 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Cophenetic correlation for all 3 metrics x 4 linkage methods.
    CpccScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Compare two finished runs over the same corpus, metric by metric.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the JSON report here in addition to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an anonymized evaluation pool to this directory.
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Alias shuffle seed for the evaluation pool.
        #[arg(long, default_value_t = 0)]
        pool_seed: u64,
    },
    /// Generate a synthetic corpus with planted topics.
    Synth {
        #[arg(long, default_value_t = 20)]
        topics: usize,
        #[arg(long = "per-topic", default_value_t = 20)]
        per_topic: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long = "hashtag-rate", default_value_t = 1.0)]
        hashtag_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-corpus")]
        out_corpus: PathBuf,
        #[arg(long = "out-truth")]
        out_truth: Option<PathBuf>,
    },
    /// Train the character GRU encoder and write a checkpoint.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        hidden: usize,
        #[arg(long, default_value_t = 64)]
        embed: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 5.0)]
        clip: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "min-char-freq", default_value_t = 2)]
        min_char_freq: usize,
        #[arg(long = "min-hashtag-freq", default_value_t = 5)]
        min_hashtag_freq: usize,
    },
    /// Label a corpus by fuzzy-matching topic strings.
    GroundTruth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    /// Bad config or usage: exit 2.
    Config(String),
    /// Everything else: exit 1.
    Runtime(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(path: &Path, overrides: &[String]) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = parse_config_text(&text)?;
    apply_overrides(&mut map, overrides)?;
    Ok(PipelineConfig::from_map(&map)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Pipeline { config, set } => {
            let cfg = load_config(&config, &set)?;
            let outcomes = cmd_pipeline(&cfg)?;
            for o in &outcomes {
                let chosen = &o.report.points[o
                    .report
                    .chosen_supervised
                    .or(o.report.chosen_unsupervised)
                    .unwrap_or(o.report.points.len() - 1)];
                println!(
                    "{}: threshold {:.2}, {} clusters, {} garbage, V {}, silhouette {}",
                    o.interval,
                    o.chosen_threshold,
                    chosen.n_clusters,
                    o.n_garbage,
                    chosen.v_measure.map_or_else(|| "NA".into(), |v| format!("{v:.4}")),
                    chosen.silhouette.map_or_else(|| "NA".into(), |v| format!("{v:.4}")),
                );
            }
            println!("artifacts in {}", cfg.out.display());
            Ok(())
        }
        Cmd::CpccScan { config, set } => {
            let cfg = load_config(&config, &set)?;
            let table = cmd_cpcc_scan(&cfg)?;
            println!("metric\tmethod\tcpcc");
            for row in &table {
                println!("{}\t{}\t{:.6}", row.metric, row.method, row.cpcc);
            }
            Ok(())
        }
        Cmd::Compare { a, b, out, pool, pool_seed } => {
            let report = cmd_compare(&a, &b)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("interval\tmetric\ta\tb\twinner");
            for interval in &report.intervals {
                for cell in &interval.cells {
                    println!(
                        "{}\t{}\t{}\t{}\t{}",
                        interval.interval,
                        cell.metric,
                        cell.a.map_or_else(|| "NA".into(), |v| format!("{v:.4}")),
                        cell.b.map_or_else(|| "NA".into(), |v| format!("{v:.4}")),
                        cell.winner.as_deref().unwrap_or("-"),
                    );
                }
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
                std::fs::write(&path, text + "\n").map_err(runtime)?;
            }
            if let Some(dir) = pool {
                std::fs::create_dir_all(&dir).map_err(runtime)?;
                pool_from_runs(
                    &[a.as_path(), b.as_path()],
                    pool_seed,
                    &dir.join("eval_pool.jsonl"),
                    &dir.join("decode.jsonl"),
                )?;
                println!("evaluation pool in {}", dir.display());
            }
            Ok(())
        }
        Cmd::Synth { topics, per_topic, noise, hashtag_rate, seed, out_corpus, out_truth } => {
            if !(0.0..=1.0).contains(&noise) || !(0.0..=1.0).contains(&hashtag_rate) {
                return Err(CliError::Config(
                    "noise and hashtag-rate must lie in [0, 1]".to_string(),
                ));
            }
            let (corpus, truth) = synth_corpus(topics, per_topic, noise, hashtag_rate, seed);
            save_corpus(&corpus, &out_corpus).map_err(runtime)?;
            if let Some(path) = out_truth {
                truth.save(&path).map_err(runtime)?;
            }
            println!("wrote {} tweets to {}", corpus.len(), out_corpus.display());
            Ok(())
        }
        Cmd::Train {
            input,
            out,
            hidden,
            embed,
            batch,
            epochs,
            lr,
            clip,
            seed,
            min_char_freq,
            min_hashtag_freq,
        } => {
            let corpus = load_corpus(&input, &[]).map_err(runtime)?;
            let cfg = TrainConfig {
                hidden,
                embed,
                batch,
                epochs,
                lr,
                clip,
                seed,
                min_char_freq,
                min_hashtag_freq,
            };
            let outcome = train(&corpus, &cfg).map_err(runtime)?;
            for (epoch, loss) in outcome.loss_history.iter().enumerate() {
                println!("epoch {}\tloss {:.6}", epoch + 1, loss);
            }
            save_model(&outcome.model, &out).map_err(runtime)?;
            println!(
                "saved model ({} labels, h={}) to {}",
                outcome.model.n_labels(),
                hidden,
                out.display()
            );
            Ok(())
        }
        Cmd::GroundTruth { input, topics, threshold, out } => {
            let corpus = load_corpus(&input, &[]).map_err(runtime)?;
            let topic_strings = load_topics(&topics).map_err(runtime)?;
            let matches = match_corpus(&topic_strings, &corpus, threshold);
            let truth = build_ground_truth(&topic_strings, &corpus, threshold);
            truth.save(&out).map_err(runtime)?;
            let mut per_topic: BTreeMap<usize, usize> = BTreeMap::new();
            for m in &matches {
                *per_topic.entry(m.topic_id).or_insert(0) += 1;
            }
            for (topic, count) in &per_topic {
                println!("{}\t{count}", topic_strings[*topic]);
            }
            println!(
                "labeled {} of {} tweets ({} topics)",
                matches.len(),
                corpus.len(),
                topic_strings.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
