//! End-to-end driver: corpus -> representation -> clustering -> selection ->
//! reports, plus the linkage scan and the two-run comparison.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig, Representation};
use crate::corpus::{
    load_corpus, save_corpus, synth_corpus, Corpus, CorpusError, GroundTruth, Tweet,
};
use crate::fuzzymatch::{build_ground_truth, load_topics};
use crate::hac::{
    cophenetic_corr, cut, linkage, pairwise_distances, DistanceMatrix, HacError,
    Linkage, Metric,
};
use crate::selection::{
    grid_search, summarize_clusters, ClusterSummary, GridPoint, GridReport, GridTruth, PoolEntry,
};
use crate::tweet2vec::{encode_corpus, load_model, save_model, train, EncoderModel, Tweet2VecError};
use crate::tweetterm::{build_matrix, garbage_rows};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Hac(#[from] HacError),
    #[error(transparent)]
    Tweet2Vec(#[from] Tweet2VecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid artifact {path}: {msg}")]
    BadArtifact { path: PathBuf, msg: String },
    #[error("{0}")]
    Run(String),
}

fn run_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Run(msg.into())
}

/// Loads or synthesizes the corpus named by the config, re-tagging it with
/// the configured intervals, plus ground truth when available.
pub fn prepare_corpus(
    cfg: &PipelineConfig,
) -> Result<(Corpus, Option<GroundTruth>), PipelineError> {
    let (corpus, synth_truth) = match (&cfg.input, &cfg.synth) {
        (Some(path), None) => (load_corpus(path, &cfg.intervals)?, None),
        (None, Some(s)) => {
            let (corpus, truth) =
                synth_corpus(s.topics, s.per_topic, s.noise, s.hashtag_rate, cfg.seed);
            let corpus = Corpus::new(corpus.tweets().to_vec(), cfg.intervals.clone())?;
            (corpus, Some(truth))
        }
        _ => return Err(run_err("config must name exactly one input source")),
    };
    let truth = match &cfg.topics {
        Some(path) => {
            let topics = load_topics(path)?;
            Some(build_ground_truth(&topics, &corpus, cfg.match_threshold))
        }
        None => synth_truth,
    };
    Ok((corpus, truth))
}

/// Representation rows for one set of tweets: the dense matrix over the
/// non-garbage tweets, the kept tweet indices, and the garbage indices.
struct IntervalRows {
    rows: ndarray::Array2<f64>,
    kept: Vec<usize>,
    garbage: Vec<usize>,
}

fn build_rows(
    cfg: &PipelineConfig,
    model: Option<&EncoderModel>,
    tweets: &[&Tweet],
) -> Result<IntervalRows, PipelineError> {
    match cfg.representation {
        Representation::TweetTerm => {
            let owned: Vec<Tweet> = tweets.iter().map(|&t| t.clone()).collect();
            let matrix = build_matrix(&owned, cfg.min_df);
            let garbage = garbage_rows(&matrix);
            let kept: Vec<usize> = (0..tweets.len()).filter(|i| !garbage.contains(i)).collect();
            Ok(IntervalRows {
                rows: matrix.dense_rows(&kept),
                kept,
                garbage: garbage.into_iter().collect(),
            })
        }
        Representation::Tweet2Vec => {
            let model = model.expect("encoder trained before building rows");
            // Tweets that normalize to nothing cannot be encoded; they join
            // the garbage pseudo-cluster like matrix-empty rows do.
            let (kept, garbage): (Vec<usize>, Vec<usize>) =
                (0..tweets.len()).partition(|&i| !tweets[i].norm_text.is_empty());
            let kept_tweets: Vec<&Tweet> = kept.iter().map(|&i| tweets[i]).collect();
            let embeddings = encode_corpus(model, &kept_tweets)?;
            Ok(IntervalRows { rows: embeddings.data, kept, garbage })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct DistanceSummary {
    n: usize,
    metric: String,
    min: f64,
    max: f64,
    mean: f64,
}

fn distance_summary(d: &DistanceMatrix) -> DistanceSummary {
    let c = d.condensed();
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in c {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    DistanceSummary {
        n: d.n(),
        metric: d.metric().to_string(),
        min: if c.is_empty() { 0.0 } else { min },
        max: if c.is_empty() { 0.0 } else { max },
        mean: if c.is_empty() { 0.0 } else { sum / c.len() as f64 },
    }
}

/// Everything the pipeline computes for one interval.
pub struct IntervalOutcome {
    pub interval: String,
    pub report: GridReport,
    pub chosen_threshold: f64,
    /// Per-tweet labels aligned with the interval's tweets; garbage tweets
    /// share the pseudo-cluster label one past the cut labels.
    pub labels: Vec<usize>,
    pub summaries: Vec<ClusterSummary>,
    pub n_garbage: usize,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    out.write_all(b"\n")?;
    Ok(())
}

fn format_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn process_interval(
    cfg: &PipelineConfig,
    model: Option<&EncoderModel>,
    truth: Option<&GroundTruth>,
    name: &str,
    tweets: &[&Tweet],
    dir: &Path,
) -> Result<IntervalOutcome, PipelineError> {
    if tweets.is_empty() {
        return Err(run_err(format!("interval {name} has no tweets")));
    }
    fs::create_dir_all(dir)?;
    let IntervalRows { rows, kept, garbage } = build_rows(cfg, model, tweets)?;
    if kept.len() < 2 {
        return Err(run_err(format!(
            "interval {name}: {} non-garbage tweets is too few to cluster",
            kept.len()
        )));
    }
    let distances = pairwise_distances(rows.view(), cfg.metric)?;
    let dendrogram = linkage(&distances, cfg.method);

    let grid_truth = truth.map(|t| GridTruth {
        row_labels: kept.iter().map(|&i| t.label_of(tweets[i].id.as_str())).collect(),
        garbage_labels: garbage
            .iter()
            .filter_map(|&i| t.label_of(tweets[i].id.as_str()))
            .collect(),
    });
    let report = grid_search(
        &dendrogram,
        &distances,
        grid_truth.as_ref(),
        garbage.len(),
        &cfg.grid,
    );

    // Supervised pick when truth exists, silhouette pick otherwise; fall
    // back to the coarsest threshold if neither is defined.
    let chosen_idx = report
        .chosen_supervised
        .or(report.chosen_unsupervised)
        .unwrap_or(report.points.len() - 1);
    let chosen_threshold = report.points[chosen_idx].threshold;
    let cut_labels = cut(&dendrogram, chosen_threshold);
    let k = cut_labels.iter().max().map_or(0, |&m| m + 1);
    let mut labels = vec![k; tweets.len()];
    for (row, &tweet_idx) in cut_labels.iter().zip(&kept) {
        labels[tweet_idx] = *row;
    }

    let kept_tweets: Vec<&Tweet> = kept.iter().map(|&i| tweets[i]).collect();
    let summaries = summarize_clusters(&cut_labels, &kept_tweets, &distances, cfg.top);

    write_json(&dir.join("distances.json"), &distance_summary(&distances))?;
    let mut dendro_out = BufWriter::new(File::create(dir.join("dendrogram.txt"))?);
    dendrogram.export(&mut dendro_out)?;
    drop(dendro_out);
    write_json(&dir.join("grid.json"), &report.points)?;

    let mut labels_out = BufWriter::new(File::create(dir.join("labels.jsonl"))?);
    for (idx, (tweet, &label)) in tweets.iter().zip(&labels).enumerate() {
        let row = serde_json::json!({
            "id": tweet.id,
            "label": label,
            "garbage": garbage.binary_search(&idx).is_ok(),
        });
        writeln!(labels_out, "{row}")?;
    }
    drop(labels_out);

    write_json(&dir.join("summaries.json"), &summaries)?;

    let metrics = serde_json::json!({
        "interval": name,
        "n_tweets": tweets.len(),
        "n_rows": kept.len(),
        "n_garbage": garbage.len(),
        "supervised_threshold": report.supervised_threshold(),
        "unsupervised_threshold": report.unsupervised_threshold(),
        "chosen_threshold": chosen_threshold,
        "chosen": report.points[chosen_idx],
    });
    write_json(&dir.join("metrics.json"), &metrics)?;

    let mut curve = BufWriter::new(File::create(dir.join("curve.tsv"))?);
    writeln!(curve, "threshold\tv_measure\tsilhouette\tclusters_per_tweet")?;
    for p in &report.points {
        writeln!(
            curve,
            "{:.4}\t{}\t{}\t{:.6}",
            p.threshold,
            format_opt(p.v_measure),
            format_opt(p.silhouette),
            p.n_clusters as f64 / tweets.len() as f64
        )?;
    }
    drop(curve);

    Ok(IntervalOutcome {
        interval: name.to_string(),
        report,
        chosen_threshold,
        labels,
        summaries,
        n_garbage: garbage.len(),
    })
}

/// Interval names to process: the configured ones, or a whole-corpus
/// pseudo-interval when none are configured.
fn interval_names(cfg: &PipelineConfig) -> Vec<Option<String>> {
    if cfg.intervals.is_empty() {
        vec![None]
    } else {
        cfg.intervals.iter().map(|i| Some(i.name.clone())).collect()
    }
}

fn interval_tweets<'a>(corpus: &'a Corpus, name: Option<&'a str>) -> (String, Vec<&'a Tweet>) {
    match name {
        None => ("all".to_string(), corpus.tweets().iter().collect()),
        Some(n) => (n.to_string(), corpus.tweets_in(n).collect()),
    }
}

/// Runs the full pipeline, writing per-interval artifacts under the
/// configured output directory. Intervals are independent and processed in
/// parallel.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<Vec<IntervalOutcome>, PipelineError> {
    fs::create_dir_all(&cfg.out)?;
    let (corpus, truth) = prepare_corpus(cfg)?;
    if cfg.synth.is_some() {
        save_corpus(&corpus, &cfg.out.join("corpus.jsonl"))?;
    }
    if let Some(t) = &truth {
        t.save(&cfg.out.join("truth.jsonl"))?;
    }

    let model = match cfg.representation {
        Representation::TweetTerm => None,
        Representation::Tweet2Vec => Some(match &cfg.model {
            Some(path) => load_model(path)?,
            None => {
                let outcome = train(&corpus, &cfg.train)?;
                save_model(&outcome.model, &cfg.out.join("model.json"))?;
                write_json(&cfg.out.join("loss.json"), &outcome.loss_history)?;
                outcome.model
            }
        }),
    };

    let outcomes: Vec<IntervalOutcome> = interval_names(cfg)
        .par_iter()
        .map(|name| {
            let (name, tweets) = interval_tweets(&corpus, name.as_deref());
            let dir = cfg.out.join(&name);
            process_interval(cfg, model.as_ref(), truth.as_ref(), &name, &tweets, &dir)
        })
        .collect::<Result<_, _>>()?;

    fs::write(cfg.out.join("config.resolved"), cfg.resolved_text())?;
    Ok(outcomes)
}

#[derive(Debug, Clone, Serialize)]
pub struct CpccRow {
    pub metric: String,
    pub method: String,
    pub cpcc: f64,
}

/// Cophenetic correlation for every metric x method combination on the
/// configured representation over the whole corpus.
pub fn cmd_cpcc_scan(cfg: &PipelineConfig) -> Result<Vec<CpccRow>, PipelineError> {
    let (corpus, _) = prepare_corpus(cfg)?;
    let model = match cfg.representation {
        Representation::TweetTerm => None,
        Representation::Tweet2Vec => Some(match &cfg.model {
            Some(path) => load_model(path)?,
            None => train(&corpus, &cfg.train)?.model,
        }),
    };
    let tweets: Vec<&Tweet> = corpus.tweets().iter().collect();
    let rows = build_rows(cfg, model.as_ref(), &tweets)?.rows;
    let mut table = Vec::with_capacity(12);
    for metric in Metric::ALL {
        let distances = pairwise_distances(rows.view(), metric)?;
        for method in Linkage::ALL {
            let dendrogram = linkage(&distances, method);
            let cpcc = cophenetic_corr(&distances, &dendrogram)?;
            table.push(CpccRow {
                metric: metric.to_string(),
                method: method.to_string(),
                cpcc,
            });
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareCell {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// "a", "b", or null on tie/undefined.
    pub winner: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareInterval {
    pub interval: String,
    pub a_threshold: f64,
    pub b_threshold: f64,
    pub cells: Vec<CompareCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub a: String,
    pub b: String,
    pub intervals: Vec<CompareInterval>,
    pub warnings: Vec<String>,
}

fn read_json(path: &Path) -> Result<serde_json::Value, PipelineError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn resolved_map(dir: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let text = fs::read_to_string(dir.join("config.resolved"))?;
    Ok(crate::config::parse_config_text(&text)?)
}

/// Keys that pin down the corpus and truth a run was evaluated on.
const IDENTITY_KEYS: &[&str] = &[
    "input",
    "synth_topics",
    "synth_per_topic",
    "synth_noise",
    "synth_hashtag_rate",
    "intervals",
    "topics",
    "match_threshold",
];

fn check_same_corpus(
    a: &BTreeMap<String, String>,
    b: &BTreeMap<String, String>,
) -> Result<(), PipelineError> {
    for key in IDENTITY_KEYS {
        if a.get(*key) != b.get(*key) {
            return Err(run_err(format!("corpus mismatch: config key {key} differs")));
        }
    }
    // Synthetic corpora also depend on the generation seed.
    if a.contains_key("synth_topics") && a.get("seed") != b.get("seed") {
        return Err(run_err("corpus mismatch: config key seed differs"));
    }
    Ok(())
}

const EXTRINSIC: &[&str] = &["homogeneity", "completeness", "v_measure", "ari", "ami"];

/// Side-by-side extrinsic metrics at each run's chosen threshold, winner
/// flagged per metric, mirroring the two-model comparison table.
pub fn cmd_compare(a_dir: &Path, b_dir: &Path) -> Result<CompareReport, PipelineError> {
    let a_map = resolved_map(a_dir)?;
    let b_map = resolved_map(b_dir)?;
    check_same_corpus(&a_map, &b_map)?;

    let mut warnings = Vec::new();
    let mut intervals = Vec::new();
    let names: Vec<String> = match a_map.get("intervals") {
        Some(specs) => specs
            .split(',')
            .map(|s| s.split('=').next().unwrap_or("").trim().to_string())
            .collect(),
        None => vec!["all".to_string()],
    };
    for name in names {
        let a_metrics = read_json(&a_dir.join(&name).join("metrics.json"))?;
        let b_metrics = read_json(&b_dir.join(&name).join("metrics.json"))?;
        let mut cells = Vec::new();
        for metric in EXTRINSIC {
            let a_val = a_metrics["chosen"][metric].as_f64();
            let b_val = b_metrics["chosen"][metric].as_f64();
            let winner = match (a_val, b_val) {
                (Some(x), Some(y)) if x > y => Some("a".to_string()),
                (Some(x), Some(y)) if y > x => Some("b".to_string()),
                _ => None,
            };
            cells.push(CompareCell { metric: metric.to_string(), a: a_val, b: b_val, winner });
        }
        if cells.iter().all(|c| c.a.is_none()) {
            warnings.push(format!("run {} has no extrinsic metrics for {name}", a_dir.display()));
        }
        if cells.iter().all(|c| c.b.is_none()) {
            warnings.push(format!("run {} has no extrinsic metrics for {name}", b_dir.display()));
        }
        intervals.push(CompareInterval {
            interval: name,
            a_threshold: a_metrics["chosen_threshold"].as_f64().unwrap_or(f64::NAN),
            b_threshold: b_metrics["chosen_threshold"].as_f64().unwrap_or(f64::NAN),
            cells,
        });
    }
    Ok(CompareReport {
        a: a_dir.display().to_string(),
        b: b_dir.display().to_string(),
        intervals,
        warnings,
    })
}

/// Builds the anonymized evaluation pool from finished run directories:
/// every multi-text cluster summary goes in under a per-run alias.
pub fn pool_from_runs(
    run_dirs: &[&Path],
    seed: u64,
    pool_path: &Path,
    decode_path: &Path,
) -> Result<(), PipelineError> {
    let mut entries = Vec::new();
    for dir in run_dirs {
        let map = resolved_map(dir)?;
        let model = map
            .get("representation")
            .cloned()
            .unwrap_or_else(|| "unknown".to_string());
        let names: Vec<String> = match map.get("intervals") {
            Some(specs) => specs
                .split(',')
                .map(|s| s.split('=').next().unwrap_or("").trim().to_string())
                .collect(),
            None => vec!["all".to_string()],
        };
        for name in names {
            let path = dir.join(&name).join("summaries.json");
            let text = fs::read_to_string(&path)?;
            let summaries: Vec<ClusterSummary> =
                serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
                    path,
                    msg: e.to_string(),
                })?;
            entries.push(PoolEntry {
                model: format!("{}:{}", dir.display(), model),
                interval: name,
                summaries,
            });
        }
    }
    crate::selection::export_eval_pool(&entries, seed, pool_path, decode_path)?;
    Ok(())
}

/// Reads a grid.json artifact back into grid points.
pub fn load_grid(path: &Path) -> Result<Vec<GridPoint>, PipelineError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Reads a labels.jsonl artifact back into (id, label, garbage) rows.
pub fn load_labels(path: &Path) -> Result<Vec<(String, usize, bool)>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| PipelineError::BadArtifact {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        let id = v["id"].as_str().unwrap_or_default().to_string();
        let label = v["label"].as_u64().unwrap_or_default() as usize;
        let garbage = v["garbage"].as_bool().unwrap_or_default();
        rows.push((id, label, garbage));
    }
    Ok(rows)
}
