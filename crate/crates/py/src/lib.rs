//! Python bindings: corpus handling, fuzzy matching, clustering, evaluation
//! metrics, the character-GRU encoder, and the end-to-end pipeline.
//!
//! Build with `cargo build -p tweetclust-py`, then import the produced
//! `cdylib` as module `tweetclust_py` (see `python/smoke_test.py`).

use std::collections::HashMap;
use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tweetclust::config::{parse_config_text, PipelineConfig};
use tweetclust::corpus::{synth_corpus, IntervalSpec, Tweet};
use tweetclust::hac::{self, DistanceMatrix, Linkage, Metric};
use tweetclust::metrics;
use tweetclust::pipeline::cmd_pipeline;
use tweetclust::selection::default_grid;
use tweetclust::tweet2vec::{self, TrainConfig};
use tweetclust::{fuzzymatch, tweetterm};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_metric(name: &str) -> PyResult<Metric> {
    name.parse().map_err(value_err)
}

fn parse_method(name: &str) -> PyResult<Linkage> {
    name.parse().map_err(value_err)
}

/// Rectangular `list[list[float]]` to a dense ndarray.
fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("need at least one row"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / cols.max(1), cols), flat).map_err(value_err)
}

fn distances(rows: Vec<Vec<f64>>, metric: &str) -> PyResult<DistanceMatrix> {
    let array = to_array(rows)?;
    hac::pairwise_distances(array.view(), parse_metric(metric)?).map_err(value_err)
}

// ---------------------------------------------------------------------------
// Corpus

/// An immutable tweet collection with normalized text and interval tags.
#[pyclass]
struct Corpus {
    inner: tweetclust::Corpus,
}

#[pymethods]
impl Corpus {
    /// Builds a corpus from `(id, text, timestamp)` triples.
    #[new]
    fn new(tweets: Vec<(String, String, i64)>) -> PyResult<Self> {
        let tweets: Vec<Tweet> =
            tweets.into_iter().map(|(id, text, ts)| Tweet::new(id, text, ts)).collect();
        Ok(Corpus { inner: tweetclust::Corpus::new(tweets, Vec::new()).map_err(value_err)? })
    }

    /// Loads line-delimited JSON tweets; intervals are `name=start..end`
    /// strings with RFC 3339 bounds.
    #[staticmethod]
    #[pyo3(signature = (path, intervals = Vec::new()))]
    fn load(path: PathBuf, intervals: Vec<String>) -> PyResult<Self> {
        let intervals: Vec<IntervalSpec> = intervals
            .iter()
            .map(|s| IntervalSpec::parse(s))
            .collect::<Result<_, _>>()
            .map_err(value_err)?;
        Ok(Corpus {
            inner: tweetclust::corpus::load_corpus(&path, &intervals).map_err(value_err)?,
        })
    }

    /// Deterministic synthetic corpus: noisy copies of template sentences
    /// plus per-topic hashtags. Returns `(corpus, {tweet_id: topic})`.
    #[staticmethod]
    #[pyo3(signature = (topics, per_topic, noise = 0.05, hashtag_rate = 1.0, seed = 0))]
    fn synth(
        topics: usize,
        per_topic: usize,
        noise: f64,
        hashtag_rate: f64,
        seed: u64,
    ) -> PyResult<(Self, HashMap<String, usize>)> {
        if !(0.0..=1.0).contains(&noise) || !(0.0..=1.0).contains(&hashtag_rate) {
            return Err(PyValueError::new_err("noise and hashtag_rate must lie in [0, 1]"));
        }
        let (corpus, truth) = synth_corpus(topics, per_topic, noise, hashtag_rate, seed);
        let labels = truth.iter().map(|(id, m)| (id.to_string(), m.topic)).collect();
        Ok((Corpus { inner: corpus }, labels))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        tweetclust::corpus::save_corpus(&self.inner, &path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.tweets().iter().map(|t| t.id.clone()).collect()
    }

    fn norm_texts(&self) -> Vec<String> {
        self.inner.tweets().iter().map(|t| t.norm_text.clone()).collect()
    }

    fn hashtags(&self) -> Vec<Vec<String>> {
        self.inner.tweets().iter().map(|t| t.hashtags.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Fuzzy matching

/// Removes retweet prefixes, URLs, and mentions and lowercases; with
/// `word_level` punctuation becomes separate tokens.
#[pyfunction]
#[pyo3(signature = (raw, word_level = false))]
fn normalize(raw: &str, word_level: bool) -> String {
    tweetclust::corpus::normalize(raw, word_level)
}

/// Character edit distance; inserts/deletes cost 1, substitutions cost
/// `substitution_cost` (1 or 2).
#[pyfunction]
#[pyo3(signature = (a, b, substitution_cost = 1))]
fn levenshtein(a: &str, b: &str, substitution_cost: usize) -> PyResult<usize> {
    if substitution_cost != 1 && substitution_cost != 2 {
        return Err(PyValueError::new_err("substitution_cost must be 1 or 2"));
    }
    Ok(fuzzymatch::levenshtein(a, b, substitution_cost))
}

/// `(|a| + |b| - d) / (|a| + |b|)` with substitutions at cost 2.
#[pyfunction]
fn similarity_ratio(a: &str, b: &str) -> f64 {
    fuzzymatch::similarity_ratio(a, b)
}

/// Fuzzy-matches every tweet against the topic labels; returns
/// `{tweet_id: (topic_index, ratio)}` for ratios strictly above `threshold`.
#[pyfunction]
#[pyo3(signature = (topics, corpus, threshold = 0.9))]
fn build_ground_truth(
    topics: Vec<String>,
    corpus: &Corpus,
    threshold: f64,
) -> PyResult<HashMap<String, (usize, f64)>> {
    if !(0.0 < threshold && threshold <= 1.0) {
        return Err(PyValueError::new_err("threshold must lie in (0, 1]"));
    }
    let truth = fuzzymatch::build_ground_truth(&topics, &corpus.inner, threshold);
    Ok(truth.iter().map(|(id, m)| (id.to_string(), (m.topic, m.ratio))).collect())
}

// ---------------------------------------------------------------------------
// Representations

/// Dense rows, space-joined vocab entries, and all-zero row indices.
type TermMatrixParts = (Vec<Vec<f64>>, Vec<String>, Vec<usize>);

/// Binary tweet x frequent-n-gram matrix. Returns `(rows, vocab, garbage)`
/// where vocab entries are space-joined n-grams and garbage lists all-zero
/// row indices.
#[pyfunction]
#[pyo3(signature = (corpus, min_df = tweetterm::DEFAULT_MIN_DF))]
fn term_matrix(corpus: &Corpus, min_df: usize) -> PyResult<TermMatrixParts> {
    if min_df < 1 {
        return Err(PyValueError::new_err("min_df must be at least 1"));
    }
    let matrix = tweetterm::build_matrix(corpus.inner.tweets(), min_df);
    let rows = matrix.dense().outer_iter().map(|r| r.to_vec()).collect();
    let vocab = matrix.vocab().iter().map(|g| g.join(" ")).collect();
    let garbage = tweetterm::garbage_rows(&matrix).into_iter().collect();
    Ok((rows, vocab, garbage))
}

// ---------------------------------------------------------------------------
// Clustering

/// Agglomerative merge tree; leaves are `0..n-1`, merge k creates node
/// `n + k`.
#[pyclass]
struct Dendrogram {
    inner: hac::Dendrogram,
}

#[pymethods]
impl Dendrogram {
    fn n_leaves(&self) -> usize {
        self.inner.n_leaves()
    }

    /// Merges as `(left, right, height, size)` tuples, sorted by height.
    fn merges(&self) -> Vec<(usize, usize, f64, usize)> {
        self.inner.merges().iter().map(|m| (m.left, m.right, m.height, m.size)).collect()
    }

    /// Flat labels at `threshold` (cophenetic distance <= threshold),
    /// numbered by first appearance.
    fn cut(&self, threshold: f64) -> PyResult<Vec<usize>> {
        if threshold < 0.0 {
            return Err(PyValueError::new_err("threshold must be non-negative"));
        }
        Ok(hac::cut(&self.inner, threshold))
    }

    /// Condensed cophenetic distances in scipy pair order.
    fn cophenetic(&self) -> Vec<f64> {
        self.inner.cophenetic()
    }
}

/// Hierarchical agglomerative clustering over data rows.
/// `metric`: euclidean, manhattan, or cosine; `method`: single, complete,
/// average, or weighted.
#[pyfunction]
#[pyo3(signature = (rows, metric = "euclidean", method = "average"))]
fn linkage(rows: Vec<Vec<f64>>, metric: &str, method: &str) -> PyResult<Dendrogram> {
    let d = distances(rows, metric)?;
    Ok(Dendrogram { inner: hac::linkage(&d, parse_method(method)?) })
}

/// Cophenetic correlation between the original distances and a dendrogram
/// built from them with the given method.
#[pyfunction]
#[pyo3(signature = (rows, metric = "euclidean", method = "average"))]
fn cophenetic_corr(rows: Vec<Vec<f64>>, metric: &str, method: &str) -> PyResult<f64> {
    let d = distances(rows, metric)?;
    let tree = hac::linkage(&d, parse_method(method)?);
    hac::cophenetic_corr(&d, &tree).map_err(value_err)
}

/// The default threshold grid, 0.1 to 1.5 in 0.1 steps.
#[pyfunction]
fn grid_thresholds() -> Vec<f64> {
    default_grid()
}

// ---------------------------------------------------------------------------
// Evaluation metrics

/// Homogeneity, completeness, and V-measure of a predicted labeling against
/// ground truth.
#[pyfunction]
fn homogeneity_completeness_v(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<(f64, f64, f64)> {
    let c = metrics::contingency(&truth, &pred).map_err(value_err)?;
    Ok(metrics::homogeneity_completeness_v(&c))
}

/// Adjusted Rand index.
#[pyfunction]
fn adjusted_rand_index(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<f64> {
    let c = metrics::contingency(&truth, &pred).map_err(value_err)?;
    Ok(metrics::adjusted_rand_index(&c))
}

/// Adjusted mutual information with the max-entropy normalizer.
#[pyfunction]
fn adjusted_mutual_info(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<f64> {
    let c = metrics::contingency(&truth, &pred).map_err(value_err)?;
    Ok(metrics::adjusted_mutual_info(&c))
}

/// Mean silhouette coefficient of a labeling over data rows.
#[pyfunction]
#[pyo3(signature = (rows, labels, metric = "euclidean"))]
fn silhouette(rows: Vec<Vec<f64>>, labels: Vec<usize>, metric: &str) -> PyResult<f64> {
    let d = distances(rows, metric)?;
    metrics::silhouette(&d, &labels).map_err(value_err)
}

// ---------------------------------------------------------------------------
// Character-GRU encoder

/// Bidirectional character-GRU tweet encoder trained to predict hashtags.
#[pyclass]
struct Encoder {
    inner: tweet2vec::EncoderModel,
}

#[pymethods]
impl Encoder {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Encoder { inner: tweet2vec::load_model(&path).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        tweet2vec::save_model(&self.inner, &path).map_err(value_err)
    }

    fn hidden(&self) -> usize {
        self.inner.hidden()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    /// h-dimensional embedding of a text.
    fn encode(&self, text: &str) -> PyResult<Vec<f64>> {
        Ok(tweet2vec::encode(&self.inner, text).map_err(value_err)?.to_vec())
    }

    /// Hashtag probabilities for a text, best first.
    fn predict(&self, text: &str) -> PyResult<Vec<(String, f64)>> {
        let probs = tweet2vec::predict_hashtags(&self.inner, text).map_err(value_err)?;
        let mut out: Vec<(String, f64)> = self
            .inner
            .labels
            .iter()
            .cloned()
            .zip(probs.iter().copied())
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        Ok(out)
    }

    /// Embeddings for every tweet of a corpus, in corpus order.
    fn encode_corpus(&self, corpus: &Corpus) -> PyResult<Vec<Vec<f64>>> {
        let tweets: Vec<&Tweet> = corpus.inner.tweets().iter().collect();
        let matrix = tweet2vec::encode_corpus(&self.inner, &tweets).map_err(value_err)?;
        Ok(matrix.view().outer_iter().map(|r| r.to_vec()).collect())
    }
}

/// Trains the encoder on a corpus's hashtagged tweets.
#[pyfunction]
#[pyo3(signature = (corpus, hidden = 32, embed = 16, batch = 32, epochs = 5, lr = 0.5,
                    clip = 5.0, seed = 0, min_char_freq = 1, min_hashtag_freq = 1))]
#[allow(clippy::too_many_arguments)]
fn train_encoder(
    corpus: &Corpus,
    hidden: usize,
    embed: usize,
    batch: usize,
    epochs: usize,
    lr: f64,
    clip: f64,
    seed: u64,
    min_char_freq: usize,
    min_hashtag_freq: usize,
) -> PyResult<(Encoder, Vec<f64>)> {
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
    let outcome = tweet2vec::train(&corpus.inner, &cfg).map_err(value_err)?;
    Ok((Encoder { inner: outcome.model }, outcome.loss_history))
}

// ---------------------------------------------------------------------------
// Pipeline

/// Chosen clustering of one interval from a pipeline run.
#[pyclass]
struct IntervalResult {
    #[pyo3(get)]
    interval: String,
    #[pyo3(get)]
    threshold: f64,
    #[pyo3(get)]
    n_clusters: usize,
    #[pyo3(get)]
    n_garbage: usize,
    #[pyo3(get)]
    v_measure: Option<f64>,
    #[pyo3(get)]
    silhouette: Option<f64>,
    /// Per-tweet labels aligned with the interval's tweets.
    #[pyo3(get)]
    labels: Vec<usize>,
}

/// Runs the full pipeline from config text (same `key = value` format as the
/// CLI) and returns one result per interval; artifacts land in the config's
/// `out` directory.
#[pyfunction]
fn run_pipeline(config_text: &str) -> PyResult<Vec<IntervalResult>> {
    let map = parse_config_text(config_text).map_err(value_err)?;
    let cfg = PipelineConfig::from_map(&map).map_err(value_err)?;
    let outcomes = cmd_pipeline(&cfg).map_err(value_err)?;
    Ok(outcomes
        .into_iter()
        .map(|o| {
            let chosen = &o.report.points[o
                .report
                .chosen_supervised
                .or(o.report.chosen_unsupervised)
                .unwrap_or(o.report.points.len() - 1)];
            IntervalResult {
                interval: o.interval,
                threshold: o.chosen_threshold,
                n_clusters: chosen.n_clusters,
                n_garbage: o.n_garbage,
                v_measure: chosen.v_measure,
                silhouette: chosen.silhouette,
                labels: o.labels,
            }
        })
        .collect())
}

#[pymodule]
pub fn tweetclust_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Dendrogram>()?;
    m.add_class::<Encoder>()?;
    m.add_class::<IntervalResult>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(build_ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(term_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(linkage, m)?)?;
    m.add_function(wrap_pyfunction!(cophenetic_corr, m)?)?;
    m.add_function(wrap_pyfunction!(grid_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(homogeneity_completeness_v, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_mutual_info, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(train_encoder, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
