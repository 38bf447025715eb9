//! Flat key=value pipeline configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::IntervalSpec;
use crate::fuzzymatch::DEFAULT_MATCH_THRESHOLD;
use crate::hac::{Linkage, Metric};
use crate::selection::default_grid;
use crate::tweet2vec::TrainConfig;
use crate::tweetterm::DEFAULT_MIN_DF;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    TweetTerm,
    Tweet2Vec,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::TweetTerm => "tweetterm",
            Representation::Tweet2Vec => "tweet2vec",
        })
    }
}

impl FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tweetterm" => Ok(Representation::TweetTerm),
            "tweet2vec" => Ok(Representation::Tweet2Vec),
            other => Err(format!("unknown representation {other:?}")),
        }
    }
}

/// Synthetic-corpus generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub topics: usize,
    pub per_topic: usize,
    pub noise: f64,
    pub hashtag_rate: f64,
}

/// Fully resolved pipeline configuration; every field has a documented
/// default except the input source.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Exactly one of `input` / `synth` is set.
    pub input: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub representation: Representation,
    pub metric: Metric,
    pub method: Linkage,
    pub grid: Vec<f64>,
    pub min_df: usize,
    pub intervals: Vec<IntervalSpec>,
    /// Topic strings for fuzzy-match ground truth.
    pub topics: Option<PathBuf>,
    pub match_threshold: f64,
    /// Pretrained encoder checkpoint; absent means train from scratch.
    pub model: Option<PathBuf>,
    pub train: TrainConfig,
    /// Largest-cluster summaries per interval.
    pub top: usize,
    pub out: PathBuf,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "input",
    "synth_topics",
    "synth_per_topic",
    "synth_noise",
    "synth_hashtag_rate",
    "representation",
    "metric",
    "method",
    "grid",
    "min_df",
    "intervals",
    "topics",
    "match_threshold",
    "model",
    "hidden",
    "embed",
    "batch",
    "epochs",
    "lr",
    "clip",
    "min_char_freq",
    "min_hashtag_freq",
    "top",
    "out",
    "seed",
];

/// Parses `key = value` lines ('#' comments and blank lines allowed) into a
/// raw map, rejecting unknown keys.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown config key: {key}")));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Applies `key=value` override strings on top of the file map.
pub fn apply_overrides(
    map: &mut BTreeMap<String, String>,
    overrides: &[String],
) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| err(format!("override {item:?}: expected key=value")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown config key: {key}")));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(())
}

fn parse_key<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| err(format!("config key {key}: {e}"))),
    }
}

fn parse_grid_value(raw: &str) -> Result<Vec<f64>, ConfigError> {
    let grid: Vec<f64> = raw
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| err(format!("config key grid: bad threshold {tok:?}")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(err("config key grid: thresholds must be strictly ascending"));
    }
    Ok(grid)
}

impl PipelineConfig {
    /// Resolves a raw key map into a typed config, filling defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let input: Option<PathBuf> = map.get("input").map(PathBuf::from);
        let synth_topics: Option<usize> = parse_key(map, "synth_topics")?;
        let synth = match (&input, synth_topics) {
            (Some(_), Some(_)) => {
                return Err(err("exactly one of input or synth_topics must be set"))
            }
            (None, None) => return Err(err("exactly one of input or synth_topics must be set")),
            (Some(_), None) => {
                for key in ["synth_per_topic", "synth_noise", "synth_hashtag_rate"] {
                    if map.contains_key(key) {
                        return Err(err(format!("config key {key} requires synth_topics")));
                    }
                }
                None
            }
            (None, Some(topics)) => Some(SynthSpec {
                topics,
                per_topic: parse_key(map, "synth_per_topic")?.unwrap_or(20),
                noise: parse_key(map, "synth_noise")?.unwrap_or(0.05),
                hashtag_rate: parse_key(map, "synth_hashtag_rate")?.unwrap_or(1.0),
            }),
        };

        let grid = match map.get("grid") {
            None => default_grid(),
            Some(raw) => parse_grid_value(raw)?,
        };
        let intervals = match map.get("intervals") {
            None => Vec::new(),
            Some(raw) => raw
                .split(',')
                .map(|spec| {
                    IntervalSpec::parse(spec.trim())
                        .map_err(|e| err(format!("config key intervals: {e}")))
                })
                .collect::<Result<_, _>>()?,
        };

        let defaults = TrainConfig::default();
        let seed = parse_key(map, "seed")?.unwrap_or(0);
        let train = TrainConfig {
            hidden: parse_key(map, "hidden")?.unwrap_or(defaults.hidden),
            embed: parse_key(map, "embed")?.unwrap_or(defaults.embed),
            batch: parse_key(map, "batch")?.unwrap_or(defaults.batch),
            epochs: parse_key(map, "epochs")?.unwrap_or(defaults.epochs),
            lr: parse_key(map, "lr")?.unwrap_or(defaults.lr),
            clip: parse_key(map, "clip")?.unwrap_or(defaults.clip),
            seed,
            min_char_freq: parse_key(map, "min_char_freq")?.unwrap_or(defaults.min_char_freq),
            min_hashtag_freq: parse_key(map, "min_hashtag_freq")?
                .unwrap_or(defaults.min_hashtag_freq),
        };

        Ok(PipelineConfig {
            input,
            synth,
            representation: parse_key(map, "representation")?.unwrap_or(Representation::TweetTerm),
            metric: parse_key(map, "metric")?.unwrap_or(Metric::Euclidean),
            method: parse_key(map, "method")?.unwrap_or(Linkage::Average),
            grid,
            min_df: parse_key(map, "min_df")?.unwrap_or(DEFAULT_MIN_DF),
            intervals,
            topics: map.get("topics").map(PathBuf::from),
            match_threshold: parse_key(map, "match_threshold")?.unwrap_or(DEFAULT_MATCH_THRESHOLD),
            model: map.get("model").map(PathBuf::from),
            train,
            top: parse_key(map, "top")?.unwrap_or(20),
            out: map.get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            seed,
        })
    }

    /// Every effective setting as sorted `key = value` lines; the written
    /// form re-parses to an equivalent config.
    pub fn resolved_text(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        if let Some(input) = &self.input {
            map.insert("input", input.display().to_string());
        }
        if let Some(s) = &self.synth {
            map.insert("synth_topics", s.topics.to_string());
            map.insert("synth_per_topic", s.per_topic.to_string());
            map.insert("synth_noise", s.noise.to_string());
            map.insert("synth_hashtag_rate", s.hashtag_rate.to_string());
        }
        map.insert("representation", self.representation.to_string());
        map.insert("metric", self.metric.to_string());
        map.insert("method", self.method.to_string());
        let grid: Vec<String> = self.grid.iter().map(f64::to_string).collect();
        map.insert("grid", grid.join(","));
        map.insert("min_df", self.min_df.to_string());
        if !self.intervals.is_empty() {
            let specs: Vec<String> = self.intervals.iter().map(IntervalSpec::to_string).collect();
            map.insert("intervals", specs.join(","));
        }
        if let Some(topics) = &self.topics {
            map.insert("topics", topics.display().to_string());
        }
        map.insert("match_threshold", self.match_threshold.to_string());
        if let Some(model) = &self.model {
            map.insert("model", model.display().to_string());
        }
        map.insert("hidden", self.train.hidden.to_string());
        map.insert("embed", self.train.embed.to_string());
        map.insert("batch", self.train.batch.to_string());
        map.insert("epochs", self.train.epochs.to_string());
        map.insert("lr", self.train.lr.to_string());
        map.insert("clip", self.train.clip.to_string());
        map.insert("min_char_freq", self.train.min_char_freq.to_string());
        map.insert("min_hashtag_freq", self.train.min_hashtag_freq.to_string());
        map.insert("top", self.top.to_string());
        map.insert("out", self.out.display().to_string());
        map.insert("seed", self.seed.to_string());
        let mut text = String::new();
        for (key, value) in map {
            text.push_str(key);
            text.push_str(" = ");
            text.push_str(&value);
            text.push('\n');
        }
        text
    }
}
