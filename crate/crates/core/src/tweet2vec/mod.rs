//! Character-level bidirectional GRU encoder trained to predict hashtags;
//! produces dense tweet embeddings for clustering.

mod train;

pub use train::{gradient_check, train, TrainConfig, TrainOutcome};

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum Tweet2VecError {
    #[error("empty input to encoder")]
    EmptyInput,
    #[error("tweet {id}: empty input to encoder")]
    EmptyTweet { id: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no hashtagged tweets")]
    NoHashtags,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid checkpoint: {0}")]
    Json(#[from] serde_json::Error),
}

/// Character vocabulary with a dedicated UNK slot at the last index.
#[derive(Debug, Clone, PartialEq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    /// Builds from texts, keeping characters seen at least `min_freq` times.
    /// Kept characters get dense indices in sorted order; everything else
    /// maps to UNK.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: HashMap<char, usize> = HashMap::new();
        for text in texts {
            for c in text.chars() {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        let mut chars: Vec<char> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_freq)
            .map(|(c, _)| c)
            .collect();
        chars.sort_unstable();
        Self::from_chars(chars)
    }

    pub fn from_chars(chars: Vec<char>) -> Self {
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        CharVocab { chars, index }
    }

    /// Total size including the UNK slot.
    pub fn size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn unk(&self) -> usize {
        self.chars.len()
    }

    pub fn get(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or_else(|| self.unk())
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.get(c)).collect()
    }
}

/// One GRU direction: input, recurrent, and bias parameters for the update
/// gate (z), reset gate (r), and candidate state (h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_h: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_h: Array1<f64>,
}

impl GruParams {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        GruParams {
            w_z: Array2::zeros((hidden, embed)),
            w_r: Array2::zeros((hidden, embed)),
            w_h: Array2::zeros((hidden, embed)),
            u_z: Array2::zeros((hidden, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            u_h: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            b_r: Array1::zeros(hidden),
            b_h: Array1::zeros(hidden),
        }
    }

    fn init(hidden: usize, embed: usize, rng: &mut impl Rng) -> Self {
        GruParams {
            w_z: glorot((hidden, embed), rng),
            w_r: glorot((hidden, embed), rng),
            w_h: glorot((hidden, embed), rng),
            u_z: glorot((hidden, hidden), rng),
            u_r: glorot((hidden, hidden), rng),
            u_h: glorot((hidden, hidden), rng),
            b_z: Array1::zeros(hidden),
            b_r: Array1::zeros(hidden),
            b_h: Array1::zeros(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_z.nrows()
    }

    pub fn embed(&self) -> usize {
        self.w_z.ncols()
    }
}

/// Uniform Glorot initialization: [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
fn glorot(shape: (usize, usize), rng: &mut impl Rng) -> Array2<f64> {
    let s = (6.0 / (shape.0 + shape.1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || rng.random_range(-s..=s))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU step:
/// z = sigmoid(W_z x + U_z h_prev + b_z), r likewise,
/// h_cand = tanh(W_h x + U_h (r * h_prev) + b_h),
/// h = (1 - z) * h_prev + z * h_cand.
pub fn gru_step(
    p: &GruParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
) -> Result<Array1<f64>, Tweet2VecError> {
    if x.len() != p.embed() || h_prev.len() != p.hidden() {
        return Err(Tweet2VecError::ShapeMismatch(format!(
            "expected x of {} and h of {}, got {} and {}",
            p.embed(),
            p.hidden(),
            x.len(),
            h_prev.len()
        )));
    }
    let (z, _r, cand) = gru_gates(p, x, h_prev);
    Ok(&h_prev.to_owned() * &(1.0 - &z) + &z * &cand)
}

/// Gate activations for one step, shared by forward pass and BPTT.
pub(crate) fn gru_gates(
    p: &GruParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let z = (p.w_z.dot(&x) + p.u_z.dot(&h_prev) + &p.b_z).mapv(sigmoid);
    let r = (p.w_r.dot(&x) + p.u_r.dot(&h_prev) + &p.b_r).mapv(sigmoid);
    let cand = (p.w_h.dot(&x) + p.u_h.dot(&(&r * &h_prev)) + &p.b_h).mapv(f64::tanh);
    (z, r, cand)
}

/// Bidirectional character GRU with a linear combination layer and a softmax
/// hashtag head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub vocab: CharVocab,
    /// Hashtag label strings, one per output unit.
    pub labels: Vec<String>,
    /// V x e character embedding table.
    pub embedding: Array2<f64>,
    pub forward: GruParams,
    pub backward: GruParams,
    /// h x h combination weights for the two terminal states, plus bias.
    pub w_f: Array2<f64>,
    pub w_b: Array2<f64>,
    pub b_c: Array1<f64>,
    /// L x h output layer.
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
}

impl EncoderModel {
    pub fn zeros(vocab: CharVocab, labels: Vec<String>, hidden: usize, embed: usize) -> Self {
        assert!(!labels.is_empty() && hidden >= 1, "need L >= 1 and h >= 1");
        let v = vocab.size();
        let l = labels.len();
        EncoderModel {
            vocab,
            labels,
            embedding: Array2::zeros((v, embed)),
            forward: GruParams::zeros(hidden, embed),
            backward: GruParams::zeros(hidden, embed),
            w_f: Array2::zeros((hidden, hidden)),
            w_b: Array2::zeros((hidden, hidden)),
            b_c: Array1::zeros(hidden),
            w_o: Array2::zeros((l, hidden)),
            b_o: Array1::zeros(l),
        }
    }

    /// Seeded Glorot-uniform initialization; biases start at zero.
    pub fn init(
        vocab: CharVocab,
        labels: Vec<String>,
        hidden: usize,
        embed: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(!labels.is_empty() && hidden >= 1, "need L >= 1 and h >= 1");
        let v = vocab.size();
        let l = labels.len();
        EncoderModel {
            vocab,
            labels,
            embedding: glorot((v, embed), rng),
            forward: GruParams::init(hidden, embed, rng),
            backward: GruParams::init(hidden, embed, rng),
            w_f: glorot((hidden, hidden), rng),
            w_b: glorot((hidden, hidden), rng),
            b_c: Array1::zeros(hidden),
            w_o: glorot((l, hidden), rng),
            b_o: Array1::zeros(l),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn embed(&self) -> usize {
        self.forward.embed()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// Terminal states of both directions for a char-index sequence.
    pub(crate) fn terminal_states(&self, seq: &[usize]) -> (Array1<f64>, Array1<f64>) {
        let run = |p: &GruParams, order: &mut dyn Iterator<Item = usize>| {
            let mut h = Array1::zeros(self.hidden());
            for idx in order {
                let x = self.embedding.row(idx);
                let (z, _r, cand) = gru_gates(p, x, h.view());
                h = &h * &(1.0 - &z) + &z * &cand;
            }
            h
        };
        let h_f = run(&self.forward, &mut seq.iter().copied());
        let h_b = run(&self.backward, &mut seq.iter().rev().copied());
        (h_f, h_b)
    }

    pub(crate) fn combine(&self, h_f: &Array1<f64>, h_b: &Array1<f64>) -> Array1<f64> {
        self.w_f.dot(h_f) + self.w_b.dot(h_b) + &self.b_c
    }
}

/// Runs both GRU directions from zero states over the text's characters and
/// combines the terminal states into an h-dimensional embedding.
pub fn encode(model: &EncoderModel, text: &str) -> Result<Array1<f64>, Tweet2VecError> {
    let seq = model.vocab.encode_text(text);
    if seq.is_empty() {
        return Err(Tweet2VecError::EmptyInput);
    }
    let (h_f, h_b) = model.terminal_states(&seq);
    Ok(model.combine(&h_f, &h_b))
}

pub(crate) fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Softmax over the output layer applied to the tweet embedding.
pub fn predict_hashtags(model: &EncoderModel, text: &str) -> Result<Array1<f64>, Tweet2VecError> {
    let emb = encode(model, text)?;
    Ok(softmax(&(model.w_o.dot(&emb) + &model.b_o)))
}

/// Dense n x h matrix, row i = embedding of tweet i.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub data: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.data.view()
    }
}

/// Encodes every tweet's normalized text; rows follow input order. Tweets
/// are independent, so encoding parallelizes.
pub fn encode_corpus(
    model: &EncoderModel,
    tweets: &[&Tweet],
) -> Result<EmbeddingMatrix, Tweet2VecError> {
    let rows: Vec<Array1<f64>> = tweets
        .par_iter()
        .map(|t| {
            encode(model, &t.norm_text).map_err(|_| Tweet2VecError::EmptyTweet {
                id: t.id.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut data = Array2::zeros((tweets.len(), model.hidden()));
    for (i, row) in rows.into_iter().enumerate() {
        data.row_mut(i).assign(&row);
    }
    Ok(EmbeddingMatrix { data })
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    chars: Vec<char>,
    labels: Vec<String>,
    embedding: Array2<f64>,
    forward: GruParams,
    backward: GruParams,
    w_f: Array2<f64>,
    w_b: Array2<f64>,
    b_c: Array1<f64>,
    w_o: Array2<f64>,
    b_o: Array1<f64>,
}

/// Writes a versioned JSON checkpoint with vocab, labels, and all tensors.
pub fn save_model(model: &EncoderModel, path: &Path) -> Result<(), Tweet2VecError> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        chars: model.vocab.chars().to_vec(),
        labels: model.labels.clone(),
        embedding: model.embedding.clone(),
        forward: model.forward.clone(),
        backward: model.backward.clone(),
        w_f: model.w_f.clone(),
        w_b: model.w_b.clone(),
        b_c: model.b_c.clone(),
        w_o: model.w_o.clone(),
        b_o: model.b_o.clone(),
    };
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer(file, &ckpt)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<EncoderModel, Tweet2VecError> {
    let file = BufReader::new(File::open(path)?);
    let ckpt: Checkpoint = serde_json::from_reader(file)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Tweet2VecError::BadVersion(ckpt.version));
    }
    Ok(EncoderModel {
        vocab: CharVocab::from_chars(ckpt.chars),
        labels: ckpt.labels,
        embedding: ckpt.embedding,
        forward: ckpt.forward,
        backward: ckpt.backward,
        w_f: ckpt.w_f,
        w_b: ckpt.w_b,
        b_c: ckpt.b_c,
        w_o: ckpt.w_o,
        b_o: ckpt.b_o,
    })
}
