//! Hashtag-prediction training: manual backpropagation through time, plain
//! SGD with global-norm gradient clipping, and a finite-difference check.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{gru_gates, softmax, CharVocab, EncoderModel, GruParams, Tweet2VecError};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden size h.
    pub hidden: usize,
    /// Character embedding size e.
    pub embed: usize,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Global-norm clip applied to each minibatch gradient.
    pub clip: f64,
    pub seed: u64,
    /// Characters seen fewer times than this map to UNK.
    pub min_char_freq: usize,
    /// Hashtags seen on fewer tweets than this are dropped from the label set.
    pub min_hashtag_freq: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 500,
            embed: 64,
            batch: 64,
            epochs: 10,
            lr: 0.1,
            clip: 5.0,
            seed: 0,
            min_char_freq: 2,
            min_hashtag_freq: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EncoderModel,
    /// Mean cross-entropy per example, one entry per epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Example {
    seq: Vec<usize>,
    label: usize,
}

/// One example per (tweet, distinct hashtag) pair whose hashtag survives the
/// frequency cutoff; input is norm_text with every hashtag token removed.
fn build_examples(
    corpus: &Corpus,
    vocab: &CharVocab,
    min_hashtag_freq: usize,
) -> Result<(Vec<Example>, Vec<String>), Tweet2VecError> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for tweet in corpus.tweets() {
        let mut distinct: Vec<&str> = tweet.hashtags.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for tag in distinct {
            *freq.entry(tag).or_insert(0) += 1;
        }
    }
    let labels: Vec<String> = freq
        .iter()
        .filter(|&(_, &n)| n >= min_hashtag_freq)
        .map(|(&tag, _)| tag.to_string())
        .collect();
    let label_of: BTreeMap<&str, usize> =
        labels.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let mut examples = Vec::new();
    for tweet in corpus.tweets() {
        let input: Vec<&str> = tweet
            .norm_text
            .split_whitespace()
            .filter(|tok| !tok.starts_with('#'))
            .collect();
        let input = input.join(" ");
        if input.is_empty() {
            continue;
        }
        let seq = vocab.encode_text(&input);
        let mut distinct: Vec<&str> = tweet.hashtags.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for tag in distinct {
            if let Some(&label) = label_of.get(tag) {
                examples.push(Example { seq: seq.clone(), label });
            }
        }
    }
    if examples.is_empty() {
        return Err(Tweet2VecError::NoHashtags);
    }
    Ok((examples, labels))
}

/// Gradient accumulator mirroring every model parameter.
struct Gradients {
    embedding: Array2<f64>,
    forward: GruParams,
    backward: GruParams,
    w_f: Array2<f64>,
    w_b: Array2<f64>,
    b_c: Array1<f64>,
    w_o: Array2<f64>,
    b_o: Array1<f64>,
}

impl Gradients {
    fn zeros_like(m: &EncoderModel) -> Self {
        Gradients {
            embedding: Array2::zeros(m.embedding.raw_dim()),
            forward: GruParams::zeros(m.hidden(), m.embed()),
            backward: GruParams::zeros(m.hidden(), m.embed()),
            w_f: Array2::zeros(m.w_f.raw_dim()),
            w_b: Array2::zeros(m.w_b.raw_dim()),
            b_c: Array1::zeros(m.b_c.raw_dim()),
            w_o: Array2::zeros(m.w_o.raw_dim()),
            b_o: Array1::zeros(m.b_o.raw_dim()),
        }
    }

    fn add(&mut self, other: &Gradients) {
        self.embedding += &other.embedding;
        for (a, b) in [
            (&mut self.forward, &other.forward),
            (&mut self.backward, &other.backward),
        ] {
            a.w_z += &b.w_z;
            a.w_r += &b.w_r;
            a.w_h += &b.w_h;
            a.u_z += &b.u_z;
            a.u_r += &b.u_r;
            a.u_h += &b.u_h;
            a.b_z += &b.b_z;
            a.b_r += &b.b_r;
            a.b_h += &b.b_h;
        }
        self.w_f += &other.w_f;
        self.w_b += &other.w_b;
        self.b_c += &other.b_c;
        self.w_o += &other.w_o;
        self.b_o += &other.b_o;
    }

    fn scale(&mut self, factor: f64) {
        for v in self.scalars_mut() {
            *v *= factor;
        }
    }

    fn global_norm(&self) -> f64 {
        self.scalars().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn scalars(&self) -> impl Iterator<Item = f64> + '_ {
        gru_scalars(&self.forward)
            .chain(gru_scalars(&self.backward))
            .chain(self.embedding.iter().copied())
            .chain(self.w_f.iter().copied())
            .chain(self.w_b.iter().copied())
            .chain(self.b_c.iter().copied())
            .chain(self.w_o.iter().copied())
            .chain(self.b_o.iter().copied())
    }

    fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        gru_scalars_mut(&mut self.forward)
            .chain(gru_scalars_mut(&mut self.backward))
            .chain(self.embedding.iter_mut())
            .chain(self.w_f.iter_mut())
            .chain(self.w_b.iter_mut())
            .chain(self.b_c.iter_mut())
            .chain(self.w_o.iter_mut())
            .chain(self.b_o.iter_mut())
    }
}

fn gru_scalars(p: &GruParams) -> impl Iterator<Item = f64> + '_ {
    p.w_z
        .iter()
        .chain(p.w_r.iter())
        .chain(p.w_h.iter())
        .chain(p.u_z.iter())
        .chain(p.u_r.iter())
        .chain(p.u_h.iter())
        .chain(p.b_z.iter())
        .chain(p.b_r.iter())
        .chain(p.b_h.iter())
        .copied()
}

fn gru_scalars_mut(p: &mut GruParams) -> impl Iterator<Item = &mut f64> {
    p.w_z
        .iter_mut()
        .chain(p.w_r.iter_mut())
        .chain(p.w_h.iter_mut())
        .chain(p.u_z.iter_mut())
        .chain(p.u_r.iter_mut())
        .chain(p.u_h.iter_mut())
        .chain(p.b_z.iter_mut())
        .chain(p.b_r.iter_mut())
        .chain(p.b_h.iter_mut())
}

/// Model parameters in the same fixed order as `Gradients::scalars`.
fn model_scalars_mut(m: &mut EncoderModel) -> impl Iterator<Item = &mut f64> {
    gru_scalars_mut(&mut m.forward)
        .chain(gru_scalars_mut(&mut m.backward))
        .chain(m.embedding.iter_mut())
        .chain(m.w_f.iter_mut())
        .chain(m.w_b.iter_mut())
        .chain(m.b_c.iter_mut())
        .chain(m.w_o.iter_mut())
        .chain(m.b_o.iter_mut())
}

/// Per-step values cached during the forward pass for BPTT.
struct StepCache {
    h_prev: Array1<f64>,
    z: Array1<f64>,
    r: Array1<f64>,
    cand: Array1<f64>,
}

fn run_direction(m: &EncoderModel, p: &GruParams, order: &[usize]) -> (Vec<StepCache>, Array1<f64>) {
    let mut h = Array1::zeros(m.hidden());
    let mut caches = Vec::with_capacity(order.len());
    for &ci in order {
        let x = m.embedding.row(ci);
        let (z, r, cand) = gru_gates(p, x, h.view());
        let next = &h * &(1.0 - &z) + &z * &cand;
        caches.push(StepCache { h_prev: h, z, r, cand });
        h = next;
    }
    (caches, h)
}

fn outer_acc(acc: &mut Array2<f64>, a: &Array1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in acc.rows_mut().into_iter().zip(a.iter()) {
        row.scaled_add(ai, &b);
    }
}

/// Backpropagates `d_h_last` through one direction, accumulating into the
/// direction's gradients and the shared embedding gradient.
fn backprop_direction(
    m: &EncoderModel,
    p: &GruParams,
    order: &[usize],
    caches: &[StepCache],
    d_h_last: Array1<f64>,
    gp: &mut GruParams,
    emb_grad: &mut Array2<f64>,
) {
    let mut dh = d_h_last;
    for (t, cache) in caches.iter().enumerate().rev() {
        let ci = order[t];
        let x = m.embedding.row(ci);
        let StepCache { h_prev, z, r, cand } = cache;

        let dz = &dh * &(cand - h_prev);
        let dcand = &dh * z;
        let mut dhp = &dh * &(1.0 - z);

        // Candidate path: a_h = W_h x + U_h (r * h_prev) + b_h, cand = tanh(a_h).
        let da_h = &dcand * &cand.mapv(|v| 1.0 - v * v);
        outer_acc(&mut gp.w_h, &da_h, x);
        outer_acc(&mut gp.u_h, &da_h, (r * h_prev).view());
        gp.b_h += &da_h;
        let drh = p.u_h.t().dot(&da_h);
        let dr = &drh * h_prev;
        dhp += &(&drh * r);

        // Gate pre-activations through the logistic derivative.
        let da_z = &dz * &(z * &(1.0 - z));
        outer_acc(&mut gp.w_z, &da_z, x);
        outer_acc(&mut gp.u_z, &da_z, h_prev.view());
        gp.b_z += &da_z;
        dhp += &p.u_z.t().dot(&da_z);

        let da_r = &dr * &(r * &(1.0 - r));
        outer_acc(&mut gp.w_r, &da_r, x);
        outer_acc(&mut gp.u_r, &da_r, h_prev.view());
        gp.b_r += &da_r;
        dhp += &p.u_r.t().dot(&da_r);

        let dx = p.w_z.t().dot(&da_z) + p.w_r.t().dot(&da_r) + p.w_h.t().dot(&da_h);
        emb_grad.row_mut(ci).scaled_add(1.0, &dx);

        dh = dhp;
    }
}

/// Cross-entropy loss and full analytic gradient for one example.
fn example_gradients(m: &EncoderModel, ex: &Example) -> (f64, Gradients) {
    let rev: Vec<usize> = ex.seq.iter().rev().copied().collect();
    let (caches_f, h_f) = run_direction(m, &m.forward, &ex.seq);
    let (caches_b, h_b) = run_direction(m, &m.backward, &rev);
    let emb = m.combine(&h_f, &h_b);
    let probs = softmax(&(m.w_o.dot(&emb) + &m.b_o));
    let loss = -probs[ex.label].max(f64::MIN_POSITIVE).ln();

    let mut g = Gradients::zeros_like(m);
    let mut dlogits = probs;
    dlogits[ex.label] -= 1.0;
    outer_acc(&mut g.w_o, &dlogits, emb.view());
    g.b_o += &dlogits;

    let demb = m.w_o.t().dot(&dlogits);
    outer_acc(&mut g.w_f, &demb, h_f.view());
    outer_acc(&mut g.w_b, &demb, h_b.view());
    g.b_c += &demb;

    let d_h_f = m.w_f.t().dot(&demb);
    let d_h_b = m.w_b.t().dot(&demb);
    backprop_direction(m, &m.forward, &ex.seq, &caches_f, d_h_f, &mut g.forward, &mut g.embedding);
    backprop_direction(m, &m.backward, &rev, &caches_b, d_h_b, &mut g.backward, &mut g.embedding);
    (loss, g)
}

fn forward_loss(m: &EncoderModel, ex: &Example) -> f64 {
    let rev: Vec<usize> = ex.seq.iter().rev().copied().collect();
    let (_, h_f) = run_direction(m, &m.forward, &ex.seq);
    let (_, h_b) = run_direction(m, &m.backward, &rev);
    let emb = m.combine(&h_f, &h_b);
    let probs = softmax(&(m.w_o.dot(&emb) + &m.b_o));
    -probs[ex.label].max(f64::MIN_POSITIVE).ln()
}

/// Trains a fresh encoder on the corpus's hashtagged tweets. Deterministic
/// given the seed: example shuffling, minibatch order, and the fixed-order
/// within-batch gradient sum all derive from it.
pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainOutcome, Tweet2VecError> {
    let vocab = CharVocab::build(
        corpus.tweets().iter().map(|t| t.norm_text.as_str()),
        cfg.min_char_freq,
    );
    let (examples, labels) = build_examples(corpus, &vocab, cfg.min_hashtag_freq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = EncoderModel::init(vocab, labels, cfg.hidden, cfg.embed, &mut rng);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch.max(1)) {
            // Example gradients are independent; the reduction below runs in
            // fixed batch order so results are bit-reproducible.
            let results: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| example_gradients(&model, &examples[i]))
                .collect();
            let mut total = Gradients::zeros_like(&model);
            for (loss, g) in &results {
                epoch_loss += loss;
                total.add(g);
            }
            total.scale(1.0 / batch.len() as f64);
            let norm = total.global_norm();
            if norm > cfg.clip {
                total.scale(cfg.clip / norm);
            }
            for (param, grad) in model_scalars_mut(&mut model).zip(total.scalars()) {
                *param -= cfg.lr * grad;
            }
        }
        loss_history.push(epoch_loss / examples.len() as f64);
    }
    Ok(TrainOutcome { model, loss_history })
}

fn max_rel_err(errs: impl Iterator<Item = f64>) -> f64 {
    // Empty parameter list vacuously checks out at 0.
    errs.fold(0.0, f64::max)
}

/// Compares the analytic gradient against central finite differences for
/// every parameter of a small random model; returns (max, mean) relative
/// error.
fn check_gradients(
    hidden: usize,
    embed: usize,
    seq_len: usize,
    seed: u64,
    step: f64,
) -> (f64, f64) {
    assert!(hidden <= 5 && embed <= 4 && seq_len <= 6, "keep the check small");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = CharVocab::from_chars(vec!['a', 'b', 'c', 'd']);
    let labels = vec!["#x".to_string(), "#y".to_string(), "#z".to_string()];
    let v = vocab.size();
    let mut model = EncoderModel::init(vocab, labels, hidden, embed, &mut rng);
    let ex = Example {
        seq: (0..seq_len.max(1)).map(|_| rng.random_range(0..v)).collect(),
        label: rng.random_range(0..3),
    };

    let (_, analytic) = example_gradients(&model, &ex);
    let analytic: Vec<f64> = analytic.scalars().collect();
    let n_params = analytic.len();
    let mut errs = Vec::with_capacity(n_params);
    for (k, &grad) in analytic.iter().enumerate() {
        let perturb = |m: &mut EncoderModel, delta: f64| {
            *model_scalars_mut(m).nth(k).expect("param index in range") += delta;
        };
        perturb(&mut model, step);
        let plus = forward_loss(&model, &ex);
        perturb(&mut model, -2.0 * step);
        let minus = forward_loss(&model, &ex);
        perturb(&mut model, step);
        let numeric = (plus - minus) / (2.0 * step);
        let denom = (grad.abs() + numeric.abs()).max(1e-8);
        errs.push((grad - numeric).abs() / denom);
    }
    let max = max_rel_err(errs.iter().copied());
    let mean = errs.iter().sum::<f64>() / n_params as f64;
    (max, mean)
}

/// Worst relative error between analytic and finite-difference gradients
/// (central differences, step 1e-5, 64-bit) over every model parameter.
pub fn gradient_check(hidden: usize, embed: usize, seq_len: usize, seed: u64) -> f64 {
    check_gradients(hidden, embed, seq_len, seed, 1e-5).0
}
