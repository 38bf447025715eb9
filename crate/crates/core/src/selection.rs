//! Threshold grid search, model selection, and cluster summarization.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::hac::{cut, Dendrogram, DistanceMatrix};
use crate::metrics::{
    adjusted_mutual_info, adjusted_rand_index, contingency, homogeneity_completeness_v,
    silhouette,
};

/// The default threshold grid: 0.1 to 1.5 in 0.1 steps.
pub fn default_grid() -> Vec<f64> {
    // i/10 rather than i*0.1 so thresholds print as the familiar decimals.
    (1..=15).map(|i| f64::from(i) / 10.0).collect()
}

/// Ground-truth view for grid evaluation. Row labels align with the distance
/// matrix; garbage items (excluded from distances) are folded into a single
/// pseudo-cluster appended to every cut.
#[derive(Debug, Clone, Default)]
pub struct GridTruth {
    pub row_labels: Vec<Option<usize>>,
    /// True topics of ground-truth-labeled garbage tweets.
    pub garbage_labels: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridPoint {
    pub threshold: f64,
    pub n_clusters: usize,
    pub homogeneity: Option<f64>,
    pub completeness: Option<f64>,
    pub v_measure: Option<f64>,
    pub ari: Option<f64>,
    pub ami: Option<f64>,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub points: Vec<GridPoint>,
    /// Index into `points` of the V-measure argmax (needs truth).
    pub chosen_supervised: Option<usize>,
    /// Index into `points` of the silhouette argmax.
    pub chosen_unsupervised: Option<usize>,
}

impl GridReport {
    /// JSON array of per-threshold records; absent metrics serialize as null.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.points).expect("grid points serialize")
    }

    pub fn supervised_threshold(&self) -> Option<f64> {
        self.chosen_supervised.map(|i| self.points[i].threshold)
    }

    pub fn unsupervised_threshold(&self) -> Option<f64> {
        self.chosen_unsupervised.map(|i| self.points[i].threshold)
    }
}

fn argmax_by(points: &[GridPoint], f: impl Fn(&GridPoint) -> Option<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(v) = f(p) {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Cuts the dendrogram at every grid threshold and scores each flat
/// clustering: silhouette always (null where undefined), extrinsic metrics
/// when truth is given. `n_garbage` items count as one extra cluster.
pub fn grid_search(
    dendrogram: &Dendrogram,
    distances: &DistanceMatrix,
    truth: Option<&GridTruth>,
    n_garbage: usize,
    grid: &[f64],
) -> GridReport {
    assert!(!grid.is_empty(), "grid must be non-empty");
    assert!(
        grid.windows(2).all(|w| w[0] < w[1]),
        "grid must be strictly ascending"
    );
    let n = distances.n();
    if let Some(t) = truth {
        assert_eq!(t.row_labels.len(), n, "truth rows misaligned");
    }
    let points: Vec<GridPoint> = grid
        .par_iter()
        .map(|&threshold| {
            let labels = cut(dendrogram, threshold);
            let k = labels.iter().max().map_or(0, |&m| m + 1);
            let sil = silhouette(distances, &labels).ok();
            let mut point = GridPoint {
                threshold,
                n_clusters: k + usize::from(n_garbage > 0),
                homogeneity: None,
                completeness: None,
                v_measure: None,
                ari: None,
                ami: None,
                silhouette: sil,
            };
            if let Some(t) = truth {
                let mut true_l = Vec::new();
                let mut pred_l = Vec::new();
                for (i, row) in t.row_labels.iter().enumerate() {
                    if let Some(topic) = row {
                        true_l.push(*topic);
                        pred_l.push(labels[i]);
                    }
                }
                for &topic in &t.garbage_labels {
                    true_l.push(topic);
                    pred_l.push(k); // shared garbage pseudo-cluster
                }
                if let Ok(c) = contingency(&true_l, &pred_l) {
                    let (h, cc, v) = homogeneity_completeness_v(&c);
                    point.homogeneity = Some(h);
                    point.completeness = Some(cc);
                    point.v_measure = Some(v);
                    point.ari = Some(adjusted_rand_index(&c));
                    point.ami = Some(adjusted_mutual_info(&c));
                }
            }
            point
        })
        .collect();
    let chosen_supervised = argmax_by(&points, |p| p.v_measure);
    let chosen_unsupervised = argmax_by(&points, |p| p.silhouette);
    GridReport { points, chosen_supervised, chosen_unsupervised }
}

/// Members sorted by total distance to all other members (ascending, ties by
/// index); the first `min(k, size)` are returned. Summation runs in sorted
/// member order so the result is independent of input permutation.
pub fn medoids(members: &[usize], distances: &DistanceMatrix, k: usize) -> Vec<usize> {
    assert!(!members.is_empty(), "cluster must be non-empty");
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let mut scored: Vec<(f64, usize)> = sorted
        .iter()
        .map(|&i| (sorted.iter().map(|&j| distances.get(i, j)).sum(), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    scored.iter().take(k).map(|&(_, i)| i).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub first_id: String,
    pub last_id: String,
    pub medoid_ids: Vec<String>,
    /// First/last/medoid texts with exact duplicates removed, 1 to 5 entries.
    pub representatives: Vec<String>,
    /// True when the representative set collapses to a single distinct text,
    /// marking a pure near-duplicate cluster.
    pub single_text: bool,
}

/// Summaries of the `top` largest clusters (size descending, ties by
/// smallest member index). `tweets` aligns 1:1 with `labels` and the
/// distance matrix.
pub fn summarize_clusters(
    labels: &[usize],
    tweets: &[&Tweet],
    distances: &DistanceMatrix,
    top: usize,
) -> Vec<ClusterSummary> {
    assert_eq!(labels.len(), tweets.len(), "labels/tweets misaligned");
    assert_eq!(labels.len(), distances.n(), "labels/distances misaligned");
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(clusters[c].len()), clusters[c][0]));
    order.truncate(top);

    order
        .into_iter()
        .map(|c| {
            let members = &clusters[c];
            let first = *members
                .iter()
                .min_by_key(|&&i| (tweets[i].timestamp, i))
                .expect("non-empty cluster");
            let last = *members
                .iter()
                .max_by_key(|&&i| (tweets[i].timestamp, i))
                .expect("non-empty cluster");
            let meds = medoids(members, distances, 3);
            let mut representatives: Vec<String> = Vec::new();
            for &i in [first, last].iter().chain(&meds) {
                let text = &tweets[i].raw_text;
                if !representatives.iter().any(|t| t == text) {
                    representatives.push(text.clone());
                }
            }
            let single_text = representatives.len() == 1;
            ClusterSummary {
                cluster: c,
                size: members.len(),
                first_id: tweets[first].id.clone(),
                last_id: tweets[last].id.clone(),
                medoid_ids: meds.iter().map(|&i| tweets[i].id.clone()).collect(),
                representatives,
                single_text,
            }
        })
        .collect()
}

/// Summaries of one model run over one interval, to be pooled.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub model: String,
    pub interval: String,
    pub summaries: Vec<ClusterSummary>,
}

/// Writes the anonymized evaluation pool: only summaries with more than one
/// distinct text are included, model identities are replaced by shuffled
/// aliases, and the alias -> model mapping goes to a separate decode file.
pub fn export_eval_pool(
    entries: &[PoolEntry],
    seed: u64,
    pool_path: &Path,
    decode_path: &Path,
) -> io::Result<()> {
    assert!(!entries.is_empty(), "need at least one summary set");
    let mut slots: Vec<usize> = (0..entries.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);
    // entry i gets alias "m<slots[i]>"; slots is a permutation, so the
    // decode file inverts exactly.
    let aliases: Vec<String> = slots.iter().map(|s| format!("m{s}")).collect();

    let mut rows: Vec<(String, usize, serde_json::Value)> = Vec::new();
    for (entry, alias) in entries.iter().zip(&aliases) {
        for s in entry.summaries.iter().filter(|s| !s.single_text) {
            rows.push((
                alias.clone(),
                s.cluster,
                serde_json::json!({
                    "alias": alias,
                    "cluster": s.cluster,
                    "tweets": s.representatives,
                    "size": s.size,
                }),
            ));
        }
    }
    rows.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    let mut pool = BufWriter::new(File::create(pool_path)?);
    for (_, _, row) in &rows {
        writeln!(pool, "{row}")?;
    }

    let mut decode_rows: Vec<(String, serde_json::Value)> = entries
        .iter()
        .zip(&aliases)
        .map(|(entry, alias)| {
            (
                alias.clone(),
                serde_json::json!({
                    "alias": alias,
                    "model": entry.model,
                    "interval": entry.interval,
                }),
            )
        })
        .collect();
    decode_rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut decode = BufWriter::new(File::create(decode_path)?);
    for (_, row) in &decode_rows {
        writeln!(decode, "{row}")?;
    }
    Ok(())
}
