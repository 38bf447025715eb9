//! Levenshtein-based fuzzy matching of tweets against topic labels.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{normalize, Corpus, GroundTruth};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.9;

/// One tweet's best topic assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tweet_id: String,
    pub topic_id: usize,
    pub ratio: f64,
}

/// Minimal edit cost transforming `a` into `b`, counting Unicode characters.
/// Inserts and deletes cost 1, substitutions cost `substitution_cost`.
pub fn levenshtein(a: &str, b: &str, substitution_cost: usize) -> usize {
    levenshtein_bounded(a, b, substitution_cost, usize::MAX).expect("unbounded distance")
}

/// Like [`levenshtein`] but gives up once the distance provably exceeds
/// `max_cost`, returning `None`. The DP row minimum never decreases, so a row
/// whose minimum exceeds the budget cannot recover.
pub fn levenshtein_bounded(
    a: &str,
    b: &str,
    substitution_cost: usize,
    max_cost: usize,
) -> Option<usize> {
    assert!(
        substitution_cost == 1 || substitution_cost == 2,
        "substitution_cost must be 1 or 2"
    );
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    // Every surplus character costs at least one edit.
    if a.len().abs_diff(b.len()) > max_cost {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { substitution_cost };
            let del = prev[j + 1] + 1;
            let ins = cur[j] + 1;
            cur[j + 1] = sub.min(del).min(ins);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max_cost {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max_cost).then_some(d)
}

/// `(|a| + |b| - d) / (|a| + |b|)` with substitutions at cost 2, so one
/// substitution counts as a delete plus an insert. Two empty strings are
/// identical, ratio 1.
pub fn similarity_ratio(a: &str, b: &str) -> f64 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        return 1.0;
    }
    let d = levenshtein(a, b, 2);
    (total - d) as f64 / total as f64
}

/// Best match per tweet, in corpus order. A tweet matches when its ratio
/// against some normalized topic label strictly exceeds `threshold`; equal
/// ratios resolve to the lowest topic index.
pub fn match_corpus(topics: &[String], corpus: &Corpus, threshold: f64) -> Vec<MatchResult> {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "threshold must be in (0, 1]"
    );
    let norm_topics: Vec<String> = topics.iter().map(|t| normalize(t, false)).collect();
    corpus
        .tweets()
        .par_iter()
        .filter_map(|tweet| {
            let text = &tweet.norm_text;
            let la = text.chars().count();
            let mut best: Option<(usize, f64)> = None;
            for (k, label) in norm_topics.iter().enumerate() {
                let total = la + label.chars().count();
                let ratio = if total == 0 {
                    1.0
                } else {
                    // ratio > threshold iff d < (1 - threshold) * total, so a
                    // floor bound is safe; the strict check below is exact.
                    let max_cost = ((1.0 - threshold) * total as f64).floor() as usize;
                    match levenshtein_bounded(text, label, 2, max_cost) {
                        Some(d) => (total - d) as f64 / total as f64,
                        None => continue,
                    }
                };
                if ratio > threshold && best.is_none_or(|(_, r)| ratio > r) {
                    best = Some((k, ratio));
                }
            }
            best.map(|(topic_id, ratio)| MatchResult {
                tweet_id: tweet.id.clone(),
                topic_id,
                ratio,
            })
        })
        .collect()
}

/// Assigns each tweet whose best ratio strictly exceeds `threshold` to its
/// best-matching topic; everything else stays out of the map.
pub fn build_ground_truth(topics: &[String], corpus: &Corpus, threshold: f64) -> GroundTruth {
    let mut truth = GroundTruth::new(topics.to_vec());
    for m in match_corpus(topics, corpus, threshold) {
        truth.insert(m.tweet_id, m.topic_id, m.ratio);
    }
    truth
}

/// Reads topic labels, one per line; blank lines are skipped.
pub fn load_topics(path: &Path) -> io::Result<Vec<String>> {
    let file = File::open(path)?;
    let mut topics = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            topics.push(trimmed.to_string());
        }
    }
    Ok(topics)
}
