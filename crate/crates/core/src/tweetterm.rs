//! Baseline representation: sparse tweet x frequent-n-gram matrix.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};

use ndarray::Array2;
use rayon::prelude::*;

use crate::corpus::Tweet;

pub const DEFAULT_MIN_DF: usize = 10;

/// A word bigram or trigram. `Vec` ordering is lexicographic over tokens,
/// which is exactly the vocab order the matrix maintains.
pub type Ngram = Vec<String>;

/// All contiguous bigrams and trigrams of a whitespace-tokenized text, with
/// repeats. The input is expected to be `normalize(raw, word_level=true)`.
pub fn extract_ngrams(norm_text_word_level: &str) -> Vec<Ngram> {
    let tokens: Vec<&str> = norm_text_word_level.split_whitespace().collect();
    let mut grams = Vec::new();
    for n in [2usize, 3] {
        for window in tokens.windows(n) {
            grams.push(window.iter().map(|t| t.to_string()).collect());
        }
    }
    grams
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermMatrix {
    vocab: Vec<Ngram>,
    df: Vec<usize>,
    /// Per tweet: (vocab index, value) sorted by index. Values are 1 in
    /// binary mode, occurrence counts otherwise.
    rows: Vec<Vec<(usize, u32)>>,
}

impl TermMatrix {
    pub fn vocab(&self) -> &[Ngram] {
        &self.vocab
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, u32)] {
        &self.rows[i]
    }

    /// Dense submatrix for the given row indices, in the order given.
    pub fn dense_rows(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.vocab.len()));
        for (r, &i) in rows.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                out[[r, j]] = f64::from(v);
            }
        }
        out
    }

    pub fn dense(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.rows.len()).collect();
        self.dense_rows(&all)
    }

    /// Header line of tab-joined terms (tokens space-joined), then one line
    /// per tweet: `id idx:val ...`.
    pub fn export(&self, tweets: &[Tweet], out: &mut impl Write) -> io::Result<()> {
        assert_eq!(tweets.len(), self.rows.len(), "row/tweet misalignment");
        let header: Vec<String> = self.vocab.iter().map(|g| g.join(" ")).collect();
        writeln!(out, "{}", header.join("\t"))?;
        for (tweet, row) in tweets.iter().zip(&self.rows) {
            write!(out, "{}", tweet.id)?;
            for &(idx, val) in row {
                write!(out, " {idx}:{val}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Binary presence matrix over bigrams/trigrams occurring in at least
/// `min_df` tweets.
pub fn build_matrix(tweets: &[Tweet], min_df: usize) -> TermMatrix {
    build(tweets, min_df, true)
}

/// Occurrence-count variant of [`build_matrix`].
pub fn build_matrix_with_counts(tweets: &[Tweet], min_df: usize) -> TermMatrix {
    build(tweets, min_df, false)
}

fn build(tweets: &[Tweet], min_df: usize, binary: bool) -> TermMatrix {
    assert!(min_df >= 1, "min_df must be at least 1");
    // Pass 1: document frequency. Each tweet contributes at most once per
    // term regardless of repeats.
    let df_map: HashMap<Ngram, usize> = tweets
        .par_iter()
        .map(|t| {
            extract_ngrams(&t.norm_text_words)
                .into_iter()
                .collect::<BTreeSet<_>>()
        })
        .fold(HashMap::new, |mut acc, set| {
            for gram in set {
                *acc.entry(gram).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (gram, n) in b {
                *a.entry(gram).or_insert(0) += n;
            }
            a
        });
    let mut vocab: Vec<Ngram> = df_map
        .iter()
        .filter(|(_, &n)| n >= min_df)
        .map(|(g, _)| g.clone())
        .collect();
    vocab.sort();
    let df: Vec<usize> = vocab.iter().map(|g| df_map[g]).collect();
    let index: HashMap<&Ngram, usize> = vocab.iter().enumerate().map(|(i, g)| (g, i)).collect();

    // Pass 2: sparse rows, in tweet order.
    let rows: Vec<Vec<(usize, u32)>> = tweets
        .par_iter()
        .map(|t| {
            let mut counts: HashMap<usize, u32> = HashMap::new();
            for gram in extract_ngrams(&t.norm_text_words) {
                if let Some(&i) = index.get(&gram) {
                    *counts.entry(i).or_insert(0) += 1;
                }
            }
            let mut row: Vec<(usize, u32)> = counts
                .into_iter()
                .map(|(i, c)| (i, if binary { 1 } else { c }))
                .collect();
            row.sort_unstable();
            row
        })
        .collect();

    TermMatrix { vocab, df, rows }
}

/// Indices of all-zero rows: tweets none of whose n-grams reached `min_df`.
/// These are excluded from distances and reported as one pseudo-cluster.
pub fn garbage_rows(m: &TermMatrix) -> BTreeSet<usize> {
    m.rows
        .iter()
        .enumerate()
        .filter(|(_, row)| row.is_empty())
        .map(|(i, _)| i)
        .collect()
}
