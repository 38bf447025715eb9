//! Hierarchical agglomerative clustering: pairwise distances, linkage,
//! cophenetic correlation, and flat cuts.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use ndarray::ArrayView2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HacError {
    #[error("cosine distance undefined for zero-norm rows: {0:?}")]
    ZeroNormRows(Vec<usize>),
    #[error("degenerate distances")]
    DegenerateDistances,
    #[error("condensed length {got} does not match n = {n}")]
    BadCondensedLength { n: usize, got: usize },
    #[error("distances must be finite and non-negative (entry {index} is {value})")]
    BadDistance { index: usize, value: f64 },
    #[error("invalid dendrogram line {0}")]
    BadDendrogramLine(usize),
    #[error("expected {expected} merges, found {found}")]
    BadMergeCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Cosine];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Weighted,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Weighted,
    ];
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Weighted => "weighted",
        })
    }
}

impl FromStr for Linkage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "weighted" => Ok(Linkage::Weighted),
            other => Err(format!("unknown linkage {other:?}")),
        }
    }
}

/// Index of pair `(i, j)`, `i < j`, in a condensed upper-triangle array.
fn cidx(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Unordered variant of [`cidx`].
fn cidx2(n: usize, i: usize, j: usize) -> usize {
    if i < j {
        cidx(n, i, j)
    } else {
        cidx(n, j, i)
    }
}

/// Symmetric pairwise distances stored as the condensed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn from_condensed(n: usize, data: Vec<f64>, metric: Metric) -> Result<Self, HacError> {
        if data.len() != n * (n - 1) / 2 {
            return Err(HacError::BadCondensedLength { n, got: data.len() });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(HacError::BadDistance { index, value });
            }
        }
        Ok(Self { n, data, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn condensed(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.data[cidx2(self.n, i, j)]
        }
    }
}

/// Pairwise distances between matrix rows. Cosine distance requires every
/// row to have a nonzero norm; callers must drop garbage rows first.
pub fn pairwise_distances(
    rows: ArrayView2<'_, f64>,
    metric: Metric,
) -> Result<DistanceMatrix, HacError> {
    let n = rows.nrows();
    assert!(n >= 2, "need at least 2 rows, got {n}");
    let norms: Vec<f64> = rows.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    if metric == Metric::Cosine {
        let zero: Vec<usize> = (0..n).filter(|&i| norms[i] == 0.0).collect();
        if !zero.is_empty() {
            return Err(HacError::ZeroNormRows(zero));
        }
    }
    let data: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let a = rows.row(i);
            (i + 1..n)
                .map(|j| {
                    let b = rows.row(j);
                    match metric {
                        Metric::Euclidean => (&a - &b).mapv(|x| x * x).sum().sqrt(),
                        Metric::Manhattan => (&a - &b).mapv(f64::abs).sum(),
                        // Clamp: float error can push 1 - cos below zero for
                        // near-identical rows.
                        Metric::Cosine => (1.0 - a.dot(&b) / (norms[i] * norms[j])).max(0.0),
                    }
                })
                .collect::<Vec<f64>>()
        })
        .flatten()
        .collect();
    DistanceMatrix::from_condensed(n, data, metric)
}

/// One agglomeration step. Children are dendrogram node ids: leaves are
/// `0..n-1`, the k-th merge creates node `n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn from_merges(n: usize, merges: Vec<Merge>) -> Self {
        assert_eq!(merges.len(), n - 1);
        Self { n, merges }
    }

    pub fn n_leaves(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Condensed cophenetic distances: each pair gets the height of the merge
    /// that first united them. Fills exactly n(n-1)/2 cells overall.
    pub fn cophenetic(&self) -> Vec<f64> {
        let n = self.n;
        let mut coph = vec![0.0; n * (n - 1) / 2];
        let mut members: Vec<Option<Vec<usize>>> = (0..2 * n - 1)
            .map(|i| if i < n { Some(vec![i]) } else { None })
            .collect();
        for (k, m) in self.merges.iter().enumerate() {
            let a = members[m.left].take().expect("child used once");
            let b = members[m.right].take().expect("child used once");
            for &i in &a {
                for &j in &b {
                    coph[cidx2(n, i, j)] = m.height;
                }
            }
            let mut ab = a;
            ab.extend(b);
            members[n + k] = Some(ab);
        }
        coph
    }

    /// One merge per line: `left right height size`, heights with 17
    /// significant digits so they round-trip exactly.
    pub fn export(&self, out: &mut impl Write) -> io::Result<()> {
        for m in &self.merges {
            writeln!(out, "{} {} {:.16e} {}", m.left, m.right, m.height, m.size)?;
        }
        Ok(())
    }

    /// Parses the `export` format back; `n` is the leaf count the tree was
    /// built over.
    pub fn import(n: usize, text: &str) -> Result<Self, HacError> {
        let mut merges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = || HacError::BadDendrogramLine(i + 1);
            let mut parts = line.split_whitespace();
            let mut field = || parts.next().ok_or_else(bad);
            let left = field()?.parse().map_err(|_| bad())?;
            let right = field()?.parse().map_err(|_| bad())?;
            let height = field()?.parse().map_err(|_| bad())?;
            let size = field()?.parse().map_err(|_| bad())?;
            if parts.next().is_some() {
                return Err(bad());
            }
            merges.push(Merge { left, right, height, size });
        }
        if n == 0 || merges.len() != n - 1 {
            return Err(HacError::BadMergeCount { expected: n.max(1) - 1, found: merges.len() });
        }
        Ok(Self { n, merges })
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(slots: usize) -> Self {
        Self { parent: (0..slots).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, root_a: usize, root_b: usize, node: usize) {
        self.parent[root_a] = node;
        self.parent[root_b] = node;
    }
}

fn merge_dist(method: Linkage, d_xc: f64, d_yc: f64, nx: usize, ny: usize) -> f64 {
    match method {
        Linkage::Single => d_xc.min(d_yc),
        Linkage::Complete => d_xc.max(d_yc),
        Linkage::Average => (nx as f64 * d_xc + ny as f64 * d_yc) / ((nx + ny) as f64),
        Linkage::Weighted => 0.5 * (d_xc + d_yc),
    }
}

/// Nearest-neighbor-chain agglomeration, O(n^2) time, O(n) extra memory.
/// All four methods are reducible, so chain merges reproduce the global
/// merge order after the final sort by height.
pub fn linkage(d: &DistanceMatrix, method: Linkage) -> Dendrogram {
    let n = d.n();
    assert!(n >= 2, "need at least 2 points, got {n}");
    let mut dd = d.condensed().to_vec();
    let mut size = vec![1usize; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            let start = (0..n).find(|&i| size[i] > 0).expect("active cluster");
            chain.push(start);
        }
        loop {
            let top = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // Seed the scan with the previous chain element so ties keep the
            // chain reciprocal; otherwise the smallest index wins.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dd[cidx2(n, top, p)]);
            for c in 0..n {
                if size[c] == 0 || c == top || Some(c) == prev {
                    continue;
                }
                let dist = dd[cidx2(n, top, c)];
                if dist < best_d {
                    best_d = dist;
                    best = Some(c);
                }
            }
            let nn = best.expect("at least two active clusters");
            if Some(nn) == prev {
                chain.pop();
                chain.pop();
                let (x, y) = (top.min(nn), top.max(nn));
                raw.push((x, y, best_d));
                let (nx, ny) = (size[x], size[y]);
                // Slot y carries the merged cluster; slot x goes inactive.
                for c in 0..n {
                    if size[c] == 0 || c == x || c == y {
                        continue;
                    }
                    let d_xc = dd[cidx2(n, x, c)];
                    let iyc = cidx2(n, y, c);
                    dd[iyc] = merge_dist(method, d_xc, dd[iyc], nx, ny);
                }
                size[y] = nx + ny;
                size[x] = 0;
                break;
            }
            chain.push(nn);
        }
    }
    relabel(n, raw)
}

/// Sorts raw merges by height (stable, so chain order breaks exact ties)
/// and rewrites point-slot pairs into dendrogram node ids via union-find.
fn relabel(n: usize, mut raw: Vec<(usize, usize, f64)>) -> Dendrogram {
    raw.sort_by(|a, b| a.2.partial_cmp(&b.2).expect("finite heights"));
    let mut uf = UnionFind::new(2 * n - 1);
    let mut sizes = vec![1usize; 2 * n - 1];
    let mut used = vec![false; 2 * n - 1];
    let mut merges = Vec::with_capacity(n - 1);
    for (k, (x, y, height)) in raw.into_iter().enumerate() {
        let rx = uf.find(x);
        let ry = uf.find(y);
        debug_assert!(!used[rx] && !used[ry] && rx != ry);
        used[rx] = true;
        used[ry] = true;
        let (left, right) = (rx.min(ry), rx.max(ry));
        let node = n + k;
        sizes[node] = sizes[left] + sizes[right];
        uf.union(rx, ry, node);
        merges.push(Merge { left, right, height, size: sizes[node] });
    }
    Dendrogram { n, merges }
}

/// Pearson correlation between original and cophenetic distances.
pub fn cophenetic_corr(d: &DistanceMatrix, t: &Dendrogram) -> Result<f64, HacError> {
    assert_eq!(d.n(), t.n_leaves(), "matrix/dendrogram size mismatch");
    assert!(d.n() >= 3, "CPCC needs at least 3 points");
    let x = d.condensed();
    let y = t.cophenetic();
    let len = x.len() as f64;
    let mx = x.iter().sum::<f64>() / len;
    let my = y.iter().sum::<f64>() / len;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(&y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(HacError::DegenerateDistances);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Flat labeling: leaves share a label iff their cophenetic distance is at
/// most `threshold` (inclusive). Labels are dense, numbered by first
/// appearance in leaf order.
pub fn cut(t: &Dendrogram, threshold: f64) -> Vec<usize> {
    assert!(threshold >= 0.0, "threshold must be non-negative");
    let n = t.n;
    let mut uf = UnionFind::new(2 * n - 1);
    for (k, m) in t.merges.iter().enumerate() {
        if m.height > threshold {
            break; // heights are sorted
        }
        let rx = uf.find(m.left);
        let ry = uf.find(m.right);
        uf.union(rx, ry, n + k);
    }
    let mut labels = vec![0usize; n];
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (i, label) in labels.iter_mut().enumerate() {
        let root = uf.find(i);
        let next = seen.len();
        *label = *seen.entry(root).or_insert(next);
    }
    labels
}
