//! Independent oracles for the acceptance suite. Everything here recomputes
//! results from first principles (textbook formulas, exhaustive recursion,
//! brute-force scans) without touching the optimized library code paths.

#![allow(dead_code)]

use std::collections::HashMap;

use tweetclust::hac::{DistanceMatrix, Linkage};

// ---------------------------------------------------------------------------
// Set partitions

/// All partitions of `{0..n}` as restricted growth strings: `rgs[0] = 0` and
/// `rgs[k] <= max(rgs[..k]) + 1`. Their count is the n-th Bell number.
pub fn enumerate_partitions(n: usize) -> Vec<Vec<usize>> {
    assert!(n >= 1);
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            current[pos] = label;
            rec(current, pos + 1, max_used.max(label), out);
        }
    }
    if n == 1 {
        return vec![vec![0]];
    }
    rec(&mut current, 1, 0, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Literal-formula clustering metrics

/// Dense contingency counts built by first-appearance relabeling.
pub struct OracleTable {
    pub cells: Vec<Vec<u64>>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub n: u64,
}

pub fn oracle_table(truth: &[usize], pred: &[usize]) -> OracleTable {
    assert_eq!(truth.len(), pred.len());
    assert!(!truth.is_empty());
    let dense = |labels: &[usize]| {
        let mut map = HashMap::new();
        labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect::<Vec<usize>>()
    };
    let t = dense(truth);
    let p = dense(pred);
    let r = t.iter().max().unwrap() + 1;
    let c = p.iter().max().unwrap() + 1;
    let mut cells = vec![vec![0u64; c]; r];
    for (&i, &j) in t.iter().zip(&p) {
        cells[i][j] += 1;
    }
    let rows: Vec<u64> = cells.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<u64> = (0..c).map(|j| cells.iter().map(|row| row[j]).sum()).collect();
    OracleTable { cells, rows, cols, n: truth.len() as u64 }
}

fn entropy_of(marginals: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    -marginals
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / nf;
            p * p.ln()
        })
        .sum::<f64>()
}

/// h = 1 - H(C|K)/H(C), c = 1 - H(K|C)/H(K), v = 2hc/(h+c), straight from
/// the defining formulas with the stated degenerate conventions.
pub fn oracle_hcv(t: &OracleTable) -> (f64, f64, f64) {
    let nf = t.n as f64;
    let h_c = entropy_of(&t.rows, t.n);
    let h_k = entropy_of(&t.cols, t.n);
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let p = nij as f64 / nf;
                h_c_given_k -= p * (nij as f64 / t.cols[j] as f64).ln();
                h_k_given_c -= p * (nij as f64 / t.rows[i] as f64).ln();
            }
        }
    }
    let h = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let c = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    (h, c, v)
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// ARI = (Index - Expected) / (Max - Expected) over pair counts; the
/// Max = Expected degenerate case is decided in integer arithmetic.
pub fn oracle_ari(t: &OracleTable) -> f64 {
    assert!(t.n >= 2);
    let index: u64 = t.cells.iter().flatten().map(|&x| choose2(x)).sum();
    let sum_a: u64 = t.rows.iter().map(|&x| choose2(x)).sum();
    let sum_b: u64 = t.cols.iter().map(|&x| choose2(x)).sum();
    let pairs = choose2(t.n);
    if pairs * (sum_a + sum_b) == 2 * sum_a * sum_b {
        return if index * pairs == sum_a * sum_b { 1.0 } else { 0.0 };
    }
    let expected = (sum_a * sum_b) as f64 / pairs as f64;
    let max = (sum_a + sum_b) as f64 / 2.0;
    (index as f64 - expected) / (max - expected)
}

/// Exact binomial coefficient as f64; inputs stay tiny here.
fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// AMI = (MI - E[MI]) / (max(H(U),H(V)) - E[MI]) with E[MI] summed over the
/// hypergeometric distribution of each cell, written as explicit binomial
/// ratios. Conventions: identical trivial labelings score 1, any other
/// vanishing denominator scores 0.
pub fn oracle_ami(t: &OracleTable) -> f64 {
    assert!(t.n >= 2);
    let nf = t.n as f64;
    let h_u = entropy_of(&t.rows, t.n);
    let h_v = entropy_of(&t.cols, t.n);
    if h_u == 0.0 && h_v == 0.0 {
        return 1.0;
    }
    if t.rows.len() as u64 == t.n && t.cols.len() as u64 == t.n {
        return 1.0;
    }
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let p = nij as f64 / nf;
                mi += p * (nf * nij as f64 / (t.rows[i] as f64 * t.cols[j] as f64)).ln();
            }
        }
    }
    let mut emi = 0.0;
    for &ai in &t.rows {
        for &bj in &t.cols {
            let lower = 1.max((ai + bj).saturating_sub(t.n));
            for nij in lower..=ai.min(bj) {
                let prob =
                    binom(ai, nij) * binom(t.n - ai, bj - nij) / binom(t.n, bj);
                let term =
                    (nij as f64 / nf) * (nf * nij as f64 / (ai as f64 * bj as f64)).ln();
                emi += prob * term;
            }
        }
    }
    let denominator = h_u.max(h_v) - emi;
    if denominator.abs() < 1e-12 {
        return 0.0;
    }
    (mi - emi) / denominator
}

// ---------------------------------------------------------------------------
// Brute-force agglomeration

/// One oracle merge in the same node-id scheme as the library: leaves are
/// `0..n-1`, the k-th merge creates node `n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Global-minimum agglomeration, O(n^3): every step rescans all active pairs,
/// and inter-cluster distances are recomputed from the original point
/// distances (single/complete/average) or by the definitional halving
/// recursion (weighted).
pub fn naive_linkage(d: &DistanceMatrix, method: Linkage) -> Vec<OracleMerge> {
    let n = d.n();
    let mut members: HashMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            table.insert((i, j), d.get(i, j));
        }
    }
    let from_members = |a: &[usize], b: &[usize]| -> f64 {
        let cross = a.iter().flat_map(|&i| b.iter().map(move |&j| d.get(i, j)));
        match method {
            Linkage::Single => cross.fold(f64::INFINITY, f64::min),
            Linkage::Complete => cross.fold(0.0, f64::max),
            Linkage::Average => cross.sum::<f64>() / (a.len() * b.len()) as f64,
            Linkage::Weighted => unreachable!("weighted uses the recursion"),
        }
    };
    let mut merges = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut ids: Vec<usize> = members.keys().copied().collect();
        ids.sort_unstable();
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in ids.iter().enumerate() {
            for &b in &ids[ai + 1..] {
                let dist = table[&(a, b)];
                if best.is_none_or(|(bd, _, _)| dist < bd) {
                    best = Some((dist, a, b));
                }
            }
        }
        let (height, a, b) = best.unwrap();
        let node = n + k;
        let ma = members.remove(&a).unwrap();
        let mb = members.remove(&b).unwrap();
        let mut mab = ma;
        mab.extend(mb);
        for &c in members.keys() {
            let dist = if method == Linkage::Weighted {
                0.5 * (table[&(a.min(c), a.max(c))] + table[&(b.min(c), b.max(c))])
            } else {
                from_members(&mab, &members[&c])
            };
            table.insert((c.min(node), c.max(node)), dist);
        }
        members.insert(node, mab);
        merges.push(OracleMerge { left: a, right: b, height });
    }
    merges
}

/// Flat cut over oracle merges: union leaves across merges with height at
/// most `threshold` (inclusive), then number components by first appearance
/// in leaf order.
pub fn oracle_cut(n: usize, merges: &[OracleMerge], threshold: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (k, m) in merges.iter().enumerate() {
        if m.height <= threshold {
            let ra = find(&mut parent, m.left);
            let rb = find(&mut parent, m.right);
            parent[ra] = n + k;
            parent[rb] = n + k;
        }
    }
    let mut labels = vec![0usize; n];
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (i, slot) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, i);
        let next = seen.len();
        *slot = *seen.entry(root).or_insert(next);
    }
    labels
}

// ---------------------------------------------------------------------------
// Minimum spanning tree minimax distances

/// Condensed vector of minimax path distances: entry (i, j) is the maximum
/// edge weight on the unique MST path between i and j (Prim's algorithm plus
/// a DFS from every source).
pub fn mst_minimax(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.n();
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); n];
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    in_tree[0] = true;
    for (j, slot) in best.iter_mut().enumerate().skip(1) {
        *slot = (d.get(0, j), 0);
    }
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.partial_cmp(&best[b].0).unwrap())
            .unwrap();
        in_tree[v] = true;
        let (w, u) = best[v];
        adjacency[u].push((v, w));
        adjacency[v].push((u, w));
        for j in 0..n {
            if !in_tree[j] && d.get(v, j) < best[j].0 {
                best[j] = (d.get(v, j), v);
            }
        }
    }

    let mut out = vec![0.0; n * (n - 1) / 2];
    let condensed_index = |i: usize, j: usize| -> usize {
        let (i, j) = (i.min(j), i.max(j));
        i * n - i * (i + 1) / 2 + (j - i - 1)
    };
    for source in 0..n {
        // DFS carrying the running maximum edge weight from `source`.
        let mut stack = vec![(source, f64::NEG_INFINITY)];
        let mut visited = vec![false; n];
        visited[source] = true;
        while let Some((v, max_w)) = stack.pop() {
            for &(u, w) in &adjacency[v] {
                if !visited[u] {
                    visited[u] = true;
                    let path_max = max_w.max(w);
                    if u > source {
                        out[condensed_index(source, u)] = path_max;
                    }
                    stack.push((u, path_max));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Exhaustive edit distance

/// Edit distance straight from the recursive definition (suffix costs with
/// memoization); insert/delete cost 1, substitution costs `sub`. Limited to
/// strings of length at most 8 so the memo fits on the stack.
pub fn recursive_levenshtein(a: &[u8], b: &[u8], sub: usize) -> usize {
    const UNSET: usize = usize::MAX;
    assert!(a.len() <= 8 && b.len() <= 8, "oracle capped at length 8");
    let mut memo = [UNSET; 81];
    fn rec(a: &[u8], b: &[u8], ia: usize, ib: usize, sub: usize, memo: &mut [usize; 81]) -> usize {
        let slot = ia * 9 + ib;
        if memo[slot] != UNSET {
            return memo[slot];
        }
        let value = if ia == a.len() {
            b.len() - ib
        } else if ib == b.len() {
            a.len() - ia
        } else {
            let delete = rec(a, b, ia + 1, ib, sub, memo) + 1;
            let insert = rec(a, b, ia, ib + 1, sub, memo) + 1;
            let keep_or_replace =
                rec(a, b, ia + 1, ib + 1, sub, memo) + if a[ia] == b[ib] { 0 } else { sub };
            delete.min(insert).min(keep_or_replace)
        };
        memo[slot] = value;
        value
    }
    rec(a, b, 0, 0, sub, &mut memo)
}
