//! Extrinsic (homogeneity/completeness/V, ARI, AMI) and intrinsic
//! (silhouette) clustering evaluation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hac::DistanceMatrix;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label slices differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("silhouette undefined")]
    SilhouetteUndefined,
}

/// r x c co-occurrence counts between true classes (rows) and predicted
/// clusters (columns), with marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    table: Vec<Vec<u64>>,
    a: Vec<u64>,
    b: Vec<u64>,
    n: u64,
}

impl Contingency {
    pub fn table(&self) -> &[Vec<u64>] {
        &self.table
    }

    pub fn row_marginals(&self) -> &[u64] {
        &self.a
    }

    pub fn col_marginals(&self) -> &[u64] {
        &self.b
    }

    pub fn total(&self) -> u64 {
        self.n
    }
}

/// Builds the contingency table. Label values need not be dense; rows and
/// columns are ordered by ascending label value.
pub fn contingency(
    true_labels: &[usize],
    pred_labels: &[usize],
) -> Result<Contingency, MetricsError> {
    if true_labels.len() != pred_labels.len() {
        return Err(MetricsError::LengthMismatch(
            true_labels.len(),
            pred_labels.len(),
        ));
    }
    if true_labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let row_of: BTreeMap<usize, usize> = {
        let set: std::collections::BTreeSet<usize> = true_labels.iter().copied().collect();
        set.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let col_of: BTreeMap<usize, usize> = {
        let set: std::collections::BTreeSet<usize> = pred_labels.iter().copied().collect();
        set.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let (r, c) = (row_of.len(), col_of.len());
    let mut table = vec![vec![0u64; c]; r];
    for (&t, &p) in true_labels.iter().zip(pred_labels) {
        table[row_of[&t]][col_of[&p]] += 1;
    }
    let a: Vec<u64> = table.iter().map(|row| row.iter().sum()).collect();
    let b: Vec<u64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    Ok(Contingency { table, a, b, n: true_labels.len() as u64 })
}

/// Entropy of a marginal distribution, natural log.
fn entropy(marginals: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    marginals
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity, completeness, and their harmonic mean (V-measure).
/// Conventions: h = 1 when H(C) = 0, c = 1 when H(K) = 0, v = 0 when
/// h + c = 0. All entropy ratios, so the log base cancels.
pub fn homogeneity_completeness_v(c: &Contingency) -> (f64, f64, f64) {
    let nf = c.n as f64;
    let h_c = entropy(&c.a, c.n);
    let h_k = entropy(&c.b, c.n);
    // H(C|K) = -sum_ij (n_ij/N) ln(n_ij/b_j); H(K|C) symmetric.
    let (mut h_c_given_k, mut h_k_given_c) = (0.0, 0.0);
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let p = nij as f64 / nf;
            h_c_given_k -= p * (nij as f64 / c.b[j] as f64).ln();
            h_k_given_c -= p * (nij as f64 / c.a[i] as f64).ln();
        }
    }
    let h = if h_c == 0.0 { 1.0 } else { (1.0 - h_c_given_k / h_c).clamp(0.0, 1.0) };
    let k = if h_k == 0.0 { 1.0 } else { (1.0 - h_k_given_c / h_k).clamp(0.0, 1.0) };
    let v = if h + k == 0.0 { 0.0 } else { 2.0 * h * k / (h + k) };
    (h, k, v)
}

fn comb2(x: u64) -> u128 {
    let x = x as u128;
    if x < 2 {
        0
    } else {
        x * (x - 1) / 2
    }
}

/// Adjusted Rand index. The degenerate Max = Expected case is decided in
/// exact integer arithmetic: both trivial labelings give 1.0, otherwise 0.0.
pub fn adjusted_rand_index(c: &Contingency) -> f64 {
    assert!(c.n >= 2, "ARI needs at least 2 items");
    let index: u128 = c.table.iter().flatten().map(|&nij| comb2(nij)).sum();
    let sum_a: u128 = c.a.iter().map(|&x| comb2(x)).sum();
    let sum_b: u128 = c.b.iter().map(|&x| comb2(x)).sum();
    let c2n = comb2(c.n);
    // Max = (sum_a + sum_b)/2, Expected = sum_a*sum_b/C(N,2); equality and
    // Index = Expected are tested exactly to dodge float cancellation.
    if c2n * (sum_a + sum_b) == 2 * sum_a * sum_b {
        return if index * c2n == sum_a * sum_b { 1.0 } else { 0.0 };
    }
    let expected = sum_a as f64 * sum_b as f64 / c2n as f64;
    let max = (sum_a + sum_b) as f64 / 2.0;
    (index as f64 - expected) / (max - expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmiNormalizer {
    #[default]
    Max,
    Mean,
}

/// Mutual information of the table, natural log.
fn mutual_info(c: &Contingency) -> f64 {
    let nf = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let p = nij as f64 / nf;
            mi += p * (nf * nij as f64 / (c.a[i] as f64 * c.b[j] as f64)).ln();
        }
    }
    mi
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// Exact expectation of MI over random tables with the given marginals,
/// via the hypergeometric distribution of each cell.
fn expected_mutual_info(c: &Contingency) -> f64 {
    let n = c.n as usize;
    let nf = c.n as f64;
    let lf = log_factorials(n);
    let mut emi = 0.0;
    for &ai in &c.a {
        let ai = ai as usize;
        for &bj in &c.b {
            let bj = bj as usize;
            let lower = 1usize.max((ai + bj).saturating_sub(n));
            let upper = ai.min(bj);
            for nij in lower..=upper {
                let nijf = nij as f64;
                let term = (nijf / nf) * ((nf * nijf) / (ai as f64 * bj as f64)).ln();
                let log_p = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj]
                    - lf[n]
                    - lf[nij]
                    - lf[ai - nij]
                    - lf[bj - nij]
                    - lf[n + nij - ai - bj];
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

/// AMI with the max-entropy normalizer (see [`adjusted_mutual_info_with`]).
pub fn adjusted_mutual_info(c: &Contingency) -> f64 {
    adjusted_mutual_info_with(c, AmiNormalizer::Max)
}

/// AMI = (MI - E[MI]) / (norm - E[MI]). Conventions: 1.0 when both labelings
/// are trivial and therefore identical (single cluster on both sides, or all
/// singletons on both sides), 0.0 when the denominator vanishes otherwise.
pub fn adjusted_mutual_info_with(c: &Contingency, normalizer: AmiNormalizer) -> f64 {
    assert!(c.n >= 2, "AMI needs at least 2 items");
    let h_u = entropy(&c.a, c.n);
    let h_v = entropy(&c.b, c.n);
    if h_u == 0.0 && h_v == 0.0 {
        return 1.0;
    }
    // Both all-singletons: E[MI] equals MI exactly, so the adjusted score is
    // 0/0; the labelings are identical, so score them as a perfect match.
    if c.a.len() == c.n as usize && c.b.len() == c.n as usize {
        return 1.0;
    }
    let norm = match normalizer {
        AmiNormalizer::Max => h_u.max(h_v),
        AmiNormalizer::Mean => 0.5 * (h_u + h_v),
    };
    let mi = mutual_info(c);
    let emi = expected_mutual_info(c);
    let denominator = norm - emi;
    if denominator.abs() < 1e-12 {
        return 0.0;
    }
    (mi - emi) / denominator
}

/// Mean silhouette coefficient. Points in singleton clusters score 0.
/// Requires 2 <= k <= n-1 distinct labels.
pub fn silhouette(d: &DistanceMatrix, labels: &[usize]) -> Result<f64, MetricsError> {
    let n = d.n();
    if labels.len() != n {
        return Err(MetricsError::LengthMismatch(n, labels.len()));
    }
    let mut dense = BTreeMap::new();
    for &l in labels {
        let next = dense.len();
        dense.entry(l).or_insert(next);
    }
    let k = dense.len();
    if k < 2 || k > n - 1 {
        return Err(MetricsError::SilhouetteUndefined);
    }
    let cluster: Vec<usize> = labels.iter().map(|l| dense[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        if sizes[cluster[i]] == 1 {
            continue; // singleton contributes 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if j != i {
                sums[cluster[j]] += d.get(i, j);
            }
        }
        let a = sums[cluster[i]] / (sizes[cluster[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != cluster[i])
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hac::{pairwise_distances, Metric};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_d(points: &[f64]) -> DistanceMatrix {
        let rows = ndarray::Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap();
        pairwise_distances(rows.view(), Metric::Euclidean).unwrap()
    }

    #[test]
    fn contingency_examples() {
        let c = contingency(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(c.table(), &[vec![2, 0], vec![0, 2]]);
        let c = contingency(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(c.table(), &[vec![1, 1], vec![1, 1]]);
        assert_eq!(c.row_marginals(), &[2, 2]);
        assert_eq!(c.col_marginals(), &[2, 2]);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn contingency_errors() {
        assert!(matches!(
            contingency(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch(2, 1))
        ));
        assert!(matches!(contingency(&[], &[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn hcv_examples() {
        let (h, c, v) = homogeneity_completeness_v(&contingency(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap());
        assert_eq!((h, c, v), (1.0, 1.0, 1.0));

        let (h, c, v) = homogeneity_completeness_v(&contingency(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap());
        assert_eq!((h, c, v), (0.0, 1.0, 0.0));

        let (h, c, v) = homogeneity_completeness_v(&contingency(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap());
        assert_abs_diff_eq!(h, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn hcv_base_invariant() {
        // Recompute with log2 entropies; ratios must match the natural-log
        // implementation.
        let c = contingency(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 2, 2, 0]).unwrap();
        let (h, k, v) = homogeneity_completeness_v(&c);
        let nf = c.total() as f64;
        let ent2 = |m: &[u64]| -> f64 {
            m.iter()
                .filter(|&&x| x > 0)
                .map(|&x| {
                    let p = x as f64 / nf;
                    -p * p.log2()
                })
                .sum()
        };
        let (mut hck, mut hkc) = (0.0, 0.0);
        for (i, row) in c.table().iter().enumerate() {
            for (j, &nij) in row.iter().enumerate() {
                if nij > 0 {
                    let p = nij as f64 / nf;
                    hck -= p * (nij as f64 / c.col_marginals()[j] as f64).log2();
                    hkc -= p * (nij as f64 / c.row_marginals()[i] as f64).log2();
                }
            }
        }
        let h2 = 1.0 - hck / ent2(c.row_marginals());
        let k2 = 1.0 - hkc / ent2(c.col_marginals());
        assert_abs_diff_eq!(h, h2, epsilon = 1e-12);
        assert_abs_diff_eq!(k, k2, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.0 * h2 * k2 / (h2 + k2), epsilon = 1e-12);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&contingency(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap()), 1.0);
        assert_abs_diff_eq!(
            adjusted_rand_index(&contingency(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap()),
            -0.5,
            epsilon = 1e-12
        );
        // Degenerate Max = Expected cases, decided exactly.
        assert_eq!(adjusted_rand_index(&contingency(&[0, 1, 2], &[0, 1, 2]).unwrap()), 1.0);
        assert_eq!(adjusted_rand_index(&contingency(&[0, 0, 0], &[0, 0, 0]).unwrap()), 1.0);
        assert_eq!(adjusted_rand_index(&contingency(&[0, 1, 2], &[0, 0, 0]).unwrap()), 0.0);
    }

    #[test]
    fn ari_mean_near_zero_under_permutation() {
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let mut pred = truth.clone();
            pred.shuffle(&mut rng);
            sum += adjusted_rand_index(&contingency(&truth, &pred).unwrap());
        }
        let mean = sum / trials as f64;
        assert!(mean.abs() < 0.02, "mean ARI {mean}");
    }

    #[test]
    fn ami_examples() {
        assert_eq!(adjusted_mutual_info(&contingency(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap()), 1.0);
        // Both trivial single-cluster labelings.
        assert_eq!(adjusted_mutual_info(&contingency(&[0, 0, 0], &[5, 5, 5]).unwrap()), 1.0);
        // Identical all-singleton labelings: E[MI] = MI makes the adjusted
        // ratio 0/0, but the labelings match perfectly, so score 1.
        assert_eq!(adjusted_mutual_info(&contingency(&[0, 1, 2], &[0, 1, 2]).unwrap()), 1.0);
        // All-singletons against a single cluster is not a match.
        assert_eq!(adjusted_mutual_info(&contingency(&[0, 1, 2], &[0, 0, 0]).unwrap()), 0.0);
    }

    #[test]
    fn ami_mean_near_zero_under_permutation() {
        let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sum = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let mut pred = truth.clone();
            pred.shuffle(&mut rng);
            sum += adjusted_mutual_info(&contingency(&truth, &pred).unwrap());
        }
        let mean = sum / trials as f64;
        assert!(mean.abs() < 0.02, "mean AMI {mean}");
    }

    #[test]
    fn ami_normalizer_variants() {
        // Asymmetric entropies and genuinely informative clustering: the
        // larger normalizer must yield the smaller score.
        let c = contingency(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 1]).unwrap();
        let max = adjusted_mutual_info_with(&c, AmiNormalizer::Max);
        let mean = adjusted_mutual_info_with(&c, AmiNormalizer::Mean);
        assert!(max < mean, "max {max} mean {mean}");
        assert!(max > 0.0);
        // Identical nontrivial labelings score 1 under both.
        let c = contingency(&[0, 0, 1, 1, 1], &[7, 7, 2, 2, 2]).unwrap();
        assert_abs_diff_eq!(adjusted_mutual_info_with(&c, AmiNormalizer::Max), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(adjusted_mutual_info_with(&c, AmiNormalizer::Mean), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn silhouette_example() {
        let d = one_d(&[0.0, 0.1, 10.0, 10.1]);
        let s = silhouette(&d, &[0, 0, 1, 1]).unwrap();
        assert_abs_diff_eq!(s, 0.989_999_75, epsilon = 1e-8);
    }

    #[test]
    fn silhouette_identical_points_far_clusters() {
        let d = one_d(&[0.0, 0.0, 1000.0, 1000.0]);
        assert_eq!(silhouette(&d, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn silhouette_singletons_contribute_zero() {
        let d = one_d(&[0.0, 5.0, 10.0, 10.1]);
        // Point 0 and 1 are singletons (s = 0); points 2,3 are a tight pair.
        let s = silhouette(&d, &[0, 1, 2, 2]).unwrap();
        let s23 = {
            // a = 0.1; b = min(mean to {0}, mean to {5}) per point.
            let s2 = (5.0 - 0.1) / 5.0;
            let s3 = (5.1 - 0.1) / 5.1;
            (s2 + s3) / 4.0
        };
        assert_abs_diff_eq!(s, s23, epsilon = 1e-12);
    }

    #[test]
    fn silhouette_undefined_outside_k_range() {
        let d = one_d(&[0.0, 1.0, 2.0]);
        let err = silhouette(&d, &[0, 0, 0]).unwrap_err();
        assert_eq!(err.to_string(), "silhouette undefined");
        let err = silhouette(&d, &[0, 1, 2]).unwrap_err();
        assert_eq!(err.to_string(), "silhouette undefined");
        assert!(silhouette(&d, &[0, 0, 1]).is_ok());
    }

    /// Random labelings of up to 12 items over up to 4 label values.
    fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..4, n),
                proptest::collection::vec(0usize..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn marginals_match_direct_counts((t, p) in labels_strategy()) {
            let c = contingency(&t, &p).unwrap();
            prop_assert_eq!(c.row_marginals().iter().sum::<u64>(), t.len() as u64);
            prop_assert_eq!(c.col_marginals().iter().sum::<u64>(), t.len() as u64);
            let mut sorted = t.clone();
            sorted.sort_unstable();
            sorted.dedup();
            for (i, label) in sorted.iter().enumerate() {
                let direct = t.iter().filter(|&&x| x == *label).count() as u64;
                prop_assert_eq!(c.row_marginals()[i], direct);
            }
        }

        #[test]
        fn scores_invariant_under_relabeling((t, p) in labels_strategy(), seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..8).collect();
            perm.shuffle(&mut rng);
            let t2: Vec<usize> = t.iter().map(|&x| perm[x]).collect();
            let p2: Vec<usize> = p.iter().map(|&x| perm[x]).collect();
            let c1 = contingency(&t, &p).unwrap();
            let c2 = contingency(&t2, &p2).unwrap();
            let (h1, k1, v1) = homogeneity_completeness_v(&c1);
            let (h2, k2, v2) = homogeneity_completeness_v(&c2);
            prop_assert!((h1 - h2).abs() < 1e-12);
            prop_assert!((k1 - k2).abs() < 1e-12);
            prop_assert!((v1 - v2).abs() < 1e-12);
            prop_assert!((adjusted_rand_index(&c1) - adjusted_rand_index(&c2)).abs() < 1e-12);
            prop_assert!((adjusted_mutual_info(&c1) - adjusted_mutual_info(&c2)).abs() < 1e-12);
        }

        #[test]
        fn v_symmetric_h_c_swap((t, p) in labels_strategy()) {
            let (h1, c1, v1) = homogeneity_completeness_v(&contingency(&t, &p).unwrap());
            let (h2, c2, v2) = homogeneity_completeness_v(&contingency(&p, &t).unwrap());
            prop_assert!((h1 - c2).abs() < 1e-12);
            prop_assert!((c1 - h2).abs() < 1e-12);
            prop_assert!((v1 - v2).abs() < 1e-12);
        }

        #[test]
        fn identical_nondegenerate_labelings_score_one(
            t in (3usize..10).prop_flat_map(|n| proptest::collection::vec(0usize..3, n)),
        ) {
            let k = {
                let mut s = t.clone();
                s.sort_unstable();
                s.dedup();
                s.len()
            };
            prop_assume!(k >= 2 && k < t.len());
            let c = contingency(&t, &t).unwrap();
            let (h, cc, v) = homogeneity_completeness_v(&c);
            prop_assert_eq!((h, cc, v), (1.0, 1.0, 1.0));
            prop_assert_eq!(adjusted_rand_index(&c), 1.0);
            prop_assert!((adjusted_mutual_info(&c) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn ami_bounded_by_nmi_max((t, p) in labels_strategy()) {
            let c = contingency(&t, &p).unwrap();
            let h_u = entropy(c.row_marginals(), c.total());
            let h_v = entropy(c.col_marginals(), c.total());
            prop_assume!(h_u.max(h_v) > 0.0);
            let nmi_max = mutual_info(&c) / h_u.max(h_v);
            let ami = adjusted_mutual_info(&c);
            prop_assert!(ami <= nmi_max + 1e-9, "ami {} nmi {}", ami, nmi_max);
        }
    }
}
