//! Classification quality, agreement, and feature-selection stability.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Selected feature subsets from R runs over M features. Indices are
/// zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCollection {
    subsets: Vec<BTreeSet<usize>>,
    total_features: usize,
}

impl SubsetCollection {
    pub fn new<I, S>(subsets: I, total_features: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = usize>,
    {
        let subsets: Vec<BTreeSet<usize>> =
            subsets.into_iter().map(|s| s.into_iter().collect()).collect();
        if let Some(&k) = subsets.iter().flatten().find(|&&k| k >= total_features) {
            return Err(Error::Domain(format!(
                "feature index {k} out of range for {total_features} features"
            )));
        }
        Ok(Self {
            subsets,
            total_features,
        })
    }

    pub fn subsets(&self) -> &[BTreeSet<usize>] {
        &self.subsets
    }

    pub fn total_features(&self) -> usize {
        self.total_features
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Mean subset size.
    pub fn mean_size(&self) -> f64 {
        if self.subsets.is_empty() {
            return 0.0;
        }
        self.subsets.iter().map(BTreeSet::len).sum::<usize>() as f64 / self.subsets.len() as f64
    }

    fn mean_pairwise(&self, score: impl Fn(&BTreeSet<usize>, &BTreeSet<usize>) -> Result<f64>) -> Result<f64> {
        let r = self.subsets.len();
        if r < 2 {
            return Err(Error::UndefinedMetric(format!("stability needs at least 2 subsets, got {r}")));
        }
        let mut total = 0.0;
        for i in 0..r {
            for j in i + 1..r {
                total += score(&self.subsets[i], &self.subsets[j])?;
            }
        }
        Ok(total / (r * (r - 1) / 2) as f64)
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::UndefinedMetric("empty input".into()));
    }
    Ok(())
}

/// Fraction of mismatched labels.
pub fn error_rate(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), truth.len())?;
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Area under the ROC curve as the Mann–Whitney statistic; tied scores
/// count one half.
pub fn auc(scores: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t > 0.0).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of average ranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + end) as f64 / 2.0 + 1.0;
        let pos_in_group = order[start..=end].iter().filter(|&&i| truth[i] > 0.0).count();
        rank_sum += avg_rank * pos_in_group as f64;
        start = end + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Cohen's κ with its asymptotic standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    /// √(p_o(1 − p_o) / (n(1 − p_e)²))
    pub stderr: f64,
}

impl Kappa {
    /// Two-sided 95% interval κ ± 1.96·stderr.
    pub fn interval95(&self) -> (f64, f64) {
        (self.kappa - 1.96 * self.stderr, self.kappa + 1.96 * self.stderr)
    }
}

pub fn cohen_kappa(predicted: &[f64], truth: &[f64]) -> Result<Kappa> {
    check_lengths(predicted.len(), truth.len())?;
    let n = truth.len() as f64;
    let p_o = predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n;
    let pred_pos = predicted.iter().filter(|&&p| p > 0.0).count() as f64 / n;
    let true_pos = truth.iter().filter(|&&t| t > 0.0).count() as f64 / n;
    let p_e = pred_pos * true_pos + (1.0 - pred_pos) * (1.0 - true_pos);
    if p_e >= 1.0 {
        return Err(Error::UndefinedMetric(
            "kappa is undefined when both raters use a single category".into(),
        ));
    }
    Ok(Kappa {
        kappa: (p_o - p_e) / (1.0 - p_e),
        stderr: (p_o * (1.0 - p_o) / (n * (1.0 - p_e).powi(2))).sqrt(),
    })
}

/// Mean pairwise Jaccard index r_ij / (r_i + r_j − r_ij).
pub fn jaccard_stability(f: &SubsetCollection) -> Result<f64> {
    f.mean_pairwise(|a, b| {
        if a.is_empty() || b.is_empty() {
            return Err(Error::UndefinedMetric("Jaccard index of an empty subset".into()));
        }
        let common = a.intersection(b).count() as f64;
        Ok(common / (a.len() as f64 + b.len() as f64 - common))
    })
}

/// Mean pairwise Pearson correlation of subset indicator vectors,
/// (M·r_ij − r_i·r_j) / √(r_i r_j (M − r_i)(M − r_j)).
pub fn pearson_stability(f: &SubsetCollection) -> Result<f64> {
    let m = f.total_features as f64;
    f.mean_pairwise(|a, b| {
        let (ri, rj) = (a.len() as f64, b.len() as f64);
        let denom = (ri * rj * (m - ri) * (m - rj)).sqrt();
        if !(denom > 0.0) {
            return Err(Error::UndefinedMetric(format!(
                "Pearson index needs subset sizes strictly between 0 and {m}"
            )));
        }
        let common = a.intersection(b).count() as f64;
        Ok((m * common - ri * rj) / denom)
    })
}

/// Fraction of subsets containing each feature.
pub fn selection_frequency(f: &SubsetCollection) -> Vec<f64> {
    let mut counts = vec![0usize; f.total_features];
    for &k in f.subsets.iter().flatten() {
        counts[k] += 1;
    }
    let r = f.subsets.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / r).collect()
}

/// Critical difference q_α √(p(p + 1) / (6N)) for comparing p methods over N
/// datasets.
pub fn friedman_cd(num_algorithms: usize, num_datasets: usize, q_alpha: f64) -> Result<f64> {
    if num_algorithms < 2 || num_datasets < 1 || !(q_alpha > 0.0) {
        return Err(Error::Domain(
            "critical difference needs p ≥ 2, N ≥ 1 and q > 0".into(),
        ));
    }
    let p = num_algorithms as f64;
    Ok(q_alpha * (p * (p + 1.0) / (6.0 * num_datasets as f64)).sqrt())
}

/// Error rate, AUC and κ of one set of predictions. AUC and κ are `None`
/// when the evaluation set makes them undefined (a single class, or a single
/// predicted category on both sides).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub error_rate: f64,
    pub auc: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_stderr: Option<f64>,
}

impl EvalReport {
    /// `scores` rank the positive class, e.g. predicted probabilities.
    pub fn compute(predicted: &[f64], scores: &[f64], truth: &[f64]) -> Result<Self> {
        let error_rate = error_rate(predicted, truth)?;
        check_lengths(scores.len(), truth.len())?;
        let auc = match auc(scores, truth) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        let kappa = match cohen_kappa(predicted, truth) {
            Ok(k) => Some(k),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            n: truth.len(),
            error_rate,
            auc,
            kappa: kappa.map(|k| k.kappa),
            kappa_stderr: kappa.map(|k| k.stderr),
        })
    }

    pub fn accuracy(&self) -> f64 {
        1.0 - self.error_rate
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn sets(v: &[&[usize]], m: usize) -> SubsetCollection {
        SubsetCollection::new(v.iter().map(|s| s.iter().copied()), m).unwrap()
    }

    #[test]
    fn error_rate_examples() {
        let t = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        assert_eq!(error_rate(&t, &t).unwrap(), 0.0);
        let flipped: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_eq!(error_rate(&flipped, &t).unwrap(), 1.0);
        let mut three = t;
        for v in &mut three[..3] {
            *v = -*v;
        }
        assert_abs_diff_eq!(error_rate(&three, &t).unwrap(), 0.3, epsilon = 1e-15);
        assert!(error_rate(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        let y = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &y).unwrap(), 0.75);
        assert_eq!(auc(&[2.0, 3.0, 1.0, 0.0], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &y).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn kappa_examples() {
        // TP=40, TN=30, FP=10, FN=20
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (p, t, n) in [(1.0, 1.0, 40), (-1.0, -1.0, 30), (1.0, -1.0, 10), (-1.0, 1.0, 20)] {
            pred.extend(std::iter::repeat_n(p, n));
            truth.extend(std::iter::repeat_n(t, n));
        }
        let k = cohen_kappa(&pred, &truth).unwrap();
        assert_abs_diff_eq!(k.kappa, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(k.stderr, (0.21f64 / 25.0).sqrt(), epsilon = 1e-12);

        let y = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(cohen_kappa(&y, &y).unwrap().kappa, 1.0);
        // half agreement with balanced marginals is chance level
        assert_eq!(cohen_kappa(&[1.0, 1.0, -1.0, -1.0], &y).unwrap().kappa, 0.0);
        assert!(matches!(
            cohen_kappa(&[1.0, 1.0], &[1.0, 1.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn stability_examples() {
        assert_eq!(jaccard_stability(&sets(&[&[1, 2, 3], &[2, 3, 4]], 5)).unwrap(), 0.5);
        assert_eq!(jaccard_stability(&sets(&[&[1, 2], &[1, 2], &[1, 2]], 5)).unwrap(), 1.0);
        assert_eq!(jaccard_stability(&sets(&[&[0], &[1], &[2]], 5)).unwrap(), 0.0);
        assert!(jaccard_stability(&sets(&[&[0], &[]], 5)).is_err());
        assert!(jaccard_stability(&sets(&[&[0]], 5)).is_err());

        assert_eq!(pearson_stability(&sets(&[&[1, 2], &[1, 3]], 10)).unwrap(), 0.375);
        assert_eq!(pearson_stability(&sets(&[&[0, 1], &[2, 3]], 4)).unwrap(), -1.0);
        assert_abs_diff_eq!(
            pearson_stability(&sets(&[&[4, 7, 8], &[4, 7, 8]], 12)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(pearson_stability(&sets(&[&[0, 1, 2, 3], &[1]], 4)).is_err());
    }

    #[test]
    fn frequency_and_cd() {
        let f = sets(&[&[0, 1], &[0], &[0, 1], &[0], &[0, 1]], 3);
        assert_eq!(selection_frequency(&f), vec![1.0, 0.6, 0.0]);
        assert_abs_diff_eq!(friedman_cd(6, 14, 2.576).unwrap(), 1.82, epsilon = 0.005);
        assert_abs_diff_eq!(friedman_cd(2, 6, 1.0).unwrap(), (1.0f64 / 6.0).sqrt(), epsilon = 1e-15);
        let cd = friedman_cd(5, 3, 2.0).unwrap();
        assert_abs_diff_eq!(friedman_cd(5, 12, 2.0).unwrap(), cd / 2.0, epsilon = 1e-15);
        assert!(SubsetCollection::new([vec![3usize]], 3).is_err());
    }

    fn collection() -> impl Strategy<Value = (Vec<Vec<usize>>, usize)> {
        (4usize..12).prop_flat_map(|m| {
            (prop::collection::vec(prop::collection::btree_set(0..m, 1..m), 2..6), Just(m))
                .prop_map(|(s, m)| (s.into_iter().map(|s| s.into_iter().collect()).collect(), m))
        })
    }

    proptest! {
        #[test]
        fn stability_ranges_and_invariance((subsets, m) in collection(), shift in 0usize..12) {
            let f = SubsetCollection::new(subsets.clone(), m).unwrap();
            let j = jaccard_stability(&f).unwrap();
            let p = pearson_stability(&f).unwrap();
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&p));

            let mut reversed = subsets.clone();
            reversed.reverse();
            let relabel: Vec<Vec<usize>> = reversed
                .iter()
                .map(|s| s.iter().map(|&k| (k + shift) % m).collect())
                .collect();
            let g = SubsetCollection::new(relabel, m).unwrap();
            prop_assert!((jaccard_stability(&g).unwrap() - j).abs() < 1e-12);
            prop_assert!((pearson_stability(&g).unwrap() - p).abs() < 1e-12);
        }

        #[test]
        fn auc_of_negated_scores(
            pairs in prop::collection::vec((-3i32..3, any::<bool>()), 2..30)
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { -1.0 }).collect();
            prop_assume!(y.contains(&1.0) && y.contains(&-1.0));
            let a = auc(&scores, &y).unwrap();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((auc(&neg, &y).unwrap() - (1.0 - a)).abs() < 1e-12);

            let pred: Vec<f64> = scores.iter().map(|&s| if s >= 0.0 { 1.0 } else { -1.0 }).collect();
            let r = EvalReport::compute(&pred, &scores, &y).unwrap();
            let acc = pred.iter().zip(&y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64;
            prop_assert!((r.error_rate + acc - 1.0).abs() < 1e-15);
        }
    }
}
