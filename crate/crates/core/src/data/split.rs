use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dataset;

/// Disjoint sorted train and test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub splits: Vec<Split>,
    /// Seed of the shuffle, if any.
    pub seed: Option<u64>,
}

/// n folds, fold i holding out sample i.
pub fn loocv_splits(n: usize) -> Result<SplitPlan> {
    if n < 2 {
        return Err(Error::Domain(format!("leave-one-out needs at least 2 samples, got {n}")));
    }
    let splits = (0..n)
        .map(|i| Split {
            train: (0..n).filter(|&j| j != i).collect(),
            test: vec![i],
        })
        .collect();
    Ok(SplitPlan { splits, seed: None })
}

/// Row indices of each class in a seeded random order: (positives, negatives).
fn shuffled_classes(dataset: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..dataset.num_samples()).partition(|&i| dataset.y[i] > 0.0);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    (pos, neg)
}

fn assemble(classes: [(&[usize], usize); 2]) -> Split {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, k) in classes {
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// One split keeping `train_fraction` of each class (rounded) for training.
pub fn stratified_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if !dataset.has_both_classes() {
        return Err(Error::DegenerateModel("both classes required".into()));
    }
    let (pos, neg) = shuffled_classes(dataset, seed);
    let take = |len: usize| ((len as f64 * train_fraction).round() as usize).min(len);
    Ok(SplitPlan {
        splits: vec![assemble([(&pos, take(pos.len())), (&neg, take(neg.len()))])],
        seed: Some(seed),
    })
}

/// One split with exactly `per_class` training samples from each class and
/// the remainder as test set.
pub fn per_class_split(dataset: &Dataset, per_class: usize, seed: u64) -> Result<SplitPlan> {
    let (pos, neg) = shuffled_classes(dataset, seed);
    if per_class == 0 || pos.len() < per_class || neg.len() < per_class {
        return Err(Error::Domain(format!(
            "cannot draw {per_class} training samples per class from {} positives and {} negatives",
            pos.len(),
            neg.len()
        )));
    }
    Ok(SplitPlan {
        splits: vec![assemble([(&pos, per_class), (&neg, per_class)])],
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use ndarray::{Array1, Array2};

    use super::*;

    fn balanced(n_per_class: usize) -> Dataset {
        let n = 2 * n_per_class;
        let y = Array1::from_shape_fn(n, |i| if i < n_per_class { 1.0 } else { -1.0 });
        Dataset::new(Array2::zeros((n, 1)), y).unwrap()
    }

    #[test]
    fn loocv_folds() {
        let plan = loocv_splits(62).unwrap();
        assert_eq!(plan.splits.len(), 62);
        for (i, s) in plan.splits.iter().enumerate() {
            assert_eq!(s.test, vec![i]);
            assert_eq!(s.train.len(), 61);
            assert!(!s.train.contains(&i));
        }
        assert!(loocv_splits(1).is_err());
    }

    #[test]
    fn stratified_half() {
        let d = balanced(10);
        let plan = stratified_split(&d, 0.5, 4).unwrap();
        let s = &plan.splits[0];
        assert_eq!(s.train.iter().filter(|&&i| i < 10).count(), 5);
        assert_eq!(s.train.iter().filter(|&&i| i >= 10).count(), 5);
        assert_eq!(s.test.len(), 10);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        assert_eq!(plan, stratified_split(&d, 0.5, 4).unwrap());
        assert!(stratified_split(&d, 1.0, 4).is_err());
        assert!(stratified_split(&d, 0.0, 4).is_err());
    }

    #[test]
    fn per_class_counts() {
        let d = balanced(6);
        let s = &per_class_split(&d, 4, 1).unwrap().splits[0];
        assert_eq!(s.train.iter().filter(|&&i| i < 6).count(), 4);
        assert_eq!(s.test.len(), 4);
        assert!(per_class_split(&d, 7, 1).is_err());
    }
}
