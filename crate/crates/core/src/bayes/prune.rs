use ndarray::{Array1, Axis};

use crate::error::{Error, Result};

use super::{HyperParams, ModelState, TrainConfig};

/// Removes samples with α_i above `config.prune_threshold_max` (never the
/// bias) and features with β_k above it, shrinking every conformable vector.
pub fn prune(state: &ModelState, config: &TrainConfig) -> Result<ModelState> {
    let limit = config.prune_threshold_max;
    let keep_w: Vec<usize> = (0..state.w.len())
        .filter(|&i| i == 0 || state.hyper.alpha[i] <= limit)
        .collect();
    let keep_t: Vec<usize> = (0..state.theta.len())
        .filter(|&k| state.hyper.beta[k] <= limit)
        .collect();

    if keep_w.len() == 1 {
        return Err(Error::DegenerateModel(format!(
            "all samples pruned; {} features survive",
            keep_t.len()
        )));
    }
    if keep_t.is_empty() {
        return Err(Error::DegenerateModel(format!(
            "all features pruned; {} samples survive",
            keep_w.len() - 1
        )));
    }

    let select = |v: &Array1<f64>, idx: &[usize]| v.select(Axis(0), idx);
    Ok(ModelState {
        active_samples: keep_w[1..].iter().map(|&i| state.active_samples[i - 1]).collect(),
        active_features: keep_t.iter().map(|&k| state.active_features[k]).collect(),
        w: select(&state.w, &keep_w),
        theta: select(&state.theta, &keep_t),
        hyper: HyperParams {
            alpha: select(&state.hyper.alpha, &keep_w),
            beta: select(&state.hyper.beta, &keep_t),
        },
        evidence_history: state.evidence_history.clone(),
        iteration: state.iteration,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn state(alpha: Array1<f64>, beta: Array1<f64>) -> ModelState {
        let n = alpha.len() - 1;
        let m = beta.len();
        ModelState {
            active_samples: (10..10 + n).collect(),
            active_features: (0..m).map(|k| 2 * k).collect(),
            w: Array1::from_shape_fn(n + 1, |i| i as f64),
            theta: Array1::from_shape_fn(m, |k| k as f64 + 0.5),
            hyper: HyperParams { alpha, beta },
            evidence_history: vec![],
            iteration: 3,
        }
    }

    #[test]
    fn removes_sample_above_threshold_and_keeps_bias() {
        let s = state(array![1.0, 1e7, 1.0], array![1.0]);
        let p = prune(&s, &TrainConfig::default()).unwrap();
        assert_eq!(p.active_samples, vec![11]);
        assert_eq!(p.w, array![0.0, 2.0]);
        assert_eq!(p.hyper.alpha, array![1.0, 1.0]);
    }

    #[test]
    fn bias_precision_is_never_pruned() {
        let s = state(array![1e9, 1.0], array![1.0, 2e6]);
        let p = prune(&s, &TrainConfig::default()).unwrap();
        assert_eq!(p.w.len(), 2);
        assert_eq!(p.active_features, vec![0]);
        assert_eq!(p.theta, array![0.5]);
    }

    #[test]
    fn unchanged_when_below_threshold() {
        let s = state(array![1.0, 3.0, 5.0], array![1.0, 10.0]);
        let p = prune(&s, &TrainConfig::default()).unwrap();
        assert_eq!(p.active_samples, s.active_samples);
        assert_eq!(p.active_features, s.active_features);
        assert_eq!(p.hyper, s.hyper);
    }

    #[test]
    fn all_features_pruned_is_degenerate() {
        let s = state(array![1.0, 1.0], array![1e7, 1e7]);
        match prune(&s, &TrainConfig::default()) {
            Err(Error::DegenerateModel(msg)) => assert!(msg.contains("1 samples survive"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let s = state(array![1.0, 1e7], array![1.0]);
        assert!(matches!(
            prune(&s, &TrainConfig::default()),
            Err(Error::DegenerateModel(_))
        ));
    }
}
