//! Evidence-based re-estimation of the precision hyperparameters.
//!
//! Both rules come from maximising the Laplace marginal likelihood with a
//! Gamma(c, d) hyperprior. Given the posterior mean `u` and variance `s` of a
//! weight with current precision `p`:
//!
//! * `mackay`: `(γ + 2c) / (u² + 2d)` with `γ = 1 − p·s`
//! * `em`:     `(2c + 1) / (u² + s + 2d)`

use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::registry::Registry;

use super::{HyperParams, PosteriorApprox, TrainConfig};

pub trait HyperRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// New precision for one weight. May return a non-finite or nonpositive
    /// value; the caller routes those to pruning.
    fn update(&self, mean: f64, variance: f64, precision: f64, c: f64, d: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MacKay;

impl HyperRule for MacKay {
    fn name(&self) -> &'static str {
        "mackay"
    }

    fn update(&self, mean: f64, variance: f64, precision: f64, c: f64, d: f64) -> f64 {
        let gamma = 1.0 - precision * variance;
        (gamma + 2.0 * c) / (mean * mean + 2.0 * d)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Em;

impl HyperRule for Em {
    fn name(&self) -> &'static str {
        "em"
    }

    fn update(&self, mean: f64, variance: f64, _precision: f64, c: f64, d: f64) -> f64 {
        (2.0 * c + 1.0) / (mean * mean + variance + 2.0 * d)
    }
}

pub fn builtin_hyper_rules() -> &'static Registry<dyn HyperRule> {
    static REGISTRY: OnceLock<Registry<dyn HyperRule>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg = Registry::new("hyperparameter rule");
        reg.register("mackay", |_| Ok(Arc::new(MacKay) as Arc<dyn HyperRule>));
        reg.register("em", |_| Ok(Arc::new(Em) as Arc<dyn HyperRule>));
        reg
    })
}

/// Shared handle to a hyperparameter rule. Serialises as its name.
#[derive(Clone)]
pub struct HyperRuleRef(Arc<dyn HyperRule>);

impl HyperRuleRef {
    pub fn new(rule: Arc<dyn HyperRule>) -> Self {
        Self(rule)
    }

    pub fn parse(name: &str) -> Result<Self> {
        builtin_hyper_rules().resolve(name).map(Self)
    }

    pub fn mackay() -> Self {
        Self(Arc::new(MacKay))
    }

    pub fn em() -> Self {
        Self(Arc::new(Em))
    }
}

impl Deref for HyperRuleRef {
    type Target = dyn HyperRule;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl fmt::Debug for HyperRuleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HyperRuleRef({})", self.0.name())
    }
}

impl Serialize for HyperRuleRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for HyperRuleRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        HyperRuleRef::parse(&name).map_err(serde::de::Error::custom)
    }
}

/// Applies `config.hyper_rule` to every α (bias included) and β.
///
/// Non-finite or nonpositive results become `prune_threshold_max + 1` so the
/// following prune step removes the weight. The bias cannot be pruned, so a
/// degenerate bias update keeps the previous α₀, and α₀ is capped at
/// `prune_threshold_max` to keep the w Hessian well scaled.
pub fn update_hyperparameters(
    posterior: &PosteriorApprox,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<HyperParams> {
    let n = posterior.u_w.len();
    let m = posterior.u_theta.len();
    if hyper.alpha.len() != n || hyper.beta.len() != m {
        return Err(Error::Dimension(format!(
            "posterior ({n}, {m}) and hyperparameters ({}, {}) differ",
            hyper.alpha.len(),
            hyper.beta.len()
        )));
    }
    let rule = &config.hyper_rule;
    let (c, d) = (config.gamma_prior_c, config.gamma_prior_d);
    let sentinel = config.prune_threshold_max + 1.0;
    let valid = |v: f64| v.is_finite() && v > 0.0;

    let mut alpha = hyper.alpha.clone();
    for i in 0..n {
        let v = rule.update(posterior.u_w[i], posterior.sigma_w[[i, i]], hyper.alpha[i], c, d);
        alpha[i] = match (valid(v), i) {
            (true, 0) => v.min(config.prune_threshold_max),
            (true, _) => v,
            (false, 0) => hyper.alpha[0],
            (false, _) => sentinel,
        };
    }
    let mut beta = hyper.beta.clone();
    for k in 0..m {
        let v = rule.update(
            posterior.u_theta[k],
            posterior.sigma_theta[[k, k]],
            hyper.beta[k],
            c,
            d,
        );
        beta[k] = if valid(v) { v } else { sentinel };
    }
    Ok(HyperParams { alpha, beta })
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn hand_arithmetic_examples() {
        assert_eq!(MacKay.update(0.5, 0.25, 2.0, 0.0, 0.0), 2.0);
        assert_eq!(Em.update(0.5, 0.25, 2.0, 0.0, 0.0), 2.0);
        assert_eq!(MacKay.update(1.0, 0.0, 7.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn gamma_prior_terms() {
        // (γ + 2c) / (u² + 2d) with γ = 1 - 2·0.25 = 0.5
        let v = MacKay.update(0.5, 0.25, 2.0, 0.25, 0.5);
        assert!((v - 1.0 / 1.25).abs() < 1e-15);
        let v = Em.update(0.5, 0.25, 2.0, 0.5, 0.25);
        assert!((v - 2.0 / 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_update_is_routed_to_pruning() {
        let config = TrainConfig::default();
        let beta0 = 4.0;
        let posterior = PosteriorApprox {
            u_w: array![0.0, 0.3],
            sigma_w: array![[0.5, 0.0], [0.0, 0.1]],
            u_theta: array![0.0],
            sigma_theta: array![[1.0 / beta0]],
            log_det_sigma_w: 0.0,
            log_det_sigma_theta: 0.0,
        };
        let hyper = HyperParams {
            alpha: array![2.0, 1.0],
            beta: array![beta0],
        };
        let new = update_hyperparameters(&posterior, &hyper, &config).unwrap();
        assert!(new.beta[0] > config.prune_threshold_max);
        // bias: γ = 0 and u = 0 as well, keeps its old value
        assert_eq!(new.alpha[0], 2.0);
        assert!((new.alpha[1] - 0.9 / 0.09).abs() < 1e-12);
    }

    #[test]
    fn bias_precision_is_capped() {
        let config = TrainConfig::default();
        let posterior = PosteriorApprox {
            u_w: array![1e-6, 0.5],
            sigma_w: array![[1e-9, 0.0], [0.0, 0.1]],
            u_theta: array![0.5],
            sigma_theta: array![[0.1]],
            log_det_sigma_w: 0.0,
            log_det_sigma_theta: 0.0,
        };
        let hyper = HyperParams {
            alpha: array![1.0, 1.0],
            beta: array![1.0],
        };
        let new = update_hyperparameters(&posterior, &hyper, &config).unwrap();
        assert_eq!(new.alpha[0], config.prune_threshold_max);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(HyperRuleRef::parse("mackay").unwrap().name(), "mackay");
        assert_eq!(HyperRuleRef::parse("em").unwrap().name(), "em");
        assert!(HyperRuleRef::parse("newton").is_err());
        let json = serde_json::to_string(&HyperRuleRef::em()).unwrap();
        assert_eq!(json, "\"em\"");
    }
}
