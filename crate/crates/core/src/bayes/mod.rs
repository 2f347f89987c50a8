//! The sparse Bayesian learner: Laplace posterior approximation, evidence
//! based hyperparameter re-estimation, pruning of samples and features, and
//! moderated prediction.

mod fit;
mod hyper;
mod mode;
mod model;
mod objective;
mod posterior;
mod prune;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use fit::{fit, initial_state, IterationRecord, TrainTrace};
pub use hyper::{builtin_hyper_rules, update_hyperparameters, Em, HyperRule, HyperRuleRef, MacKay};
pub use mode::{find_posterior_mode, PosteriorMode};
pub use model::{FittedModel, TrainingMetadata};
pub use objective::{barrier_curvature, barrier_gradient, log_sigmoid, sigmoid, Evaluation, Problem};
pub use posterior::{log_evidence, posterior_covariances, PosteriorApprox};
pub use prune::prune;

/// Precisions of the sample weights (`alpha[0]` belongs to the bias) and of
/// the feature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Training options. Defaults follow the values used throughout the crate's
/// experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Scale of the σ(λ·) approximation to the nonnegativity indicator.
    pub lambda: f64,
    /// Samples and features whose precision exceeds this are pruned.
    pub prune_threshold_max: f64,
    /// Stop once |Δ log evidence| falls below this.
    pub evidence_tol: f64,
    pub max_iterations: usize,
    /// Block Newton sweeps per posterior mode search.
    pub inner_mode_iterations: usize,
    pub mode_grad_tol: f64,
    pub hyper_rule: HyperRuleRef,
    pub gamma_prior_c: f64,
    pub gamma_prior_d: f64,
    pub init_alpha: f64,
    pub init_beta: f64,
    pub init_w: f64,
    /// Initial feature weight; `None` means 1/M.
    pub init_theta: Option<f64>,
    /// Leave the second-derivative term E out of the θ Hessian.
    pub drop_e: bool,
    /// Recorded in run manifests; training itself draws no random numbers.
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            prune_threshold_max: 1e6,
            evidence_tol: 1e-3,
            max_iterations: 500,
            inner_mode_iterations: 25,
            mode_grad_tol: 1e-5,
            hyper_rule: HyperRuleRef::mackay(),
            gamma_prior_c: 0.0,
            gamma_prior_d: 0.0,
            init_alpha: 1.0,
            init_beta: 1.0,
            init_w: 1e-2,
            init_theta: None,
            drop_e: true,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let positive = [
            ("lambda", self.lambda),
            ("prune_threshold_max", self.prune_threshold_max),
            ("evidence_tol", self.evidence_tol),
            ("mode_grad_tol", self.mode_grad_tol),
            ("init_alpha", self.init_alpha),
            ("init_beta", self.init_beta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma_prior_c >= 0.0 && self.gamma_prior_d >= 0.0) {
            return Err(Error::Domain("gamma prior parameters must be nonnegative".into()));
        }
        if !(self.init_w.is_finite() && self.init_w >= 0.0) {
            return Err(Error::Domain("init_w must be nonnegative".into()));
        }
        if let Some(t) = self.init_theta {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Domain("init_theta must be nonnegative".into()));
            }
        }
        if self.max_iterations == 0 || self.inner_mode_iterations == 0 {
            return Err(Error::Domain("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// The mutable state of the training loop.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// Indices into the training rows.
    pub active_samples: Vec<usize>,
    /// Indices into the original feature columns.
    pub active_features: Vec<usize>,
    /// Sample weights, bias first.
    pub w: Array1<f64>,
    pub theta: Array1<f64>,
    pub hyper: HyperParams,
    pub evidence_history: Vec<f64>,
    pub iteration: usize,
}
