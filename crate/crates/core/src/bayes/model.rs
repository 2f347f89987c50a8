use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{design_matrix, KernelRef, KernelSpec};

use super::objective::sigmoid;

/// Summary of the training run stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub final_log_evidence: f64,
    pub hyper_rule: String,
    pub lambda: f64,
    /// Final precisions, bias first.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// The immutable prediction artifact: surviving relevance vectors, their
/// weights and posterior covariance, and the selected features with their
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kernel: KernelRef,
    /// Dimensionality of the inputs the model was trained on.
    pub n_features_in: usize,
    /// Selected feature columns, in increasing order.
    pub feature_indices: Vec<usize>,
    pub theta: Vec<f64>,
    /// Training rows kept as relevance vectors.
    pub relevance_indices: Vec<usize>,
    /// Relevance vectors restricted to the selected features.
    #[serde(with = "crate::serde_rows")]
    pub relevance_vectors: Array2<f64>,
    pub relevance_labels: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Posterior covariance of (bias, weights...).
    #[serde(with = "crate::serde_rows")]
    pub sigma_w: Array2<f64>,
    pub metadata: TrainingMetadata,
}

impl FittedModel {
    /// Checks internal consistency; called after deserialisation.
    pub fn validate(&self) -> Result<()> {
        let m = self.feature_indices.len();
        let n = self.relevance_labels.len();
        let ok = self.theta.len() == m
            && self.relevance_vectors.dim() == (n, m)
            && self.relevance_indices.len() == n
            && self.weights.len() == n
            && self.sigma_w.dim() == (n + 1, n + 1)
            && self.feature_indices.iter().all(|&k| k < self.n_features_in);
        if !ok {
            return Err(Error::Dimension("inconsistent model dimensions".into()));
        }
        if self.theta.iter().chain(&self.weights).any(|&v| !(v >= 0.0)) {
            return Err(Error::Domain("model weights must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn num_relevance_vectors(&self) -> usize {
        self.relevance_labels.len()
    }

    fn spec(&self) -> KernelSpec {
        KernelSpec {
            kernel: self.kernel.clone(),
            theta: Array1::from(self.theta.clone()),
        }
    }

    fn full_weights(&self) -> Array1<f64> {
        std::iter::once(self.bias).chain(self.weights.iter().copied()).collect()
    }

    /// Basis rows φ_θ(x̂) for a batch of inputs with the original
    /// dimensionality.
    fn basis(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features_in {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.n_features_in
            )));
        }
        let rows = x.select(Axis(1), &self.feature_indices);
        let labels = Array1::from(self.relevance_labels.clone());
        Ok(design_matrix(rows.view(), self.relevance_vectors.view(), labels.view(), &self.spec())?
            .into_inner())
    }

    /// u_wᵀ φ_θ(x̂) for every row of `x`.
    pub fn decision_values(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.basis(x)?.dot(&self.full_weights()))
    }

    /// σ(κ · u_wᵀφ) with κ = (1 + π/8 · φᵀΣ_wφ)^{−1/2}.
    pub fn predict_probas(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let phi = self.basis(x)?;
        let u = self.full_weights();
        let spread = phi.dot(&self.sigma_w);
        Ok(phi
            .outer_iter()
            .zip(spread.outer_iter())
            .map(|(p, sp)| {
                let var = p.dot(&sp).max(0.0);
                let kappa = (1.0 + std::f64::consts::PI / 8.0 * var).powf(-0.5);
                sigmoid(kappa * p.dot(&u))
            })
            .collect())
    }

    /// Sign of the decision value; an exact zero maps to +1.
    pub fn predict_labels(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self
            .decision_values(x)?
            .mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 }))
    }

    pub fn decision_value(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.decision_values(x.insert_axis(Axis(0)))?[0])
    }

    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.predict_probas(x.insert_axis(Axis(0)))?[0])
    }

    pub fn predict_label(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.predict_labels(x.insert_axis(Axis(0)))?[0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
