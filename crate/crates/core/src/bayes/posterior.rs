use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::robust_spd_inverse;

use super::objective::Problem;
use super::{HyperParams, TrainConfig};

/// Gaussian (Laplace) approximation of the posteriors over w and θ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorApprox {
    pub u_w: Array1<f64>,
    pub sigma_w: Array2<f64>,
    pub u_theta: Array1<f64>,
    pub sigma_theta: Array2<f64>,
    /// log |Σ_w|
    pub log_det_sigma_w: f64,
    /// log |Σ_θ|
    pub log_det_sigma_theta: f64,
}

/// Σ_w = (ΦᵀCΦ + A + O_w)⁻¹ and Σ_θ = (DᵀCD + B + O_θ − E)⁻¹ at the mode,
/// with E left out when `config.drop_e` is set.
pub fn posterior_covariances(
    problem: &Problem,
    w: ArrayView1<f64>,
    theta: ArrayView1<f64>,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<PosteriorApprox> {
    let eval = problem.evaluate(w, theta, hyper)?;
    let hw = problem.neg_hessian_w(&eval, w, hyper);
    let d = problem.d_matrix(w, theta, &eval.phi)?;
    let mut ht = problem.neg_hessian_theta(&eval, &d, theta, hyper);
    if !config.drop_e {
        let e = problem.e_matrix(w, theta, &eval.phi, eval.residual.view())?;
        ht -= &e;
    }
    let sw = robust_spd_inverse(hw.view(), "Sigma_w")?;
    let st = robust_spd_inverse(ht.view(), "Sigma_theta")?;
    Ok(PosteriorApprox {
        u_w: w.to_owned(),
        sigma_w: sw.inverse,
        u_theta: theta.to_owned(),
        sigma_theta: st.inverse,
        log_det_sigma_w: -sw.log_det,
        log_det_sigma_theta: -st.log_det,
    })
}

/// Laplace approximation of log p(t | α, β).
///
/// Q at the mode plus the prior normalisers (½ log α_i and ½ log β_k, and
/// log 2 for every truncated weight) plus ½ log |Σ_w| + ½ log |Σ_θ|. The
/// (2π)^{d/2} factors of the priors and of the Gaussian integral cancel.
pub fn log_evidence(
    problem: &Problem,
    posterior: &PosteriorApprox,
    hyper: &HyperParams,
) -> Result<f64> {
    let q = problem.log_joint(posterior.u_w.view(), posterior.u_theta.view(), hyper)?;
    let truncated = (posterior.u_w.len() - 1 + posterior.u_theta.len()) as f64;
    let norm = 0.5 * hyper.alpha.iter().map(|a| a.ln()).sum::<f64>()
        + 0.5 * hyper.beta.iter().map(|b| b.ln()).sum::<f64>()
        + truncated * std::f64::consts::LN_2;
    let value = q + norm + 0.5 * posterior.log_det_sigma_w + 0.5 * posterior.log_det_sigma_theta;
    if !value.is_finite() {
        return Err(Error::Numeric("log evidence is not finite".into()));
    }
    Ok(value)
}
