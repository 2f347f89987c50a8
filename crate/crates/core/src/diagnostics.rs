//! Divergence between the feature-weight posterior and its prior, and the
//! generalisation bound built on it.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Truncated Gaussian feature posteriors N₊(θ_k, 1/β_k) against half-normal
/// priors N₊(0, 1/β0_k), one entry per active feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLInput {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta0: Vec<f64>,
}

/// KL(q‖p) for one feature, where q is N(u, 1/β) restricted to [0, ∞) and
/// p is N(0, 1/β0) restricted to [0, ∞).
///
/// With Z0 = ½ erfc(−u √(β/2)) the mass q keeps on the half-line:
/// ½[β0/β − 1 + ln(β/β0) + β0 u²] + (β + β0) u e^{−βu²/2} / (2 Z0 √(2πβ)) − ln(2 Z0).
pub fn kl_truncated_normal(u: f64, beta: f64, beta0: f64) -> Result<f64> {
    if !(beta > 0.0 && beta0 > 0.0 && beta.is_finite() && beta0.is_finite()) {
        return Err(Error::Domain(format!(
            "precisions must be positive and finite, got β = {beta}, β0 = {beta0}"
        )));
    }
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::Domain(format!("feature mean must be nonnegative, got {u}")));
    }
    let z0 = 0.5 * erfc(-u * (beta / 2.0).sqrt());
    let gauss = 0.5 * (beta0 / beta - 1.0 + (beta / beta0).ln() + beta0 * u * u);
    let tail = (beta + beta0) * u * (-0.5 * beta * u * u).exp()
        / (2.0 * z0 * (2.0 * std::f64::consts::PI * beta).sqrt());
    Ok(gauss + tail - (2.0 * z0).ln())
}

/// Sum of [`kl_truncated_normal`] over the features of `input`.
pub fn kl_feature_divergence(input: &KLInput) -> Result<f64> {
    let m = input.theta.len();
    if input.beta.len() != m || input.beta0.len() != m {
        return Err(Error::Dimension(format!(
            "theta, beta and beta0 have lengths {m}, {}, {}",
            input.beta.len(),
            input.beta0.len()
        )));
    }
    let mut total = 0.0;
    for k in 0..m {
        total += kl_truncated_normal(input.theta[k], input.beta[k], input.beta0[k])?;
    }
    Ok(total)
}

/// Single-feature KL at each θ of `grid`, for plotting the divergence
/// against the feature mean.
pub fn kl_curve(grid: &[f64], beta: f64, beta0: f64) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&t| Ok((t, kl_truncated_normal(t, beta, beta0)?)))
        .collect()
}

/// Parameters of the generalisation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    /// Empirical margin loss Λ in [0, 1].
    pub empirical_loss: f64,
    /// KL(Q‖P) ≥ 0.
    pub kl: f64,
    pub n: usize,
    /// Lipschitz scale of the margin loss.
    pub c: f64,
    pub r: f64,
    pub g: f64,
    pub delta: f64,
}

impl BoundInput {
    /// Λ and KL as given, with r = 2, g = 1, c = 1, δ = 0.05.
    pub fn with_defaults(empirical_loss: f64, kl: f64, n: usize) -> Self {
        Self {
            empirical_loss,
            kl,
            n,
            c: 1.0,
            r: 2.0,
            g: 1.0,
            delta: 0.05,
        }
    }
}

/// Λ + (2/c)√(2g̃/n) + √((ln log_r(r g̃/g) + ½ ln(1/δ)) / n) with
/// g̃ = r·max(KL, g).
pub fn generalization_bound(input: &BoundInput) -> Result<f64> {
    let BoundInput {
        empirical_loss,
        kl,
        n,
        c,
        r,
        g,
        delta,
    } = *input;
    if !(0.0..=1.0).contains(&empirical_loss) {
        return Err(Error::Domain(format!("empirical loss {empirical_loss} outside [0, 1]")));
    }
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(Error::Domain(format!("KL must be nonnegative, got {kl}")));
    }
    if n == 0 || !(c > 0.0 && r > 0.0 && g > 0.0) {
        return Err(Error::Domain("n, c, r and g must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ must lie in (0, 1), got {delta}")));
    }
    let n = n as f64;
    let g_tilde = r * kl.max(g);
    let log_r = (r * g_tilde / g).ln() / r.ln();
    if !(log_r > 0.0 && log_r.is_finite()) {
        return Err(Error::Domain(format!(
            "log_r(r·g̃/g) = {log_r} must be positive"
        )));
    }
    let confidence = log_r.ln() + 0.5 * (1.0 / delta).ln();
    if confidence < 0.0 {
        return Err(Error::Domain(format!(
            "confidence term {confidence} is negative"
        )));
    }
    Ok(empirical_loss + 2.0 / c * (2.0 * g_tilde / n).sqrt() + (confidence / n).sqrt())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    /// ∫₀^∞ q ln(q/p) by composite Simpson on [0, 40] with both densities
    /// normalised numerically.
    fn kl_by_quadrature(u: f64, beta: f64, beta0: f64) -> f64 {
        let n = 200_000;
        let upper = 40.0;
        let h = upper / n as f64;
        let q_raw = |t: f64| (-0.5 * beta * (t - u).powi(2)).exp();
        let p_raw = |t: f64| (-0.5 * beta0 * t * t).exp();
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut s = f(0.0) + f(upper);
            for i in 1..n {
                s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let zq = simpson(&q_raw);
        let zp = simpson(&p_raw);
        simpson(&|t| {
            let log_ratio = -0.5 * beta * (t - u).powi(2) - zq.ln() + 0.5 * beta0 * t * t + zp.ln();
            q_raw(t) / zq * log_ratio
        })
    }

    #[test]
    fn zero_at_prior() {
        for b in [0.5, 1.0, 7.0] {
            assert_abs_diff_eq!(kl_truncated_normal(0.0, b, b).unwrap(), 0.0, epsilon = 1e-12);
        }
        let empty = KLInput { theta: vec![], beta: vec![], beta0: vec![] };
        assert_eq!(kl_feature_divergence(&empty).unwrap(), 0.0);
    }

    #[test]
    fn matches_quadrature() {
        for (u, b, b0) in [(1.0, 1.0, 0.5), (0.3, 4.0, 0.5), (2.5, 0.7, 2.0), (0.0, 3.0, 1.0)] {
            let closed = kl_truncated_normal(u, b, b0).unwrap();
            let numeric = kl_by_quadrature(u, b, b0);
            assert_abs_diff_eq!(closed, numeric, epsilon = 1e-6);
        }
    }

    #[test]
    fn curve_minimum_near_zero() {
        let grid: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let curve = kl_curve(&grid, 0.5, 0.5).unwrap();
        assert_eq!(curve.len(), grid.len());
        let (argmin, _) = curve
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(argmin <= 0.3, "argmin {argmin}");
    }

    #[test]
    fn kl_errors() {
        assert!(kl_truncated_normal(1.0, 0.0, 1.0).is_err());
        assert!(kl_truncated_normal(1.0, 1.0, -1.0).is_err());
        let ragged = KLInput { theta: vec![1.0], beta: vec![], beta0: vec![1.0] };
        assert!(matches!(kl_feature_divergence(&ragged), Err(Error::Dimension(_))));
    }

    #[test]
    fn bound_worked_example() {
        let input = BoundInput {
            empirical_loss: 0.1,
            kl: 0.5,
            n: 100,
            c: 1.0,
            r: 2.0,
            g: 1.0,
            delta: (-2.0f64).exp(),
        };
        let expected = 0.1 + 0.4 + ((2f64.ln() + 1.0) / 100.0).sqrt();
        assert_abs_diff_eq!(generalization_bound(&input).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(generalization_bound(&input).unwrap(), 0.6301, epsilon = 1e-4);

        let large = BoundInput { n: 100_000_000, ..input };
        assert_abs_diff_eq!(generalization_bound(&large).unwrap(), 0.1, epsilon = 1e-3);
        let bad = BoundInput { r: 1.0, ..input };
        assert!(matches!(generalization_bound(&bad), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn kl_nonnegative(u in 0.0f64..5.0, b in 0.05f64..20.0, b0 in 0.05f64..20.0) {
            prop_assert!(kl_truncated_normal(u, b, b0).unwrap() >= -1e-10);
        }

        #[test]
        fn bound_monotone(
            loss in 0.0f64..0.9,
            kl in 0.0f64..10.0,
            extra in 0.01f64..5.0,
            n in 1usize..10_000,
        ) {
            let base = BoundInput::with_defaults(loss, kl, n);
            let b = generalization_bound(&base).unwrap();
            let more_loss = BoundInput { empirical_loss: loss + 0.1, ..base };
            let more_kl = BoundInput { kl: kl + extra, ..base };
            let more_n = BoundInput { n: n + 1, ..base };
            prop_assert!(generalization_bound(&more_loss).unwrap() >= b);
            prop_assert!(generalization_bound(&more_kl).unwrap() >= b);
            prop_assert!(generalization_bound(&more_n).unwrap() <= b);
            if kl > base.g {
                prop_assert!(generalization_bound(&more_kl).unwrap() > b);
            }
        }
    }
}
