use ndarray::ArrayViewMut2;

use super::BasisKernel;

/// Weighted inner product Σ_k θ_k x_k z_k.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linear;

impl BasisKernel for Linear {
    fn id(&self) -> String {
        "linear".into()
    }

    #[inline]
    fn eval(&self, x: &[f64], z: &[f64], theta: &[f64]) -> f64 {
        x.iter().zip(z).zip(theta).map(|((a, b), t)| t * a * b).sum()
    }

    fn accumulate_gradient(
        &self,
        x: &[f64],
        z: &[f64],
        _theta: &[f64],
        _phi: f64,
        scale: f64,
        out: &mut [f64],
    ) {
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(z) {
            *o += scale * a * b;
        }
    }

    fn accumulate_hessian(
        &self,
        _x: &[f64],
        _z: &[f64],
        _theta: &[f64],
        _phi: f64,
        _scale: f64,
        _out: &mut ArrayViewMut2<f64>,
    ) {
    }

    fn has_curvature(&self) -> bool {
        false
    }
}
