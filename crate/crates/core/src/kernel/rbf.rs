use ndarray::ArrayViewMut2;

use super::BasisKernel;

/// Gaussian RBF with per-feature weights: exp(−Σ_k θ_k (x_k − z_k)²).
#[derive(Debug, Clone, Copy, Default)]
pub struct Rbf;

impl BasisKernel for Rbf {
    fn id(&self) -> String {
        "rbf".into()
    }

    #[inline]
    fn eval(&self, x: &[f64], z: &[f64], theta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&a, &b), &t) in x.iter().zip(z).zip(theta) {
            let d = a - b;
            acc += t * d * d;
        }
        (-acc).exp()
    }

    fn accumulate_gradient(
        &self,
        x: &[f64],
        z: &[f64],
        _theta: &[f64],
        phi: f64,
        scale: f64,
        out: &mut [f64],
    ) {
        let s = -scale * phi;
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(z) {
            let d = a - b;
            *o += s * d * d;
        }
    }

    fn accumulate_hessian(
        &self,
        x: &[f64],
        z: &[f64],
        _theta: &[f64],
        phi: f64,
        scale: f64,
        out: &mut ArrayViewMut2<f64>,
    ) {
        let s = scale * phi;
        let m = x.len();
        for i in 0..m {
            let di = (x[i] - z[i]) * (x[i] - z[i]);
            if di == 0.0 {
                continue;
            }
            for k in 0..m {
                let dk = (x[k] - z[k]) * (x[k] - z[k]);
                out[[i, k]] += s * di * dk;
            }
        }
    }
}
