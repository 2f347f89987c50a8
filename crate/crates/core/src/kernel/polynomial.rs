use ndarray::ArrayViewMut2;

use super::BasisKernel;
use crate::error::{Error, Result};

/// (1 + Σ_k θ_k x_k z_k)^P for an integer order P ≥ 1.
///
/// Derivatives are computed from the base sum, so φ^{(P−1)/P} is always taken
/// as (1 + Σθxz)^{P−1} and never as a fractional power of a signed value.
#[derive(Debug, Clone, Copy)]
pub struct Polynomial {
    order: u32,
}

impl Polynomial {
    pub fn new(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("polynomial order must be at least 1".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    #[inline]
    fn base(x: &[f64], z: &[f64], theta: &[f64]) -> f64 {
        1.0 + x
            .iter()
            .zip(z)
            .zip(theta)
            .map(|((a, b), t)| t * a * b)
            .sum::<f64>()
    }
}

impl BasisKernel for Polynomial {
    fn id(&self) -> String {
        format!("poly:{}", self.order)
    }

    #[inline]
    fn eval(&self, x: &[f64], z: &[f64], theta: &[f64]) -> f64 {
        Self::base(x, z, theta).powi(self.order as i32)
    }

    fn accumulate_gradient(
        &self,
        x: &[f64],
        z: &[f64],
        theta: &[f64],
        _phi: f64,
        scale: f64,
        out: &mut [f64],
    ) {
        let p = self.order as i32;
        let s = scale * f64::from(self.order) * Self::base(x, z, theta).powi(p - 1);
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(z) {
            *o += s * a * b;
        }
    }

    fn accumulate_hessian(
        &self,
        x: &[f64],
        z: &[f64],
        theta: &[f64],
        _phi: f64,
        scale: f64,
        out: &mut ArrayViewMut2<f64>,
    ) {
        if self.order < 2 {
            return;
        }
        let p = self.order as i32;
        let s = scale
            * f64::from(self.order)
            * f64::from(self.order - 1)
            * Self::base(x, z, theta).powi(p - 2);
        let m = x.len();
        for i in 0..m {
            let xi = x[i] * z[i];
            if xi == 0.0 {
                continue;
            }
            for k in 0..m {
                out[[i, k]] += s * xi * x[k] * z[k];
            }
        }
    }

    fn has_curvature(&self) -> bool {
        self.order >= 2
    }
}
