//! Cholesky-based inversion of symmetric positive definite matrices.
//!
//! Hessians built during training can lose definiteness to rounding when a
//! precision grows very large. On a failed factorisation a diagonal jitter
//! `ε · mean(diag(H))` is added, starting at `ε = 1e-10` and doubling, until
//! the factorisation succeeds or `ε` exceeds `1e-2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-2;

/// Lower-triangular Cholesky factor of a (possibly jittered) SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
    /// Relative jitter that was needed, 0 when the matrix factored as given.
    pub jitter: f64,
}

/// Plain Cholesky factorisation. Returns `None` on a non-positive pivot.
fn factor(h: &ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = h.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = h[[i, j]];
            {
                let li = l.row(i);
                let lj = l.row(j);
                let li = li.as_slice().unwrap();
                let lj = lj.as_slice().unwrap();
                for k in 0..j {
                    sum -= li[k] * lj[k];
                }
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

impl Cholesky {
    /// Factors `h`, escalating the jitter as described in the module docs.
    /// `name` identifies the matrix in the error message.
    pub fn robust(h: ArrayView2<f64>, name: &str) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::Dimension(format!(
                "matrix `{name}` is {}x{}, expected square",
                n,
                h.ncols()
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("matrix `{name}` has non-finite entries")));
        }
        if let Some(lower) = factor(&h) {
            return Ok(Self { lower, jitter: 0.0 });
        }
        let scale = if n == 0 {
            1.0
        } else {
            let mean = h.diag().sum() / n as f64;
            if mean.abs() > 0.0 { mean.abs() } else { 1.0 }
        };
        let mut eps = JITTER_START;
        let mut work = h.to_owned();
        while eps <= JITTER_MAX {
            work.assign(&h);
            work.diag_mut().mapv_inplace(|d| d + eps * scale);
            if let Some(lower) = factor(&work.view()) {
                return Ok(Self { lower, jitter: eps });
            }
            eps *= 2.0;
        }
        Err(Error::IllConditioned {
            name: name.to_string(),
            jitter: eps / 2.0,
        })
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diag().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `H x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.lower.nrows();
        let l = &self.lower;
        let mut z = b.to_owned();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= l[[i, k]] * z[k];
            }
            z[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[[k, i]] * z[k];
            }
            z[i] = s / l[[i, i]];
        }
        z
    }

    /// H⁻¹ = L⁻ᵀ L⁻¹.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.lower.nrows();
        let l = &self.lower;
        let mut linv = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            linv[[j, j]] = 1.0 / l[[j, j]];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[[i, k]] * linv[[k, j]];
                }
                linv[[i, j]] = s / l[[i, i]];
            }
        }
        let mut inv = linv.t().dot(&linv);
        // symmetrise away rounding asymmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[[i, j]] + inv[[j, i]]);
                inv[[i, j]] = v;
                inv[[j, i]] = v;
            }
        }
        inv
    }
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdInverse {
    pub inverse: Array2<f64>,
    pub log_det: f64,
    pub jitter: f64,
}

pub fn robust_spd_inverse(h: ArrayView2<f64>, name: &str) -> Result<SpdInverse> {
    let chol = Cholesky::robust(h, name)?;
    Ok(SpdInverse {
        inverse: chol.inverse(),
        log_det: chol.log_det(),
        jitter: chol.jitter,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_inverts_to_identity() {
        let eye = Array2::<f64>::eye(4);
        let r = robust_spd_inverse(eye.view(), "I").unwrap();
        assert_eq!(r.inverse, eye);
        assert_eq!(r.log_det, 0.0);
        assert_eq!(r.jitter, 0.0);
    }

    #[test]
    fn diagonal_matrix() {
        let h = array![[2.0, 0.0], [0.0, 4.0]];
        let r = robust_spd_inverse(h.view(), "diag").unwrap();
        assert_abs_diff_eq!(r.inverse, array![[0.5, 0.0], [0.0, 0.25]], epsilon = 1e-15);
        assert_abs_diff_eq!(r.log_det, 8f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        // eigenvalues 3 and -1, diagonal mean 1
        let h = array![[1.0, 2.0], [2.0, 1.0]];
        match robust_spd_inverse(h.view(), "H_theta") {
            Err(Error::IllConditioned { name, .. }) => assert_eq!(name, "H_theta"),
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn singular_psd_matrix_is_rescued_by_jitter() {
        let h = array![[1.0, 1.0], [1.0, 1.0]];
        let r = robust_spd_inverse(h.view(), "rank1").unwrap();
        assert!(r.jitter > 0.0 && r.jitter <= JITTER_MAX);
    }

    #[test]
    fn random_spd_multiply_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1usize, 3, 8, 20] {
            let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
            let h = a.t().dot(&a) + Array2::<f64>::eye(n) * 0.5;
            let chol = Cholesky::robust(h.view(), "h").unwrap();
            let inv = chol.inverse();
            let err = (h.dot(&inv) - Array2::<f64>::eye(n))
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-10, "n = {n}: {err}");
            let b = Array1::from_shape_fn(n, |i| i as f64 - 1.0);
            let x = chol.solve(b.view());
            assert_abs_diff_eq!(h.dot(&x), b, epsilon = 1e-10);
        }
    }
}
