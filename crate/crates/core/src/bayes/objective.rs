//! The smoothed log joint Q(w, θ) and its derivatives.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::kernel::{self, BasisMatrix, KernelRef, KernelSpec};

use super::HyperParams;

/// Numerically stable log σ(z).
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Training data restricted to the currently active samples and features.
#[derive(Debug, Clone)]
pub struct Problem {
    kernel: KernelRef,
    rows: Array2<f64>,
    centers: Array2<f64>,
    center_labels: Array1<f64>,
    targets: Array1<f64>,
    lambda: f64,
}

/// Quantities at a point (w, θ) that every step needs.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub phi: BasisMatrix,
    /// σ(Φw), one entry per training row.
    pub sigma: Array1<f64>,
    /// t − σ.
    pub residual: Array1<f64>,
    pub log_joint: f64,
}

impl Problem {
    /// `x` and `y` are the full training set; `active_samples` index its rows
    /// and `active_features` its columns.
    pub fn new(
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        active_samples: &[usize],
        active_features: &[usize],
        kernel: &KernelRef,
        lambda: f64,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if active_samples.is_empty() {
            return Err(Error::DegenerateModel("no active samples".into()));
        }
        if active_features.is_empty() {
            return Err(Error::DegenerateModel("no active features".into()));
        }
        if active_samples.iter().any(|&i| i >= x.nrows())
            || active_features.iter().any(|&k| k >= x.ncols())
        {
            return Err(Error::Dimension("active index out of range".into()));
        }
        let rows = x.select(Axis(1), active_features);
        let centers = rows.select(Axis(0), active_samples);
        Ok(Self {
            kernel: kernel.clone(),
            center_labels: y.select(Axis(0), active_samples),
            targets: y.mapv(|v| (v + 1.0) / 2.0),
            rows,
            centers,
            lambda,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of sample weights including the bias.
    pub fn num_weights(&self) -> usize {
        self.centers.nrows() + 1
    }

    pub fn num_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn kernel(&self) -> &KernelRef {
        &self.kernel
    }

    /// θ may carry tiny negative values inside the smoothing barrier, so the
    /// spec is built without the nonnegativity check.
    fn spec(&self, theta: ArrayView1<f64>) -> KernelSpec {
        KernelSpec {
            kernel: self.kernel.clone(),
            theta: theta.to_owned(),
        }
    }

    pub fn basis(&self, theta: ArrayView1<f64>) -> Result<BasisMatrix> {
        self.check_theta(theta)?;
        kernel::design_matrix(
            self.rows.view(),
            self.centers.view(),
            self.center_labels.view(),
            &self.spec(theta),
        )
    }

    pub fn d_matrix(
        &self,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        phi: &BasisMatrix,
    ) -> Result<Array2<f64>> {
        kernel::d_matrix(
            self.rows.view(),
            self.centers.view(),
            self.center_labels.view(),
            w,
            &self.spec(theta),
            phi,
        )
    }

    /// Residual-weighted mixed second derivative of Φ_θ w; see
    /// [`kernel::cross_matrix`].
    pub fn cross_matrix(
        &self,
        theta: ArrayView1<f64>,
        phi: &BasisMatrix,
        residual: ArrayView1<f64>,
    ) -> Result<Array2<f64>> {
        kernel::cross_matrix(
            self.rows.view(),
            self.centers.view(),
            self.center_labels.view(),
            &self.spec(theta),
            phi,
            residual,
        )
    }

    pub fn e_matrix(
        &self,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        phi: &BasisMatrix,
        residual: ArrayView1<f64>,
    ) -> Result<Array2<f64>> {
        kernel::e_matrix(
            self.rows.view(),
            self.centers.view(),
            self.center_labels.view(),
            w,
            &self.spec(theta),
            phi,
            residual,
        )
    }

    fn check_w(&self, w: ArrayView1<f64>) -> Result<()> {
        if w.len() != self.num_weights() {
            return Err(Error::Dimension(format!(
                "w has length {}, expected {}",
                w.len(),
                self.num_weights()
            )));
        }
        Ok(())
    }

    fn check_theta(&self, theta: ArrayView1<f64>) -> Result<()> {
        if theta.len() != self.num_features() {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.num_features()
            )));
        }
        Ok(())
    }

    fn check_hyper(&self, hyper: &HyperParams) -> Result<()> {
        if hyper.alpha.len() != self.num_weights() || hyper.beta.len() != self.num_features() {
            return Err(Error::Dimension(format!(
                "hyperparameters ({}, {}) do not match ({}, {})",
                hyper.alpha.len(),
                hyper.beta.len(),
                self.num_weights(),
                self.num_features()
            )));
        }
        Ok(())
    }

    /// Q(w, θ) given a precomputed basis matrix for θ.
    pub fn log_joint_with(
        &self,
        phi: &BasisMatrix,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Result<f64> {
        self.check_w(w)?;
        self.check_theta(theta)?;
        self.check_hyper(hyper)?;
        if w.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite weights in log joint".into()));
        }
        let f = phi.dot(&w);
        let lik: f64 = f
            .iter()
            .zip(self.targets.iter())
            .map(|(&fi, &t)| t * log_sigmoid(fi) + (1.0 - t) * log_sigmoid(-fi))
            .sum();
        let lam = self.lambda;
        let pen_w: f64 = w.iter().zip(hyper.alpha.iter()).map(|(w, a)| a * w * w).sum();
        let pen_t: f64 = theta
            .iter()
            .zip(hyper.beta.iter())
            .map(|(t, b)| b * t * t)
            .sum();
        let smooth: f64 = w.iter().skip(1).map(|&v| log_sigmoid(lam * v)).sum::<f64>()
            + theta.iter().map(|&v| log_sigmoid(lam * v)).sum::<f64>();
        let q = lik - 0.5 * pen_w - 0.5 * pen_t + smooth;
        if !q.is_finite() {
            return Err(Error::Numeric("log joint is not finite".into()));
        }
        Ok(q)
    }

    /// Q(w, θ), the log joint with the indicator terms replaced by log σ(λ·)
    /// and constants dropped.
    pub fn log_joint(
        &self,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Result<f64> {
        let phi = self.basis(theta)?;
        self.log_joint_with(&phi, w, theta, hyper)
    }

    pub fn evaluate(
        &self,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Result<Evaluation> {
        let phi = self.basis(theta)?;
        self.evaluate_with(phi, w, theta, hyper)
    }

    pub fn evaluate_with(
        &self,
        phi: BasisMatrix,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Result<Evaluation> {
        let log_joint = self.log_joint_with(&phi, w, theta, hyper)?;
        let sigma = phi.dot(&w).mapv(sigmoid);
        let residual = &self.targets - &sigma;
        Ok(Evaluation {
            phi,
            sigma,
            residual,
            log_joint,
        })
    }

    /// ∂Q/∂w = Φᵀ(t − σ) − A w + k_w.
    pub fn grad_w(&self, eval: &Evaluation, w: ArrayView1<f64>, hyper: &HyperParams) -> Array1<f64> {
        let mut g = eval.phi.t().dot(&eval.residual);
        let k = barrier_gradient(w, self.lambda, true);
        g.zip_mut_with(&k, |gi, ki| *gi += ki);
        for ((gi, &wi), &ai) in g.iter_mut().zip(w.iter()).zip(hyper.alpha.iter()) {
            *gi -= ai * wi;
        }
        g
    }

    /// ∂Q/∂θ = Dᵀ(t − σ) − B θ + k_θ.
    pub fn grad_theta(
        &self,
        eval: &Evaluation,
        d: &Array2<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Array1<f64> {
        let mut g = d.t().dot(&eval.residual);
        let k = barrier_gradient(theta, self.lambda, false);
        g.zip_mut_with(&k, |gi, ki| *gi += ki);
        for ((gi, &ti), &bi) in g.iter_mut().zip(theta.iter()).zip(hyper.beta.iter()) {
            *gi -= bi * ti;
        }
        g
    }

    /// Both gradients at (w, θ), as (∂Q/∂w, ∂Q/∂θ).
    pub fn gradients(
        &self,
        w: ArrayView1<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        let eval = self.evaluate(w, theta, hyper)?;
        let d = self.d_matrix(w, theta, &eval.phi)?;
        Ok((
            self.grad_w(&eval, w, hyper),
            self.grad_theta(&eval, &d, theta, hyper),
        ))
    }

    /// ΦᵀCΦ + A + O_w, the negated w-block Hessian.
    pub fn neg_hessian_w(&self, eval: &Evaluation, w: ArrayView1<f64>, hyper: &HyperParams) -> Array2<f64> {
        let mut h = weighted_gram(&eval.phi, &eval.sigma);
        let o = barrier_curvature(w, self.lambda, true);
        for i in 0..h.nrows() {
            h[[i, i]] += hyper.alpha[i] + o[i];
        }
        h
    }

    /// DᵀCD + B + O_θ, the negated θ-block Hessian without the E term.
    pub fn neg_hessian_theta(
        &self,
        eval: &Evaluation,
        d: &Array2<f64>,
        theta: ArrayView1<f64>,
        hyper: &HyperParams,
    ) -> Array2<f64> {
        let mut h = weighted_gram(d, &eval.sigma);
        let o = barrier_curvature(theta, self.lambda, false);
        for i in 0..h.nrows() {
            h[[i, i]] += hyper.beta[i] + o[i];
        }
        h
    }
}

impl Problem {
    /// ΦᵀCD, the likelihood curvature coupling w and θ (Gauss–Newton part
    /// of the negated cross Hessian).
    pub fn coupling(&self, eval: &Evaluation, d: &Array2<f64>) -> Array2<f64> {
        let mut cd = d.clone();
        for (mut row, &s) in cd.outer_iter_mut().zip(eval.sigma.iter()) {
            let c = s * (1.0 - s);
            row.mapv_inplace(|v| v * c);
        }
        eval.phi.t().dot(&cd)
    }
}

/// k vector: λ(1 − σ(λ v)), with a leading zero for the bias when `skip_bias`.
pub fn barrier_gradient(v: ArrayView1<f64>, lambda: f64, skip_bias: bool) -> Array1<f64> {
    let mut k = v.mapv(|x| lambda * sigmoid(-lambda * x));
    if skip_bias && !k.is_empty() {
        k[0] = 0.0;
    }
    k
}

/// Diagonal of O: λ² σ(λv)(1 − σ(λv)), zero for the bias when `skip_bias`.
pub fn barrier_curvature(v: ArrayView1<f64>, lambda: f64, skip_bias: bool) -> Array1<f64> {
    let mut o = v.mapv(|x| {
        let s = sigmoid(lambda * x);
        lambda * lambda * s * (1.0 - s)
    });
    if skip_bias && !o.is_empty() {
        o[0] = 0.0;
    }
    o
}

/// Mᵀ C M with C = diag(σ(1 − σ)).
fn weighted_gram(m: &Array2<f64>, sigma: &Array1<f64>) -> Array2<f64> {
    let mut scaled = m.clone();
    for (mut row, &s) in scaled.outer_iter_mut().zip(sigma.iter()) {
        let c = (s * (1.0 - s)).sqrt();
        row.mapv_inplace(|v| v * c);
    }
    scaled.t().dot(&scaled)
}
