//! Feature-weighted basis functions and their derivatives with respect to
//! the feature weights.
//!
//! Every kernel takes a nonnegative weight `theta[k]` per feature. A weight of
//! zero removes the feature from the similarity entirely, which is what makes
//! the weights usable for embedded feature selection.

mod linear;
mod polynomial;
mod rbf;

use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub use linear::Linear;
pub use polynomial::Polynomial;
pub use rbf::Rbf;

/// A basis function family parameterised by per-feature weights.
///
/// `eval` receives the raw kernel value only; the label factor of the design
/// matrix is applied by the callers in this module.
pub trait BasisKernel: Send + Sync + fmt::Debug {
    /// Registry identifier, e.g. `rbf` or `poly:3`. Round-trips through
    /// [`builtin_kernels`].
    fn id(&self) -> String;

    fn eval(&self, x: &[f64], z: &[f64], theta: &[f64]) -> f64;

    /// Adds `scale * ∂φ(x, z)/∂θ` to `out`. `phi` is the value returned by
    /// `eval` for the same arguments.
    fn accumulate_gradient(
        &self,
        x: &[f64],
        z: &[f64],
        theta: &[f64],
        phi: f64,
        scale: f64,
        out: &mut [f64],
    );

    /// Adds `scale * ∂²φ(x, z)/∂θ∂θᵀ` to `out`.
    fn accumulate_hessian(
        &self,
        x: &[f64],
        z: &[f64],
        theta: &[f64],
        phi: f64,
        scale: f64,
        out: &mut ArrayViewMut2<f64>,
    );

    /// False when the kernel is linear in θ, so that its second derivative
    /// vanishes identically.
    fn has_curvature(&self) -> bool {
        true
    }
}

/// The registry holding `rbf`, `linear` and `poly:P`.
pub fn builtin_kernels() -> &'static Registry<dyn BasisKernel> {
    static REGISTRY: OnceLock<Registry<dyn BasisKernel>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg = Registry::new("kernel");
        reg.register("rbf", |arg| match arg {
            None => Ok(Arc::new(Rbf) as Arc<dyn BasisKernel>),
            Some(a) => Err(Error::Domain(format!("rbf takes no argument, got `{a}`"))),
        });
        reg.register("linear", |arg| match arg {
            None => Ok(Arc::new(Linear) as Arc<dyn BasisKernel>),
            Some(a) => Err(Error::Domain(format!("linear takes no argument, got `{a}`"))),
        });
        reg.register("poly", |arg| {
            let order = arg
                .ok_or_else(|| Error::Domain("poly requires an order, e.g. poly:2".into()))?
                .parse::<u32>()
                .map_err(|e| Error::Domain(format!("invalid polynomial order: {e}")))?;
            Ok(Arc::new(Polynomial::new(order)?) as Arc<dyn BasisKernel>)
        });
        reg
    })
}

/// Shared handle to a registered kernel. Serialises as its registry id.
#[derive(Clone)]
pub struct KernelRef(Arc<dyn BasisKernel>);

impl KernelRef {
    pub fn new(kernel: Arc<dyn BasisKernel>) -> Self {
        Self(kernel)
    }

    /// Looks `spec` up in the builtin registry.
    pub fn parse(spec: &str) -> Result<Self> {
        builtin_kernels().resolve(spec).map(Self)
    }

    pub fn rbf() -> Self {
        Self(Arc::new(Rbf))
    }

    pub fn linear() -> Self {
        Self(Arc::new(Linear))
    }

    pub fn polynomial(order: u32) -> Result<Self> {
        Ok(Self(Arc::new(Polynomial::new(order)?)))
    }
}

impl Deref for KernelRef {
    type Target = dyn BasisKernel;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl fmt::Debug for KernelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelRef({})", self.0.id())
    }
}

impl PartialEq for KernelRef {
    fn eq(&self, other: &Self) -> bool {
        self.id() == other.id()
    }
}

impl Serialize for KernelRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for KernelRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let id = String::deserialize(deserializer)?;
        KernelRef::parse(&id).map_err(serde::de::Error::custom)
    }
}

/// A kernel together with its feature weights.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kernel: KernelRef,
    pub theta: Array1<f64>,
}

impl KernelSpec {
    pub fn new(kernel: KernelRef, theta: Array1<f64>) -> Result<Self> {
        check_theta(theta.view())?;
        Ok(Self { kernel, theta })
    }

    pub fn num_features(&self) -> usize {
        self.theta.len()
    }

    fn theta_slice(&self) -> std::borrow::Cow<'_, [f64]> {
        match self.theta.as_slice() {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(self.theta.to_vec()),
        }
    }
}

fn check_theta(theta: ArrayView1<f64>) -> Result<()> {
    for (k, &t) in theta.iter().enumerate() {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!(
                "feature weight theta[{k}] = {t} must be finite and nonnegative"
            )));
        }
    }
    Ok(())
}

/// Evaluates φ_θ(x, z) with full argument checking.
pub fn kernel_value(x: &[f64], z: &[f64], spec: &KernelSpec) -> Result<f64> {
    let m = spec.num_features();
    if x.len() != m || z.len() != m {
        return Err(Error::Dimension(format!(
            "kernel arguments have lengths {} and {}, theta has {m}",
            x.len(),
            z.len()
        )));
    }
    check_theta(spec.theta.view())?;
    Ok(spec.kernel.eval(x, z, &spec.theta_slice()))
}

/// Design matrix Φ_θ: column 0 is the bias column of ones and column `a + 1`
/// holds `φ_θ(row_i, center_a) · label_a`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasisMatrix(Array2<f64>);

impl BasisMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

impl Deref for BasisMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

fn check_conformable(
    rows: &ArrayView2<f64>,
    centers: &ArrayView2<f64>,
    center_labels: &ArrayView1<f64>,
    spec: &KernelSpec,
) -> Result<()> {
    let m = spec.num_features();
    if rows.ncols() != m || centers.ncols() != m {
        return Err(Error::Dimension(format!(
            "rows have {} features and centers {}, theta has {m}",
            rows.ncols(),
            centers.ncols()
        )));
    }
    if center_labels.len() != centers.nrows() {
        return Err(Error::Dimension(format!(
            "{} centers but {} labels",
            centers.nrows(),
            center_labels.len()
        )));
    }
    Ok(())
}

/// Builds Φ_θ for arbitrary evaluation rows against a set of labelled centers.
pub fn design_matrix(
    rows: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    center_labels: ArrayView1<f64>,
    spec: &KernelSpec,
) -> Result<BasisMatrix> {
    check_conformable(&rows, &centers, &center_labels, spec)?;
    let rows = rows.as_standard_layout();
    let centers = centers.as_standard_layout();
    let theta = spec.theta_slice();
    let n = centers.nrows();
    let mut phi = Array2::zeros((rows.nrows(), n + 1));
    for (row, mut out) in rows.outer_iter().zip(phi.outer_iter_mut()) {
        let x = row.as_slice().expect("standard layout");
        out[0] = 1.0;
        for (a, center) in centers.outer_iter().enumerate() {
            let z = center.as_slice().expect("standard layout");
            out[a + 1] = spec.kernel.eval(x, z, &theta) * center_labels[a];
        }
    }
    Ok(BasisMatrix(phi))
}

/// Builds Φ_θ over the training set with the given active samples as centers.
///
/// `x` must already be restricted to the features that `spec.theta` covers.
pub fn basis_matrix(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &KernelSpec,
    active_samples: &[usize],
) -> Result<BasisMatrix> {
    if active_samples.is_empty() {
        return Err(Error::DegenerateModel("no active samples".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(&bad) = active_samples.iter().find(|&&j| j >= x.nrows()) {
        return Err(Error::Dimension(format!(
            "active sample {bad} out of range for {} samples",
            x.nrows()
        )));
    }
    let centers = x.select(Axis(0), active_samples);
    let labels = y.select(Axis(0), active_samples);
    design_matrix(x, centers.view(), labels.view(), spec)
}

fn check_weights(phi: &BasisMatrix, w: &ArrayView1<f64>, rows: usize, centers: usize) -> Result<()> {
    if w.len() != centers + 1 || phi.ncols() != centers + 1 || phi.nrows() != rows {
        return Err(Error::Dimension(format!(
            "weights of length {} and basis {}x{} do not fit {rows} rows and {centers} centers",
            w.len(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    Ok(())
}

/// D = ∂(Φ_θ w)/∂θ, one row per evaluation row and one column per feature.
///
/// The bias weight `w[0]` has no θ dependence and is ignored.
pub fn d_matrix(
    rows: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    center_labels: ArrayView1<f64>,
    w: ArrayView1<f64>,
    spec: &KernelSpec,
    phi: &BasisMatrix,
) -> Result<Array2<f64>> {
    check_conformable(&rows, &centers, &center_labels, spec)?;
    check_weights(phi, &w, rows.nrows(), centers.nrows())?;
    let rows = rows.as_standard_layout();
    let centers = centers.as_standard_layout();
    let theta = spec.theta_slice();
    let m = spec.num_features();
    let mut d = Array2::zeros((rows.nrows(), m));
    for (i, (row, mut out)) in rows.outer_iter().zip(d.outer_iter_mut()).enumerate() {
        let x = row.as_slice().expect("standard layout");
        let out = out.as_slice_mut().expect("standard layout");
        for (a, center) in centers.outer_iter().enumerate() {
            let wa = w[a + 1];
            if wa == 0.0 {
                continue;
            }
            let label = center_labels[a];
            let raw = phi[[i, a + 1]] * label;
            let z = center.as_slice().expect("standard layout");
            spec.kernel
                .accumulate_gradient(x, z, &theta, raw, wa * label, out);
        }
    }
    Ok(d)
}

/// E = Σ_p residual_p ∂²(Φ_θ w)_p/∂θ∂θᵀ, an M×M symmetric matrix.
pub fn e_matrix(
    rows: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    center_labels: ArrayView1<f64>,
    w: ArrayView1<f64>,
    spec: &KernelSpec,
    phi: &BasisMatrix,
    residual: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    check_conformable(&rows, &centers, &center_labels, spec)?;
    check_weights(phi, &w, rows.nrows(), centers.nrows())?;
    if residual.len() != rows.nrows() {
        return Err(Error::Dimension(format!(
            "residual of length {} for {} rows",
            residual.len(),
            rows.nrows()
        )));
    }
    let m = spec.num_features();
    let mut e = Array2::zeros((m, m));
    if !spec.kernel.has_curvature() {
        return Ok(e);
    }
    let rows = rows.as_standard_layout();
    let centers = centers.as_standard_layout();
    let theta = spec.theta_slice();
    let mut view = e.view_mut();
    for (p, row) in rows.outer_iter().enumerate() {
        let r = residual[p];
        if r == 0.0 {
            continue;
        }
        let x = row.as_slice().expect("standard layout");
        for (a, center) in centers.outer_iter().enumerate() {
            let wa = w[a + 1];
            if wa == 0.0 {
                continue;
            }
            let label = center_labels[a];
            let raw = phi[[p, a + 1]] * label;
            let z = center.as_slice().expect("standard layout");
            spec.kernel
                .accumulate_hessian(x, z, &theta, raw, r * wa * label, &mut view);
        }
    }
    Ok(e)
}

/// X = Σ_p residual_p ∂²(Φ_θ w)_p/∂w∂θᵀ, an (N+1)×M matrix whose bias row is
/// zero: row a + 1 is y_a Σ_p residual_p ∂φ(x_p, z_a)/∂θ.
pub fn cross_matrix(
    rows: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    center_labels: ArrayView1<f64>,
    spec: &KernelSpec,
    phi: &BasisMatrix,
    residual: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    check_conformable(&rows, &centers, &center_labels, spec)?;
    if phi.nrows() != rows.nrows() || phi.ncols() != centers.nrows() + 1 || residual.len() != rows.nrows() {
        return Err(Error::Dimension("basis or residual does not fit the rows and centers".into()));
    }
    let rows = rows.as_standard_layout();
    let centers = centers.as_standard_layout();
    let theta = spec.theta_slice();
    let mut x_mat = Array2::zeros((centers.nrows() + 1, spec.num_features()));
    for (a, center) in centers.outer_iter().enumerate() {
        let z = center.as_slice().expect("standard layout");
        let label = center_labels[a];
        let mut out = x_mat.row_mut(a + 1);
        let out = out.as_slice_mut().expect("standard layout");
        for (p, row) in rows.outer_iter().enumerate() {
            let r = residual[p];
            if r == 0.0 {
                continue;
            }
            let x = row.as_slice().expect("standard layout");
            let raw = phi[[p, a + 1]] * label;
            spec.kernel.accumulate_gradient(x, z, &theta, raw, r * label, out);
        }
    }
    Ok(x_mat)
}

#[cfg(test)]
mod tests;
