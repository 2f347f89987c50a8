use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dataset;

/// Per-column centre and scale estimated on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Array1<f64>,
    /// Sample standard deviation, or 1 where it is zero.
    pub scale: Array1<f64>,
}

impl ColumnStats {
    /// Mean and sample (n − 1) standard deviation of every column.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Dimension("cannot standardise an empty training set".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let scale = if n < 2 {
            Array1::ones(x.ncols())
        } else {
            x.std_axis(Axis(0), 1.0).mapv(|s| if s > 0.0 { s } else { 1.0 })
        };
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "{} columns, statistics for {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        Ok((x - &self.mean) / &self.scale)
    }
}

fn with_x(d: &Dataset, x: Array2<f64>) -> Dataset {
    Dataset {
        x,
        y: d.y.clone(),
        feature_names: d.feature_names.clone(),
    }
}

/// Centres and scales every column of both datasets with statistics taken
/// from `train` only.
pub fn standardize_columns(train: &Dataset, apply_to: &Dataset) -> Result<(Dataset, Dataset, ColumnStats)> {
    let stats = ColumnStats::fit(&train.x)?;
    let a = with_x(train, stats.apply(&train.x)?);
    let b = with_x(apply_to, stats.apply(&apply_to.x)?);
    Ok((a, b, stats))
}

/// Scales each row to mean 0 and population standard deviation 1.
fn standardize_rows(x: &Array2<f64>, name: &str) -> Result<Array2<f64>> {
    let mut out = x.clone();
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        let mean = row.mean().unwrap_or(0.0);
        let sd = row.std(0.0);
        if !(sd > 0.0) {
            return Err(Error::Domain(format!(
                "row {i} of the {name} set has zero variance"
            )));
        }
        row.mapv_inplace(|v| (v - mean) / sd);
    }
    Ok(out)
}

/// Standardises each sample across its features, then each column with
/// training statistics.
pub fn standardize_rows_then_columns(
    train: &Dataset,
    apply_to: &Dataset,
) -> Result<(Dataset, Dataset, ColumnStats)> {
    let a = with_x(train, standardize_rows(&train.x, "training")?);
    let b = with_x(apply_to, standardize_rows(&apply_to.x, "target")?);
    standardize_columns(&a, &b)
}
