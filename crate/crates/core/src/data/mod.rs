//! Datasets, file loaders, normalisation, synthetic generators and
//! train/test split plans.

mod io;
mod split;
mod standardize;
mod synth;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub use io::{
    load_dense_csv, load_sparse_svmlight, parse_sparse_svmlight, read_dense_csv, write_dense_csv, CsvOptions,
};
pub use split::{loocv_splits, per_class_split, stratified_split, Split, SplitPlan};
pub use standardize::{standardize_columns, standardize_rows_then_columns, ColumnStats};
pub use synth::{gen_sparse_informative, gen_waveform, WAVEFORM_INFORMATIVE};

/// A labelled binary classification dataset. Labels are ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Checks that every entry is finite and every label is ±1.
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(((i, k), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value {v} at row {i}, column {k}")));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
            return Err(Error::Domain(format!("label {v} at row {i} is not ±1")));
        }
        Ok(Self {
            x,
            y,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_features() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} features",
                names.len(),
                self.num_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    /// (positives, negatives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v > 0.0).count();
        (pos, self.y.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (p, n) = self.class_counts();
        p > 0 && n > 0
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
        }
    }

    /// The same samples with every label negated.
    pub fn flipped(&self) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.mapv(|v| -v),
            feature_names: self.feature_names.clone(),
        }
    }
}
