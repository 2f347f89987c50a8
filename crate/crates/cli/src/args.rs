//! Flag groups shared by several subcommands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use pfcvm::bayes::{HyperRuleRef, TrainConfig};
use pfcvm::data::{
    load_dense_csv, load_sparse_svmlight, standardize_columns, standardize_rows_then_columns, CsvOptions, Dataset,
};
use pfcvm::kernel::KernelRef;
use serde::Serialize;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Svmlight,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input dataset.
    #[arg(long)]
    pub data: PathBuf,

    /// File format; guessed from the extension when omitted (.svm, .svmlight
    /// and .libsvm are svmlight, anything else CSV).
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,

    /// Zero-based CSV column holding the ±1 label (default: last column).
    #[arg(long)]
    pub label_column: Option<usize>,

    /// The CSV file has no header line.
    #[arg(long)]
    pub no_header: bool,

    /// Feature count for svmlight input (default: largest index seen).
    #[arg(long)]
    pub num_features: Option<usize>,
}

impl DataArgs {
    pub fn resolved_format(&self) -> DataFormat {
        self.format.unwrap_or_else(|| {
            match self.data.extension().and_then(|e| e.to_str()) {
                Some("svm" | "svmlight" | "libsvm") => DataFormat::Svmlight,
                _ => DataFormat::Csv,
            }
        })
    }

    pub fn load(&self) -> CliResult<Dataset> {
        let path = &self.data;
        let dataset = match self.resolved_format() {
            DataFormat::Csv => {
                let options = CsvOptions {
                    label_column: self.label_column,
                    has_header: !self.no_header,
                };
                load_dense_csv(path, &options)
            }
            DataFormat::Svmlight => load_sparse_svmlight(path, self.num_features),
        };
        Ok(dataset.with_context(|| format!("reading {}", path.display()))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardize {
    #[default]
    None,
    /// Column z-scores from the training part.
    Columns,
    /// Each row to zero mean and unit variance, then columns.
    RowsColumns,
}

impl Standardize {
    /// Fits on `train` and applies the same transform to `test`.
    pub fn apply(self, train: Dataset, test: Dataset) -> pfcvm::Result<(Dataset, Dataset)> {
        match self {
            Standardize::None => Ok((train, test)),
            Standardize::Columns => standardize_columns(&train, &test).map(|(a, b, _)| (a, b)),
            Standardize::RowsColumns => standardize_rows_then_columns(&train, &test).map(|(a, b, _)| (a, b)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Basis function: rbf, linear or poly:P.
    #[arg(long, default_value = "rbf")]
    pub kernel: String,

    /// Hyperparameter re-estimation rule: mackay or em.
    #[arg(long, default_value = "mackay")]
    pub hyper_rule: String,

    /// Scale of the smoothed nonnegativity indicator.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Precision above which samples and features are pruned.
    #[arg(long)]
    pub prune_max: Option<f64>,

    /// Stop when the log evidence changes by less than this.
    #[arg(long)]
    pub tol: Option<f64>,

    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Leave the second-derivative term out of the feature-weight Hessian.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    pub drop_e: bool,

    /// Initial feature weight (default 1/M).
    #[arg(long)]
    pub init_theta: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn kernel(&self) -> CliResult<KernelRef> {
        KernelRef::parse(&self.kernel).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn config(&self) -> CliResult<TrainConfig> {
        let mut config = TrainConfig::default();
        config.hyper_rule = HyperRuleRef::parse(&self.hyper_rule).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.prune_max {
            config.prune_threshold_max = v;
        }
        if let Some(v) = self.tol {
            config.evidence_tol = v;
        }
        if let Some(v) = self.max_iters {
            config.max_iterations = v;
        }
        config.drop_e = self.drop_e;
        config.init_theta = self.init_theta;
        config.rng_seed = self.seed;
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

/// `<out>.<suffix>`, e.g. `model.json` → `model.json.manifest.json`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

