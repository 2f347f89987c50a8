use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;
use pfcvm::bayes::FittedModel;
use pfcvm::diagnostics::{generalization_bound, kl_curve, kl_truncated_normal, BoundInput};
use pfcvm::metrics::error_rate;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::json_bytes;
use crate::args::DataArgs;
use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct DiagArgs {
    /// Take θ and β from a fitted model.
    #[arg(long, conflicts_with_all = ["theta", "beta"])]
    pub model: Option<PathBuf>,

    /// Posterior feature means, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,

    /// Posterior feature precisions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,

    /// Prior precisions: one value for every feature, or one per feature.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub beta0: Vec<f64>,

    /// Labelled data for the empirical loss of `--model`.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,

    #[arg(long)]
    pub label_column: Option<usize>,

    #[arg(long)]
    pub no_header: bool,

    /// Empirical loss for the bound, when not computed from `--data`.
    #[arg(long, conflicts_with = "data")]
    pub empirical_loss: Option<f64>,

    /// Sample count for the bound, when not taken from `--data`.
    #[arg(long = "n", conflicts_with = "data")]
    pub n: Option<usize>,

    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,

    /// Tabulate KL of a single feature over θ in [0, grid-max].
    #[arg(long)]
    pub grid_max: Option<f64>,

    #[arg(long, default_value_t = 31)]
    pub grid_points: usize,

    /// Posterior and prior precision used for the grid.
    #[arg(long, default_value_t = 0.5)]
    pub grid_beta: f64,

    /// Report JSON. The grid also goes to `<out stem>.curve.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureKl {
    pub feature: usize,
    pub theta: f64,
    pub beta: f64,
    pub beta0: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagReport {
    pub kl: f64,
    pub features: Vec<FeatureKl>,
    pub bound: Option<BoundReport>,
    pub curve: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub input: BoundInput,
    pub value: f64,
}

pub fn run(args: DiagArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new(
        "diag",
        json!({
            "beta0": args.beta0,
            "c": args.c,
            "r": args.r,
            "g": args.g,
            "delta": args.delta,
            "grid_max": args.grid_max,
            "grid_points": args.grid_points,
            "grid_beta": args.grid_beta,
        }),
        None,
    )?;

    let model = match &args.model {
        Some(path) => {
            manifest.input(path)?;
            Some(FittedModel::load(path)?)
        }
        None => None,
    };
    let (indices, theta, beta) = match &model {
        Some(m) => (m.feature_indices.clone(), m.theta.clone(), m.metadata.beta.clone()),
        None => {
            if args.theta.len() != args.beta.len() {
                return Err(CliError::Usage(format!(
                    "--theta has {} values but --beta has {}",
                    args.theta.len(),
                    args.beta.len()
                )));
            }
            ((0..args.theta.len()).collect(), args.theta.clone(), args.beta.clone())
        }
    };
    let beta0 = match args.beta0.len() {
        1 => vec![args.beta0[0]; theta.len()],
        l if l == theta.len() => args.beta0.clone(),
        l => {
            return Err(CliError::Usage(format!(
                "--beta0 needs 1 or {} values, got {l}",
                theta.len()
            )))
        }
    };

    let mut features = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        features.push(FeatureKl {
            feature: indices[i],
            theta: theta[i],
            beta: beta[i],
            beta0: beta0[i],
            kl: kl_truncated_normal(theta[i], beta[i], beta0[i])?,
        });
    }
    let kl: f64 = features.iter().map(|f| f.kl).sum();

    let loss_and_n = match (&args.data, &model) {
        (Some(path), Some(m)) => {
            manifest.input(path)?;
            let data = DataArgs {
                data: path.clone(),
                format: None,
                label_column: args.label_column,
                no_header: args.no_header,
                num_features: None,
            }
            .load()?;
            let predicted = m.predict_labels(data.x.view())?;
            Some((error_rate(&predicted.to_vec(), &data.y.to_vec())?, data.num_samples()))
        }
        _ => args.empirical_loss.zip(args.n),
    };
    let bound = match loss_and_n {
        Some((empirical_loss, n)) => {
            let input = BoundInput {
                empirical_loss,
                kl,
                n,
                c: args.c,
                r: args.r,
                g: args.g,
                delta: args.delta,
            };
            Some(BoundReport {
                input,
                value: generalization_bound(&input)?,
            })
        }
        None => None,
    };

    let curve = match args.grid_max {
        Some(max) => {
            if args.grid_points < 2 || !(max > 0.0) {
                return Err(CliError::Usage("the grid needs --grid-max > 0 and at least 2 points".into()));
            }
            let step = max / (args.grid_points - 1) as f64;
            let grid: Vec<f64> = (0..args.grid_points).map(|i| i as f64 * step).collect();
            let points = kl_curve(&grid, args.grid_beta, args.grid_beta)?;
            Some(points.into_iter().map(|(theta, kl)| CurvePoint { theta, kl }).collect::<Vec<_>>())
        }
        None => None,
    };

    let report = DiagReport {
        kl,
        features,
        bound,
        curve,
    };
    manifest.write_output(&args.out, &json_bytes(&report)?)?;
    if let Some(curve) = &report.curve {
        let mut table = String::from("theta,kl\n");
        for p in curve {
            writeln!(table, "{},{}", p.theta, p.kl).unwrap();
        }
        manifest.write_output(&args.out.with_extension("curve.csv"), table.as_bytes())?;
    }
    manifest.save_beside(&args.out)?;

    println!("kl     {:.6}", report.kl);
    match &report.bound {
        Some(b) => println!("bound  {:.6}", b.value),
        None => println!("bound  n/a (needs --data, or --empirical-loss and --n)"),
    }
    if let Some(curve) = &report.curve {
        println!("grid   {} points", curve.len());
    }
    Ok(())
}
