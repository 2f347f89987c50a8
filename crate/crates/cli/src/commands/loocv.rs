use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use pfcvm::bayes::{fit, TrainConfig};
use pfcvm::data::{loocv_splits, Dataset, Split};
use pfcvm::kernel::KernelRef;
use pfcvm::metrics::{auc, error_rate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cell, json_bytes};
use crate::args::{DataArgs, Standardize, TrainArgs};
use crate::manifest::RunManifest;
use crate::CliResult;

#[derive(Debug, Clone, Args)]
pub struct LoocvArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Preprocessing fitted on each fold's training part.
    #[arg(long, value_enum, default_value_t = Standardize::None)]
    pub standardize: Standardize,

    /// Report JSON. Feature occurrence counts also go to
    /// `<out stem>.occurrences.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub held_out: usize,
    pub truth: f64,
    pub decision_value: f64,
    pub probability: f64,
    pub predicted: f64,
    pub features: Vec<usize>,
    pub relevance_vectors: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub folds: usize,
    pub completed: usize,
    pub failed: Vec<FoldFailure>,
    /// Over completed folds.
    pub error_rate: Option<f64>,
    /// From the pooled held-out probabilities.
    pub auc: Option<f64>,
    pub mean_selected_features: Option<f64>,
    /// How many folds selected each feature.
    pub occurrences: Vec<usize>,
    pub outcomes: Vec<FoldOutcome>,
}

fn run_fold(
    dataset: &Dataset,
    split: &Split,
    fold: usize,
    seed: u64,
    kernel: &KernelRef,
    config: &TrainConfig,
    standardize: Standardize,
) -> anyhow::Result<FoldOutcome> {
    let (train, test) = standardize.apply(dataset.subset(&split.train), dataset.subset(&split.test))?;
    let mut config = config.clone();
    config.rng_seed = seed;
    let (model, _) = fit(&train, kernel, &config)?;
    let row = test.x.row(0);
    Ok(FoldOutcome {
        fold,
        seed,
        held_out: split.test[0],
        truth: test.y[0],
        decision_value: model.decision_value(row)?,
        probability: model.predict_proba(row)?,
        predicted: model.predict_label(row)?,
        features: model.feature_indices.clone(),
        relevance_vectors: model.num_relevance_vectors(),
        iterations: model.metadata.iterations,
        converged: model.metadata.converged,
    })
}

pub fn summarize(num_features: usize, results: Vec<Result<FoldOutcome, FoldFailure>>) -> LoocvReport {
    let folds = results.len();
    let mut outcomes = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failed.push(f),
        }
    }
    let mut occurrences = vec![0usize; num_features];
    for o in &outcomes {
        for &f in &o.features {
            occurrences[f] += 1;
        }
    }
    let predicted: Vec<f64> = outcomes.iter().map(|o| o.predicted).collect();
    let scores: Vec<f64> = outcomes.iter().map(|o| o.probability).collect();
    let truth: Vec<f64> = outcomes.iter().map(|o| o.truth).collect();
    let completed = outcomes.len();
    LoocvReport {
        folds,
        completed,
        failed,
        error_rate: error_rate(&predicted, &truth).ok(),
        auc: auc(&scores, &truth).ok(),
        mean_selected_features: (completed > 0)
            .then(|| outcomes.iter().map(|o| o.features.len()).sum::<usize>() as f64 / completed as f64),
        occurrences,
        outcomes,
    }
}

pub fn run(args: LoocvArgs) -> CliResult<()> {
    let kernel = args.train.kernel()?;
    let config = args.train.config()?;
    let dataset = args.data.load()?;
    let plan = loocv_splits(dataset.num_samples())?;

    let resolved = json!({
        "kernel": kernel,
        "format": args.data.resolved_format(),
        "standardize": args.standardize,
        "train": config,
    });
    let mut manifest = RunManifest::new("loocv", resolved, Some(args.train.seed))?;
    manifest.input(&args.data.data)?;

    let results: Vec<Result<FoldOutcome, FoldFailure>> = plan
        .splits
        .par_iter()
        .enumerate()
        .map(|(fold, split)| {
            let seed = args.train.seed.wrapping_add(fold as u64);
            run_fold(&dataset, split, fold, seed, &kernel, &config, args.standardize)
                .with_context(|| format!("fold {fold}"))
                .map_err(|e| {
                    log::warn!("{e:#}");
                    FoldFailure {
                        fold,
                        error: format!("{e:#}"),
                    }
                })
        })
        .collect();
    let report = summarize(dataset.num_features(), results);

    let mut table = String::from("feature,occurrences\n");
    for (k, c) in report.occurrences.iter().enumerate() {
        writeln!(table, "{k},{c}").unwrap();
    }
    manifest.write_output(&args.out, &json_bytes(&report)?)?;
    manifest.write_output(&args.out.with_extension("occurrences.csv"), table.as_bytes())?;
    manifest.save_beside(&args.out)?;

    println!("folds          {} ({} failed)", report.folds, report.failed.len());
    println!("error rate     {}", cell(report.error_rate));
    println!("auc            {}", cell(report.auc));
    println!("mean features  {}", cell(report.mean_selected_features));
    if report.completed == 0 {
        return Err(anyhow::anyhow!("every fold failed; first error: {}", report.failed[0].error).into());
    }
    Ok(())
}
