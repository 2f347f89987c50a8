use std::path::PathBuf;

use clap::Args;
use pfcvm::bayes::FittedModel;
use pfcvm::metrics::EvalReport;
use serde_json::json;

use super::{cell, json_bytes};
use crate::args::DataArgs;
use crate::manifest::RunManifest;
use crate::CliResult;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let model = FittedModel::load(&args.model)?;
    let dataset = args.data.load()?;
    let mut manifest = RunManifest::new("eval", json!({ "format": args.data.resolved_format() }), None)?;
    manifest.input(&args.model)?;
    manifest.input(&args.data.data)?;

    let x = dataset.x.view();
    let labels = model.predict_labels(x)?;
    let proba = model.predict_probas(x)?;
    let truth = dataset.y.to_vec();
    let report = EvalReport::compute(&labels.to_vec(), &proba.to_vec(), &truth)?;

    manifest.write_output(&args.out, &json_bytes(&report)?)?;
    manifest.save_beside(&args.out)?;

    println!("samples      {}", report.n);
    println!("error rate   {:.4}", report.error_rate);
    println!("auc          {}", cell(report.auc));
    println!("kappa        {}", cell(report.kappa));
    println!("kappa stderr {}", cell(report.kappa_stderr));
    Ok(())
}
