use std::fmt::Write;
use std::path::PathBuf;

use clap::Args;
use pfcvm::bayes::FittedModel;
use serde_json::json;

use crate::args::DataArgs;
use crate::manifest::RunManifest;
use crate::CliResult;

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    /// Output CSV with one row per sample.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: PredictArgs) -> CliResult<()> {
    let model = FittedModel::load(&args.model)?;
    let dataset = args.data.load()?;
    let mut manifest = RunManifest::new("predict", json!({ "format": args.data.resolved_format() }), None)?;
    manifest.input(&args.model)?;
    manifest.input(&args.data.data)?;

    let x = dataset.x.view();
    let decision = model.decision_values(x)?;
    let proba = model.predict_probas(x)?;
    let labels = model.predict_labels(x)?;

    let mut csv = String::from("row,decision_value,probability,label\n");
    for i in 0..decision.len() {
        writeln!(csv, "{i},{},{},{}", decision[i], proba[i], labels[i] as i64).unwrap();
    }
    manifest.write_output(&args.out, csv.as_bytes())?;
    manifest.save_beside(&args.out)?;
    println!("wrote {} predictions to {}", decision.len(), args.out.display());
    Ok(())
}
