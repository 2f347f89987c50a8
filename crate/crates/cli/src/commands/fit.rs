use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use pfcvm::bayes::fit;
use serde_json::json;

use crate::args::{DataArgs, TrainArgs};
use crate::manifest::RunManifest;
use crate::CliResult;

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Model JSON. The trace goes to the same path with extension
    /// `.trace.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: FitArgs) -> CliResult<()> {
    let kernel = args.train.kernel()?;
    let config = args.train.config()?;
    let dataset = args.data.load()?;

    let resolved = json!({
        "kernel": kernel,
        "format": args.data.resolved_format(),
        "train": config,
    });
    let mut manifest = RunManifest::new("fit", resolved, Some(args.train.seed))?;
    manifest.input(&args.data.data)?;

    let (model, trace) = fit(&dataset, &kernel, &config).context("training failed")?;

    let mut json = model.to_json()?;
    json.push('\n');
    manifest.write_output(&args.out, json.as_bytes())?;
    manifest.write_volatile(&args.out.with_extension("trace.csv"), trace.to_csv().as_bytes())?;
    manifest.save_beside(&args.out)?;

    println!("iterations        {}", model.metadata.iterations);
    println!("converged         {}", model.metadata.converged);
    println!("log evidence      {:.6}", model.metadata.final_log_evidence);
    println!("relevance vectors {}", model.num_relevance_vectors());
    println!("features          {:?}", model.feature_indices);
    Ok(())
}
