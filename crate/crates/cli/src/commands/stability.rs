use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use pfcvm::bayes::{fit, TrainConfig};
use pfcvm::data::{gen_sparse_informative, gen_waveform, per_class_split, Dataset};
use pfcvm::kernel::KernelRef;
use pfcvm::metrics::{error_rate, jaccard_stability, pearson_stability, selection_frequency, SubsetCollection};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::json_bytes;
use super::synth::SynthKind;
use crate::args::{DataArgs, DataFormat, Standardize, TrainArgs};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    /// Dataset to resample. Give either this or `--synth`.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub data: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,

    #[arg(long)]
    pub label_column: Option<usize>,

    #[arg(long)]
    pub no_header: bool,

    #[arg(long)]
    pub num_features: Option<usize>,

    /// Generate the pool instead of reading it.
    #[arg(long, value_enum)]
    pub synth: Option<SynthKind>,

    /// Waveform pool: samples per class.
    #[arg(long, default_value_t = 400)]
    pub pool_per_class: usize,

    #[arg(long, default_value_t = 19)]
    pub noise_dims: usize,

    /// Sparse-informative pool: samples, features, informative features and
    /// effect size.
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1.5)]
    pub effect: f64,

    /// Seed of the generated pool (default: `--seed`).
    #[arg(long)]
    pub data_seed: Option<u64>,

    /// Number of resamples.
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,

    /// Training samples drawn per class; the rest is the test set.
    #[arg(long, default_value_t = 200)]
    pub train_per_class: usize,

    #[arg(long, value_enum, default_value_t = Standardize::None)]
    pub standardize: Standardize,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Report JSON. Selection frequencies also go to
    /// `<out stem>.frequencies.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub features: Vec<usize>,
    /// `None` when the test part is empty.
    pub accuracy: Option<f64>,
    pub relevance_vectors: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub repeats: usize,
    pub completed: usize,
    pub failed: Vec<RepeatFailure>,
    /// `None` when undefined, e.g. Pearson with every feature selected.
    pub jaccard: Option<f64>,
    pub pearson: Option<f64>,
    /// Fraction of completed repeats selecting each feature.
    pub frequencies: Vec<f64>,
    pub mean_subset_size: f64,
    pub mean_accuracy: Option<f64>,
    /// Ground truth of a generated sparse-informative pool.
    pub informative: Option<Vec<usize>>,
    pub outcomes: Vec<RepeatOutcome>,
}

fn run_repeat(
    pool: &Dataset,
    repeat: usize,
    seed: u64,
    args: &StabilityArgs,
    kernel: &KernelRef,
    config: &TrainConfig,
) -> anyhow::Result<RepeatOutcome> {
    let plan = per_class_split(pool, args.train_per_class, seed)?;
    let split = &plan.splits[0];
    let (train, test) = args.standardize.apply(pool.subset(&split.train), pool.subset(&split.test))?;
    let mut config = config.clone();
    config.rng_seed = seed;
    let (model, _) = fit(&train, kernel, &config)?;
    let accuracy = if test.num_samples() == 0 {
        None
    } else {
        let predicted = model.predict_labels(test.x.view())?;
        Some(1.0 - error_rate(&predicted.to_vec(), &test.y.to_vec())?)
    };
    Ok(RepeatOutcome {
        repeat,
        seed,
        features: model.feature_indices.clone(),
        accuracy,
        relevance_vectors: model.num_relevance_vectors(),
        iterations: model.metadata.iterations,
        converged: model.metadata.converged,
    })
}

fn defined(v: pfcvm::Result<f64>) -> pfcvm::Result<Option<f64>> {
    match v {
        Ok(v) => Ok(Some(v)),
        Err(pfcvm::Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn run(args: StabilityArgs) -> CliResult<()> {
    if args.repeats < 2 {
        return Err(CliError::Usage(format!("--repeats must be at least 2, got {}", args.repeats)));
    }
    let kernel = args.train.kernel()?;
    let config = args.train.config()?;
    let data_seed = args.data_seed.unwrap_or(args.train.seed);

    let (pool, informative, source) = match (&args.data, args.synth) {
        (Some(path), _) => {
            let data = DataArgs {
                data: path.clone(),
                format: args.format,
                label_column: args.label_column,
                no_header: args.no_header,
                num_features: args.num_features,
            };
            let source = json!({ "data": path, "format": data.resolved_format() });
            (data.load()?, None, source)
        }
        (None, Some(SynthKind::Waveform)) => {
            let source = json!({
                "synth": SynthKind::Waveform,
                "pool_per_class": args.pool_per_class,
                "noise_dims": args.noise_dims,
                "data_seed": data_seed,
            });
            (gen_waveform(args.pool_per_class, args.noise_dims, data_seed), None, source)
        }
        (None, Some(SynthKind::SparseInformative)) => {
            let (d, inf) = gen_sparse_informative(args.n, args.m, args.k, args.effect, data_seed)?;
            let source = json!({
                "synth": SynthKind::SparseInformative,
                "n": args.n,
                "m": args.m,
                "k": args.k,
                "effect": args.effect,
                "data_seed": data_seed,
            });
            (d, Some(inf), source)
        }
        (None, None) => return Err(CliError::Usage("one of --data or --synth is required".into())),
    };

    let resolved = json!({
        "source": source,
        "repeats": args.repeats,
        "train_per_class": args.train_per_class,
        "standardize": args.standardize,
        "kernel": kernel,
        "train": config,
    });
    let mut manifest = RunManifest::new("stability", resolved, Some(args.train.seed))?;
    if let Some(path) = &args.data {
        manifest.input(path)?;
    }

    let results: Vec<Result<RepeatOutcome, RepeatFailure>> = (0..args.repeats)
        .into_par_iter()
        .map(|repeat| {
            let seed = args.train.seed.wrapping_add(repeat as u64);
            run_repeat(&pool, repeat, seed, &args, &kernel, &config)
                .with_context(|| format!("repeat {repeat}"))
                .map_err(|e| {
                    log::warn!("{e:#}");
                    RepeatFailure {
                        repeat,
                        error: format!("{e:#}"),
                    }
                })
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failed.push(f),
        }
    }
    if outcomes.len() < 2 {
        let first = failed.first().map(|f| f.error.as_str()).unwrap_or("");
        return Err(anyhow::anyhow!(
            "only {} of {} repeats completed; first error: {first}",
            outcomes.len(),
            args.repeats
        )
        .into());
    }

    let subsets = SubsetCollection::new(outcomes.iter().map(|o| o.features.iter().copied()), pool.num_features())?;
    let accuracies: Vec<f64> = outcomes.iter().filter_map(|o| o.accuracy).collect();
    let report = StabilityReport {
        repeats: args.repeats,
        completed: outcomes.len(),
        failed,
        jaccard: defined(jaccard_stability(&subsets))?,
        pearson: defined(pearson_stability(&subsets))?,
        frequencies: selection_frequency(&subsets),
        mean_subset_size: subsets.mean_size(),
        mean_accuracy: (!accuracies.is_empty()).then(|| accuracies.iter().sum::<f64>() / accuracies.len() as f64),
        informative,
        outcomes,
    };

    let mut table = String::from("feature,frequency\n");
    for (k, f) in report.frequencies.iter().enumerate() {
        writeln!(table, "{k},{f}").unwrap();
    }
    manifest.write_output(&args.out, &json_bytes(&report)?)?;
    manifest.write_output(&args.out.with_extension("frequencies.csv"), table.as_bytes())?;
    manifest.save_beside(&args.out)?;

    println!("repeats          {} ({} failed)", report.repeats, report.failed.len());
    println!("jaccard          {}", super::cell(report.jaccard));
    println!("pearson          {}", super::cell(report.pearson));
    println!("mean subset size {:.4}", report.mean_subset_size);
    println!("mean accuracy    {}", super::cell(report.mean_accuracy));
    Ok(())
}
