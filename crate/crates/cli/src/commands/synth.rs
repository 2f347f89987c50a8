use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pfcvm::data::{gen_sparse_informative, gen_waveform, write_dense_csv};
use serde::Serialize;

use super::json_bytes;
use crate::args::sibling;
use crate::manifest::RunManifest;
use crate::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Three-wave problem: 21 informative dimensions plus Gaussian noise.
    Waveform,
    /// Gaussian features, label driven by a few of them.
    SparseInformative,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,

    /// Waveform: samples per class.
    #[arg(long, default_value_t = 200)]
    pub n_per_class: usize,

    /// Waveform: pure-noise dimensions appended after the 21 informative ones.
    #[arg(long, default_value_t = 19)]
    pub noise_dims: usize,

    /// Sparse-informative: samples.
    #[arg(long, default_value_t = 40)]
    pub n: usize,

    /// Sparse-informative: features.
    #[arg(long, default_value_t = 500)]
    pub m: usize,

    /// Sparse-informative: informative features.
    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Sparse-informative: weight of the informative sum in the label.
    #[arg(long, default_value_t = 1.5)]
    pub effect: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV. Sparse-informative also writes `<out>.informative.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("synth", &args, Some(args.seed))?;
    let (dataset, informative) = match args.kind {
        SynthKind::Waveform => (gen_waveform(args.n_per_class, args.noise_dims, args.seed), None),
        SynthKind::SparseInformative => {
            let (d, inf) = gen_sparse_informative(args.n, args.m, args.k, args.effect, args.seed)?;
            (d, Some(inf))
        }
    };
    let mut csv = Vec::new();
    write_dense_csv(&dataset, &mut csv)?;
    manifest.write_output(&args.out, &csv)?;
    if let Some(inf) = informative {
        manifest.write_output(&sibling(&args.out, "informative.json"), &json_bytes(&inf)?)?;
    }
    manifest.save_beside(&args.out)?;
    println!(
        "wrote {} rows x {} features to {}",
        dataset.num_samples(),
        dataset.num_features(),
        args.out.display()
    );
    Ok(())
}
