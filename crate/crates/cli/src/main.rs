//! `pfcvm`: experiment driver for the sparse Bayesian feature-and-sample
//! selecting classifier.
//!
//! Exit codes: 0 success, 1 usage error, 2 data, model or numeric failure.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{diag, eval, fit, loocv, predict, stability, synth};

#[derive(Debug, Parser)]
#[command(name = "pfcvm", version, about = "Sparse Bayesian classifier with joint feature and sample selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(synth::SynthArgs),
    /// Train a model and write it with its per-iteration trace.
    Fit(fit::FitArgs),
    /// Write decision values, probabilities and labels for a dataset.
    Predict(predict::PredictArgs),
    /// Error rate, AUC and kappa of a model on a labelled dataset.
    Eval(eval::EvalArgs),
    /// Leave-one-out cross validation.
    Loocv(loocv::LoocvArgs),
    /// Feature selection stability over repeated resamples.
    Stability(stability::StabilityArgs),
    /// KL divergence between feature posterior and prior, and the
    /// generalisation bound.
    Diag(diag::DiagArgs),
}

/// Failure classes, mapped onto the exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

impl From<pfcvm::Error> for CliError {
    fn from(e: pfcvm::Error) -> Self {
        CliError::Failure(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PFCVM_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Loocv(a) => loocv::run(a),
        Command::Stability(a) => stability::run(a),
        Command::Diag(a) => diag::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
