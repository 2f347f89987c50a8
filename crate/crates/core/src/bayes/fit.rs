use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::KernelRef;

use super::hyper::update_hyperparameters;
use super::mode::find_posterior_mode;
use super::model::{FittedModel, TrainingMetadata};
use super::objective::Problem;
use super::posterior::{log_evidence, posterior_covariances, PosteriorApprox};
use super::prune::prune;
use super::{HyperParams, ModelState, TrainConfig};

/// One outer iteration of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Active samples and features the iteration started with.
    pub active_samples: usize,
    pub active_features: usize,
    pub log_evidence: f64,
    pub mode_iterations: usize,
    /// ∞-norm of the gradient of Q where the mode search stopped.
    pub grad_norm: f64,
    pub stalled: bool,
    /// Wall time of the iteration; not reproducible across runs.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,active_samples,active_features,log_evidence,mode_iterations,grad_norm,stalled,seconds\n",
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iteration,
                r.active_samples,
                r.active_features,
                r.log_evidence,
                r.mode_iterations,
                r.grad_norm,
                r.stalled,
                r.seconds
            );
        }
        out
    }

    pub fn evidence(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_evidence).collect()
    }

    /// True when active sample and feature counts never grow.
    pub fn counts_non_increasing(&self) -> bool {
        self.records.windows(2).all(|p| {
            p[1].active_samples <= p[0].active_samples && p[1].active_features <= p[0].active_features
        })
    }
}

/// Every sample and feature active, α = `init_alpha`, β = `init_beta`,
/// w = `init_w` (bias 0) and θ = `init_theta` (1/M by default).
pub fn initial_state(dataset: &Dataset, config: &TrainConfig) -> ModelState {
    let n = dataset.num_samples();
    let m = dataset.num_features();
    let theta0 = config.init_theta.unwrap_or(1.0 / m.max(1) as f64);
    let mut w = Array1::from_elem(n + 1, config.init_w);
    w[0] = 0.0;
    ModelState {
        active_samples: (0..n).collect(),
        active_features: (0..m).collect(),
        w,
        theta: Array1::from_elem(m, theta0),
        hyper: HyperParams {
            alpha: Array1::from_elem(n + 1, config.init_alpha),
            beta: Array1::from_elem(m, config.init_beta),
        },
        evidence_history: Vec::new(),
        iteration: 0,
    }
}

/// Trains a model: on the current active sets, find the posterior mode,
/// form the Laplace covariances and the log evidence, then re-estimate the
/// hyperparameters and prune. Stops when the evidence changes by less than
/// `config.evidence_tol` or after `config.max_iterations` iterations.
///
/// The evidence of an iteration is computed for the hyperparameters that
/// produced its mode, so the returned model is exactly the state whose
/// evidence last entered the stopping rule.
pub fn fit(dataset: &Dataset, kernel: &KernelRef, config: &TrainConfig) -> Result<(FittedModel, TrainTrace)> {
    config.validate()?;
    if !dataset.has_both_classes() {
        return Err(Error::DegenerateModel("both classes required".into()));
    }

    let mut state = initial_state(dataset, config);
    let mut trace = TrainTrace::default();

    let (problem, posterior) = loop {
        state.iteration += 1;
        let it = state.iteration;
        let started = Instant::now();
        let step = |state: &ModelState| -> Result<(Problem, super::mode::PosteriorMode, PosteriorApprox, f64)> {
            let problem = Problem::new(
                dataset.x.view(),
                dataset.y.view(),
                &state.active_samples,
                &state.active_features,
                kernel,
                config.lambda,
            )?;
            let mode = find_posterior_mode(&problem, state.w.view(), state.theta.view(), &state.hyper, config)?;
            let posterior =
                posterior_covariances(&problem, mode.w.view(), mode.theta.view(), &state.hyper, config)?;
            let evidence = log_evidence(&problem, &posterior, &state.hyper)?;
            Ok((problem, mode, posterior, evidence))
        };
        let (problem, mode, posterior, evidence) = step(&state).map_err(|e| e.at_iteration(it))?;

        trace.records.push(IterationRecord {
            iteration: it,
            active_samples: state.active_samples.len(),
            active_features: state.active_features.len(),
            log_evidence: evidence,
            mode_iterations: mode.iterations,
            grad_norm: mode.grad_norm,
            stalled: mode.stalled,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::debug!(
            "iteration {it}: {} samples, {} features, log evidence {evidence:.6}",
            state.active_samples.len(),
            state.active_features.len()
        );

        state.w = mode.w;
        state.theta = mode.theta;
        let previous = state.evidence_history.last().copied();
        state.evidence_history.push(evidence);

        if previous.is_some_and(|p| (evidence - p).abs() < config.evidence_tol) {
            trace.converged = true;
            break (problem, posterior);
        }
        if it >= config.max_iterations {
            break (problem, posterior);
        }

        let step = |state: &ModelState| -> Result<ModelState> {
            let mut next = state.clone();
            next.hyper = update_hyperparameters(&posterior, &state.hyper, config)?;
            prune(&next, config)
        };
        state = step(&state).map_err(|e| e.at_iteration(it))?;
    };

    let model = export(dataset, kernel, config, &state, &problem, &posterior, &trace);
    Ok((model, trace))
}

fn export(
    dataset: &Dataset,
    kernel: &KernelRef,
    config: &TrainConfig,
    state: &ModelState,
    problem: &Problem,
    posterior: &PosteriorApprox,
    trace: &TrainTrace,
) -> FittedModel {
    debug_assert_eq!(problem.num_weights(), state.w.len());
    let relevance_vectors = dataset
        .x
        .select(Axis(0), &state.active_samples)
        .select(Axis(1), &state.active_features);
    FittedModel {
        kernel: kernel.clone(),
        n_features_in: dataset.num_features(),
        feature_indices: state.active_features.clone(),
        theta: state.theta.iter().map(|&t| t.max(0.0)).collect(),
        relevance_indices: state.active_samples.clone(),
        relevance_vectors,
        relevance_labels: state.active_samples.iter().map(|&i| dataset.y[i]).collect(),
        weights: state.w.iter().skip(1).map(|&v| v.max(0.0)).collect(),
        bias: state.w[0],
        sigma_w: posterior.sigma_w.clone(),
        metadata: TrainingMetadata {
            iterations: state.iteration,
            converged: trace.converged,
            final_log_evidence: state.evidence_history.last().copied().unwrap_or(f64::NAN),
            hyper_rule: config.hyper_rule.name().to_string(),
            lambda: config.lambda,
            alpha: state.hyper.alpha.to_vec(),
            beta: state.hyper.beta.to_vec(),
        },
    }
}
