use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};

use crate::error::Result;
use crate::linalg::Cholesky;

use super::objective::{Evaluation, Problem};
use super::{HyperParams, TrainConfig};

const MAX_HALVINGS: usize = 20;
const CLIP_BELOW: f64 = -1e-8;

/// Result of [`find_posterior_mode`].
#[derive(Debug, Clone)]
pub struct PosteriorMode {
    pub w: Array1<f64>,
    pub theta: Array1<f64>,
    pub log_joint: f64,
    /// ∞-norm of the projected gradient at the returned point.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Set when no step could increase Q.
    pub stalled: bool,
}

/// A block of variables together with which of them are nonnegative.
struct Block<'a> {
    values: &'a Array1<f64>,
    grad: &'a Array1<f64>,
    /// The first entry is the unconstrained bias.
    has_bias: bool,
}

impl Block<'_> {
    fn constrained(&self, i: usize) -> bool {
        !(self.has_bias && i == 0)
    }

    /// Coordinates held at the nonnegativity bound: at or below zero with
    /// the gradient pointing further down.
    fn at_bound(&self) -> Vec<bool> {
        (0..self.values.len())
            .map(|i| self.constrained(i) && self.values[i] <= 0.0 && self.grad[i] < 0.0)
            .collect()
    }

    /// ∞-norm of the gradient over the coordinates not held at the bound.
    fn projected_norm(&self) -> f64 {
        self.at_bound()
            .into_iter()
            .zip(self.grad)
            .filter(|(bound, _)| !bound)
            .fold(0.0f64, |m, (_, g)| m.max(g.abs()))
    }
}

/// Zeroes constrained components that overshot below the barrier.
fn clip(v: &mut Array1<f64>, has_bias: bool) {
    for x in v.iter_mut().skip(usize::from(has_bias)) {
        if *x < CLIP_BELOW {
            *x = 0.0;
        }
    }
}

/// Newton direction H⁻¹g restricted to the free coordinates; coordinates at
/// the bound get a zero step. A constrained coordinate at or below zero whose
/// step points further down joins the bound set and the step is recomputed,
/// so every moving coordinate stays feasible for small step sizes.
///
/// With `exact_only`, a matrix that needs jitter to factor gives `None`.
fn projected_newton(
    h: &Array2<f64>,
    grad: &Array1<f64>,
    values: &Array1<f64>,
    constrained: &[bool],
    mut bound: Vec<bool>,
    name: &str,
    exact_only: bool,
) -> Result<Option<Array1<f64>>> {
    let len = grad.len();
    loop {
        let free: Vec<usize> = (0..len).filter(|&i| !bound[i]).collect();
        let mut step = Array1::zeros(len);
        if free.is_empty() {
            return Ok(Some(step));
        }
        let chol = if free.len() == len {
            Cholesky::robust(h.view(), name)
        } else {
            Cholesky::robust(h.select(Axis(0), &free).select(Axis(1), &free).view(), name)
        };
        let chol = match chol {
            Ok(c) if !(exact_only && c.jitter > 0.0) => c,
            Ok(_) => return Ok(None),
            Err(_) if exact_only => return Ok(None),
            Err(e) => return Err(e),
        };
        let sub = chol.solve(grad.select(Axis(0), &free).view());
        for (&i, s) in free.iter().zip(sub) {
            step[i] = s;
        }
        let mut changed = false;
        for &i in &free {
            if constrained[i] && values[i] <= 0.0 && step[i] < 0.0 {
                bound[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Ok(Some(step));
        }
    }
}

/// Maximises Q(w, θ) for fixed hyperparameters with damped Newton steps.
///
/// Each sweep first tries a joint step on (w, θ) with the exact Hessian of Q,
/// falling back to the Gauss–Newton matrix (block Hessians ΦᵀCΦ + A + O_w and
/// DᵀCD + B + O_θ, minus E unless `config.drop_e`, coupled by ΦᵀCD) when the
/// exact Hessian is not positive definite. If neither joint step increases
/// Q, separate steps on the w block and on the θ block are tried.
///
/// Nonnegative coordinates sitting at zero whose gradient points below zero
/// are held fixed, and convergence is judged on the gradient of the remaining
/// coordinates. Every step is halved (at most 20 times) until Q does not
/// decrease, so the returned point never has a lower Q than the starting one.
/// The search stops when the projected gradient ∞-norm drops below
/// `config.mode_grad_tol` or after `config.inner_mode_iterations` sweeps.
pub fn find_posterior_mode(
    problem: &Problem,
    w0: ArrayView1<f64>,
    theta0: ArrayView1<f64>,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<PosteriorMode> {
    let mut w = w0.to_owned();
    let mut theta = theta0.to_owned();
    let mut eval = problem.evaluate(w.view(), theta.view(), hyper)?;
    let mut stalled = false;
    let mut iterations = 0;

    loop {
        let d = problem.d_matrix(w.view(), theta.view(), &eval.phi)?;
        let gw = problem.grad_w(&eval, w.view(), hyper);
        let gt = problem.grad_theta(&eval, &d, theta.view(), hyper);
        let grad_norm = Block { values: &w, grad: &gw, has_bias: true }
            .projected_norm()
            .max(Block { values: &theta, grad: &gt, has_bias: false }.projected_norm());
        log::trace!("mode sweep {iterations}: Q = {:.10}, projected gradient {grad_norm:.3e}", eval.log_joint);
        if grad_norm < config.mode_grad_tol || iterations >= config.inner_mode_iterations || stalled {
            return Ok(PosteriorMode {
                log_joint: eval.log_joint,
                w,
                theta,
                grad_norm,
                iterations,
                stalled,
            });
        }
        iterations += 1;

        if joint_step(problem, &mut w, &mut theta, hyper, config, &mut eval, &d, &gw, &gt)? {
            continue;
        }

        let w_moved = w_step(problem, &mut w, theta.view(), hyper, &mut eval, &gw)?;

        let d = problem.d_matrix(w.view(), theta.view(), &eval.phi)?;
        let gt = problem.grad_theta(&eval, &d, theta.view(), hyper);
        let t_moved = theta_step(problem, w.view(), &mut theta, hyper, config, &mut eval, &d, &gt)?;

        stalled = !w_moved && !t_moved;
    }
}

/// Backtracking along `step` from `current`: returns the first clipped trial
/// point that differs from `current` and does not lower Q.
fn line_search<T>(
    current: &Array1<f64>,
    step: &Array1<f64>,
    has_bias: bool,
    baseline: f64,
    mut try_point: impl FnMut(&Array1<f64>) -> Option<(f64, T)>,
) -> Option<(Array1<f64>, T)> {
    let mut scale = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let mut trial = current + &(step * scale);
        clip(&mut trial, has_bias);
        if trial != *current {
            if let Some((q, extra)) = try_point(&trial) {
                if q >= baseline {
                    return Some((trial, extra));
                }
            }
        }
        scale *= 0.5;
    }
    None
}

/// Tries a Newton step on (w, θ) jointly; see [`find_posterior_mode`].
#[allow(clippy::too_many_arguments)]
fn joint_step(
    problem: &Problem,
    w: &mut Array1<f64>,
    theta: &mut Array1<f64>,
    hyper: &HyperParams,
    config: &TrainConfig,
    eval: &mut Evaluation,
    d: &Array2<f64>,
    gw: &Array1<f64>,
    gt: &Array1<f64>,
) -> Result<bool> {
    let (n, m) = (w.len(), theta.len());
    let hw = problem.neg_hessian_w(eval, w.view(), hyper);
    let ht = problem.neg_hessian_theta(eval, d, theta.view(), hyper);
    let coupling = problem.coupling(eval, d);
    let e = problem.e_matrix(w.view(), theta.view(), &eval.phi, eval.residual.view())?;
    let x = problem.cross_matrix(theta.view(), &eval.phi, eval.residual.view())?;
    let assemble = |ht: &Array2<f64>, cross: &Array2<f64>| {
        let mut h = Array2::zeros((n + m, n + m));
        h.slice_mut(s![..n, ..n]).assign(&hw);
        h.slice_mut(s![n.., n..]).assign(ht);
        h.slice_mut(s![..n, n..]).assign(cross);
        h.slice_mut(s![n.., ..n]).assign(&cross.t());
        h
    };
    let ht_e = &ht - &e;
    let exact = assemble(&ht_e, &(&coupling - &x));
    let gauss_newton = assemble(if config.drop_e { &ht } else { &ht_e }, &coupling);

    let values = concatenate![Axis(0), *w, *theta];
    let grad = concatenate![Axis(0), *gw, *gt];
    let mut bound = Block { values: w, grad: gw, has_bias: true }.at_bound();
    bound.extend(Block { values: theta, grad: gt, has_bias: false }.at_bound());
    let constrained: Vec<bool> = (0..n + m).map(|i| i != 0).collect();

    for (h, exact_only) in [(exact, true), (gauss_newton, false)] {
        let Some(step) =
            projected_newton(&h, &grad, &values, &constrained, bound.clone(), "joint Hessian", exact_only)?
        else {
            continue;
        };
        let accepted = line_search(&values, &step, true, eval.log_joint, |trial| {
            let (tw, tt) = trial.view().split_at(Axis(0), n);
            problem
                .evaluate(tw, tt, hyper)
                .ok()
                .map(|c| (c.log_joint, c))
        });
        if let Some((point, candidate)) = accepted {
            *w = point.slice(s![..n]).to_owned();
            *theta = point.slice(s![n..]).to_owned();
            *eval = candidate;
            return Ok(true);
        }
    }
    Ok(false)
}

fn w_step(
    problem: &Problem,
    w: &mut Array1<f64>,
    theta: ArrayView1<f64>,
    hyper: &HyperParams,
    eval: &mut Evaluation,
    grad: &Array1<f64>,
) -> Result<bool> {
    let h = problem.neg_hessian_w(eval, w.view(), hyper);
    let block = Block { values: w, grad, has_bias: true };
    let constrained: Vec<bool> = (0..w.len()).map(|i| block.constrained(i)).collect();
    let step = projected_newton(&h, grad, w, &constrained, block.at_bound(), "w Hessian", false)?
        .expect("jitter allowed");
    let phi = &eval.phi;
    let accepted = line_search(w, &step, true, eval.log_joint, |trial| {
        problem.log_joint_with(phi, trial.view(), theta, hyper).ok().map(|q| (q, ()))
    });
    let Some((trial, ())) = accepted else {
        return Ok(false);
    };
    let phi = std::mem::take(&mut eval.phi);
    *eval = problem.evaluate_with(phi, trial.view(), theta, hyper)?;
    *w = trial;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn theta_step(
    problem: &Problem,
    w: ArrayView1<f64>,
    theta: &mut Array1<f64>,
    hyper: &HyperParams,
    config: &TrainConfig,
    eval: &mut Evaluation,
    d: &Array2<f64>,
    grad: &Array1<f64>,
) -> Result<bool> {
    let h = problem.neg_hessian_theta(eval, d, theta.view(), hyper);
    let bound = Block { values: theta, grad, has_bias: false }.at_bound();
    let constrained = vec![true; theta.len()];
    let mut step = None;
    if !config.drop_e {
        // the full Hessian may be indefinite away from the mode
        let full = &h - &problem.e_matrix(w, theta.view(), &eval.phi, eval.residual.view())?;
        step = projected_newton(&full, grad, theta, &constrained, bound.clone(), "theta Hessian", true)?;
    }
    let step = match step {
        Some(s) => s,
        None => projected_newton(&h, grad, theta, &constrained, bound, "theta Hessian", false)?
            .expect("jitter allowed"),
    };
    let accepted = line_search(theta, &step, false, eval.log_joint, |trial| {
        problem.evaluate(w, trial.view(), hyper).ok().map(|c| (c.log_joint, c))
    });
    let Some((trial, candidate)) = accepted else {
        return Ok(false);
    };
    *eval = candidate;
    *theta = trial;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernel::KernelRef;

    fn random_problem(seed: u64, n: usize, m: usize) -> (Problem, HyperParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| if x[[i, 0]] + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 });
        let samples: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..m).collect();
        let p = Problem::new(x.view(), y.view(), &samples, &features, &KernelRef::rbf(), 5.0).unwrap();
        let hyper = HyperParams {
            alpha: Array1::ones(n + 1),
            beta: Array1::ones(m),
        };
        (p, hyper)
    }

    #[test]
    fn mode_is_stationary_and_improves_q() {
        let config = TrainConfig::default();
        for seed in 0..5 {
            let (p, hyper) = random_problem(seed, 8, 2);
            let w0 = Array1::from_elem(9, 0.01);
            let t0 = Array1::from_elem(2, 0.5);
            let q0 = p.log_joint(w0.view(), t0.view(), &hyper).unwrap();
            let mode = find_posterior_mode(&p, w0.view(), t0.view(), &hyper, &config).unwrap();
            assert!(mode.log_joint >= q0);
            assert!(!mode.stalled);
            assert!(mode.grad_norm < config.mode_grad_tol, "seed {seed}: {}", mode.grad_norm);
            let (gw, gt) = p.gradients(mode.w.view(), mode.theta.view(), &hyper).unwrap();
            // free coordinates are stationary, coordinates at zero push outwards
            for (v, g) in mode.w.iter().skip(1).zip(gw.iter().skip(1)).chain(mode.theta.iter().zip(gt.iter())) {
                assert!(*v >= 0.0);
                assert!(g.abs() < 1e-5 || (*v == 0.0 && *g < 0.0), "v {v} g {g}");
            }
            assert!(gw[0].abs() < 1e-5);
        }
    }

    #[test]
    fn huge_precision_pins_single_sample_weight_to_zero() {
        let x = array![[0.7]];
        let y = array![1.0];
        let p = Problem::new(x.view(), y.view(), &[0], &[0], &KernelRef::rbf(), 5.0).unwrap();
        let hyper = HyperParams {
            alpha: array![1e8, 1e8],
            beta: array![1.0],
        };
        let config = TrainConfig::default();
        let mode = find_posterior_mode(&p, array![0.0, 0.5].view(), array![0.5].view(), &hyper, &config).unwrap();
        assert!(mode.w.iter().all(|v| v.abs() < 1e-7), "{:?}", mode.w);
    }

    #[test]
    fn starting_at_the_mode_stays_there() {
        let config = TrainConfig::default();
        let (p, hyper) = random_problem(11, 8, 2);
        let first = find_posterior_mode(&p, Array1::from_elem(9, 0.01).view(), array![0.5, 0.5].view(), &hyper, &config).unwrap();
        let again = find_posterior_mode(&p, first.w.view(), first.theta.view(), &hyper, &config).unwrap();
        assert!(again.log_joint >= first.log_joint);
        let dw = (&again.w - &first.w).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(dw < 1e-6);
    }
}
