use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{tangent_project, ObjectiveSpec, SubspaceBasis};
use crate::error::{Error, Result};
use crate::linalg;

/// Settings for the manifold conjugate-gradient learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPlusConfig {
    /// Sparsity sharpness ν.
    pub nu: f64,
    /// Weight of the log-det (rank) term.
    pub kappa: f64,
    /// Weight of the joint-sparsity term; 0 disables it.
    pub mu: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub shrink_factor: f64,
    pub restart_every: usize,
    /// Stop once the projected gradient's Frobenius norm falls below this.
    pub grad_tol: f64,
    /// Step tried by the first line search.
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Later line searches start from the previous accepted step divided by
    /// `shrink_factor`, capped so that no atom moves further than
    /// `max_row_step` before retraction.
    pub adaptive_step: bool,
    pub max_row_step: f64,
}

impl Default for GoalPlusConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            kappa: 0.0,
            mu: 0.0,
            max_iters: 100,
            armijo_c: 1e-4,
            shrink_factor: 0.5,
            restart_every: 20,
            grad_tol: 1e-7,
            initial_step: 1.0,
            max_backtracks: 30,
            adaptive_step: true,
            max_row_step: 0.5,
        }
    }
}

impl GoalPlusConfig {
    /// IPAD regime for a layer with `d_in` inputs and `atoms` IPAD atoms.
    pub fn ipad(d_in: usize, atoms: usize) -> Self {
        Self {
            nu: 100.0 * d_in as f64,
            kappa: atoms as f64,
            mu: 0.0,
            ..Self::default()
        }
    }

    /// CAD regime for a layer with `d_in` inputs and `atoms` CAD atoms.
    pub fn cad(d_in: usize, atoms: usize) -> Self {
        Self {
            nu: 100.0 * d_in as f64,
            kappa: 0.1 * atoms as f64,
            mu: 100.0,
            ..Self::default()
        }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nu > 0.0
            && self.kappa >= 0.0
            && self.mu >= 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.restart_every >= 1
            && self.grad_tol >= 0.0
            && self.initial_step > 0.0
            && self.max_row_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid optimizer settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Projected gradient norm below `grad_tol`.
    Converged,
    MaxIterations,
    /// No step along the search direction satisfied the Armijo condition.
    LineSearchFailed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_grad_norm: f64,
}

impl OptimizeReport {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn initial_value(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_value(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Puts `m` on the feasible set: strip components along `U`, then
/// normalize rows. Fails if a row has nothing left.
pub(crate) fn retract(m: &DMatrix<f64>, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    let mut out = basis.project_rows_onto_signal(m);
    let zero = linalg::normalize_rows(&mut out, 1e-300);
    if let Some(&row) = zero.first() {
        return Err(Error::degenerate(format!(
            "atom {row} has no component in the signal subspace"
        )));
    }
    Ok(out)
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).norm()).fold(0.0, f64::max)
}

/// Minimizes `objective` over dictionaries with unit-norm rows orthogonal to
/// `basis.u`, starting from `init` (projected and normalized first).
///
/// Polak–Ribière+ conjugate directions, transported by re-projection at the
/// new point, with restarts every `restart_every` iterations; Armijo
/// backtracking along `Ω + tH` followed by row renormalization.
pub fn optimize(
    objective: &ObjectiveSpec<'_>,
    init: &DMatrix<f64>,
    basis: &SubspaceBasis,
    config: &GoalPlusConfig,
) -> Result<(DMatrix<f64>, OptimizeReport)> {
    config.validate()?;
    objective.validate(init.ncols())?;
    if basis.dim() != init.ncols() {
        return Err(Error::dims("basis and dictionary dimensions differ"));
    }

    let mut omega = retract(init, basis)?;
    let (mut value, mut grad) = objective.value_and_gradient(&omega)?;
    let mut g = tangent_project(&grad, &omega, basis);
    let mut trace = vec![value];
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None; // (G, H)
    let mut step0 = config.initial_step;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    for t in 0..config.max_iters {
        let gnorm = g.norm();
        if gnorm <= config.grad_tol {
            stop = StopReason::Converged;
            break;
        }

        let mut h = -&g;
        if let Some((g_prev, h_prev)) = prev.take() {
            if t % config.restart_every != 0 {
                let g_prev_t = tangent_project(&g_prev, &omega, basis);
                let denom = g_prev.norm_squared();
                let beta = if denom > 0.0 {
                    (inner(&g, &(&g - &g_prev_t)) / denom).max(0.0)
                } else {
                    0.0
                };
                if beta > 0.0 {
                    let h_prev_t = tangent_project(&h_prev, &omega, basis);
                    h += &h_prev_t * beta;
                }
            }
        }
        let mut slope = inner(&g, &h);
        if !(slope < 0.0) {
            h = -&g;
            slope = -gnorm * gnorm;
        }

        let mut step = if config.adaptive_step {
            let hmax = max_row_norm(&h);
            if hmax > 0.0 {
                step0.min(config.max_row_step / hmax)
            } else {
                step0
            }
        } else {
            config.initial_step
        };

        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let mut cand = omega.clone();
            cand += &h * step;
            if let Ok(cand) = retract(&cand, basis) {
                let v = objective.value(&cand);
                if v.is_finite() && v <= value + config.armijo_c * step * slope {
                    accepted = Some((cand, v));
                    break;
                }
            }
            step *= config.shrink_factor;
        }
        let Some((next, _)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };

        iterations = t + 1;
        omega = next;
        let (v, gr) = objective.value_and_gradient(&omega)?;
        value = v;
        grad = gr;
        trace.push(value);
        prev = Some((g, h));
        g = tangent_project(&grad, &omega, basis);
        if config.adaptive_step {
            step0 = step / config.shrink_factor;
        }
    }

    let final_grad_norm = g.norm();
    if stop == StopReason::MaxIterations && final_grad_norm <= config.grad_tol {
        stop = StopReason::Converged;
    }
    Ok((
        omega,
        OptimizeReport {
            trace,
            iterations,
            stop,
            final_grad_norm,
        },
    ))
}
