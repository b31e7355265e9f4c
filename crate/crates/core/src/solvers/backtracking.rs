//! Forward-backward steps with Lipschitz backtracking.
//!
//! A trial point `x⁺ = prox_{τR}(x_α - τ g)` is accepted once
//!
//! ```text
//! D(x⁺) ≤ D(x_α) + ⟨g, x⁺ - x_α⟩ + L/2 ‖x⁺ - x_α‖²                         (descent)
//! R(x⁺) ≤ R(x) + ⟨g, x - x⁺⟩ + 1/(2τ) (‖x - x_α‖² - ‖x⁺ - x_α‖²)          (prox descent)
//! ```
//!
//! both hold. A failed descent test raises `L`. A failed prox-descent test
//! doubles the inner prox budget up to a cap; past the cap the step falls
//! back to the null step `x⁺ = x`, which satisfies the prox-descent test with
//! equality. Without inertia, the step must additionally not increase
//! `D + R`, which makes PALM monotone even with an inexact prox.

use crate::error::{Error, Result};
use crate::grid::Image;

use super::params::{step_size, SolverParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Image,
    Kernel,
}

/// One block of the objective seen as a function of a single array.
pub trait BlockProblem {
    /// Smooth part `D`.
    fn fidelity(&mut self, x: &Image) -> Result<f64>;
    /// Weighted regularizer value at a feasible point.
    fn regularizer(&self, x: &Image) -> Result<f64>;
    /// Approximate `prox_{τR}(v)` with the given inner iteration budget.
    fn prox(&mut self, v: &Image, tau: f64, budget: usize) -> Result<Image>;
}

/// Quantities at the current and extrapolated points that the test needs.
#[derive(Clone, Copy, Debug)]
pub struct StepInput<'a> {
    pub current: &'a Image,
    pub extrapolated: &'a Image,
    /// `∇D(x_α)`.
    pub gradient: &'a Image,
    /// `D(x_α)`.
    pub fidelity_extrapolated: f64,
    /// `D(x)`.
    pub fidelity_current: f64,
    /// `R(x)`.
    pub regularizer_current: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub next: Image,
    /// Estimate to use for the next call.
    pub lipschitz: f64,
    /// Estimate under which `next` passed the tests.
    pub lipschitz_used: f64,
    pub tau: f64,
    pub fidelity_next: f64,
    pub regularizer_next: f64,
    pub retries: usize,
    pub null_step: bool,
}

/// Descent inequality, evaluated literally.
pub fn descent_holds(
    fidelity_next: f64,
    fidelity_extrapolated: f64,
    gradient: &Image,
    next: &Image,
    extrapolated: &Image,
    lipschitz: f64,
) -> bool {
    let step = next.sub(extrapolated);
    fidelity_next
        <= fidelity_extrapolated + gradient.dot(&step) + 0.5 * lipschitz * step.norm_sq()
}

/// Proximal descent inequality, evaluated literally.
pub fn prox_descent_holds(
    regularizer_next: f64,
    regularizer_current: f64,
    gradient: &Image,
    current: &Image,
    next: &Image,
    extrapolated: &Image,
    tau: f64,
) -> bool {
    let back = current.sub(next);
    let rhs = regularizer_current
        + gradient.dot(&back)
        + (current.sub(extrapolated).norm_sq() - next.sub(extrapolated).norm_sq()) / (2.0 * tau);
    regularizer_next <= rhs
}

/// One backtracking forward-backward step. `alpha` is the inertia used for
/// the step size; with `alpha == 0` the step is also required to be monotone.
pub fn backtrack_step<P: BlockProblem + ?Sized>(
    problem: &mut P,
    input: &StepInput<'_>,
    lipschitz: f64,
    alpha: f64,
    params: &SolverParams,
) -> Result<StepOutcome> {
    let base = params.prox_iterations;
    let cap = base.saturating_mul(params.prox_budget_factor);
    let mut budget = base;
    let mut l = lipschitz;
    let mut retries = 0;
    let mut null_step = false;

    loop {
        let tau = step_size(alpha, params.theta, l)?;
        let (next, fidelity_next, regularizer_next) = if null_step {
            (
                input.current.clone(),
                input.fidelity_current,
                input.regularizer_current,
            )
        } else {
            let v = input.extrapolated.add_scaled(-tau, input.gradient);
            let next = problem.prox(&v, tau, budget)?;
            let d = problem.fidelity(&next)?;
            let r = problem.regularizer(&next)?;
            (next, d, r)
        };

        let descent = descent_holds(
            fidelity_next,
            input.fidelity_extrapolated,
            input.gradient,
            &next,
            input.extrapolated,
            l,
        );
        if !descent {
            if retries >= params.retry_limit {
                return Err(Error::BacktrackStall { retries, lipschitz: l });
            }
            retries += 1;
            l = (params.eta * l).min(params.l_max);
            continue;
        }

        let prox_ok = prox_descent_holds(
            regularizer_next,
            input.regularizer_current,
            input.gradient,
            input.current,
            &next,
            input.extrapolated,
            tau,
        );
        let monotone = alpha != 0.0
            || fidelity_next + regularizer_next
                <= input.fidelity_current + input.regularizer_current;
        if prox_ok && monotone {
            return Ok(StepOutcome {
                next,
                lipschitz: (l / params.eta).max(params.l_min),
                lipschitz_used: l,
                tau,
                fidelity_next,
                regularizer_next,
                retries,
                null_step,
            });
        }

        if retries >= params.retry_limit {
            return Err(Error::BacktrackStall { retries, lipschitz: l });
        }
        retries += 1;
        if budget < cap {
            budget = (budget * 2).min(cap);
        } else {
            null_step = true;
        }
    }
}
