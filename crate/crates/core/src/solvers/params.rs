use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizers::DEFAULT_PROX_ITERATIONS;

/// Parameters shared by PALM, iPALM and PAM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub lambda_u: f64,
    pub lambda_k: f64,
    /// Inertia `α ∈ [0, 1)`; zero gives PALM.
    pub alpha: f64,
    /// Step size constant `θ > 1`.
    pub theta: f64,
    /// Backtracking factor `η > 1`.
    pub eta: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub max_iterations: usize,
    pub initial_lu: f64,
    pub initial_lk: f64,
    /// Backtracking attempts allowed per block update before giving up.
    pub retry_limit: usize,
    /// Base inner budget of the regularizer proxes.
    pub prox_iterations: usize,
    /// The prox budget may grow to `prox_iterations * prox_budget_factor`.
    pub prox_budget_factor: usize,
    pub pam: PamParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda_u: 0.1,
            lambda_k: 10.0,
            alpha: 0.0,
            theta: 1.1,
            eta: 2.0,
            l_min: 1.0,
            l_max: 1e30,
            max_iterations: 2000,
            initial_lu: 1.0,
            initial_lk: 1.0,
            retry_limit: 60,
            prox_iterations: DEFAULT_PROX_ITERATIONS,
            prox_budget_factor: 16,
            pam: PamParams::default(),
        }
    }
}

/// Inner ADMM settings for PAM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PamParams {
    pub tau_u: f64,
    pub tau_k: f64,
    /// ADMM penalty `ρ`.
    pub rho: f64,
    pub inner_iterations: usize,
    /// Dual FGP iterations per ADMM regularizer step (warm-started).
    pub prox_iterations: usize,
}

impl Default for PamParams {
    fn default() -> Self {
        Self {
            tau_u: 1.0,
            tau_k: 1.0,
            rho: 1.0,
            inner_iterations: 50,
            prox_iterations: 2,
        }
    }
}

fn bad(msg: String) -> Error {
    Error::BadParams(msg)
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !finite_nonneg(self.lambda_u) || !finite_nonneg(self.lambda_k) {
            return Err(bad(format!(
                "regularization weights must be nonnegative, got lambda_u = {}, lambda_k = {}",
                self.lambda_u, self.lambda_k
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(bad(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.theta > 1.0 && self.theta.is_finite()) {
            return Err(bad(format!("theta must exceed 1, got {}", self.theta)));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(bad(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(positive(self.l_min) && positive(self.l_max) && self.l_min <= self.l_max) {
            return Err(bad(format!(
                "need 0 < l_min <= l_max < inf, got [{}, {}]",
                self.l_min, self.l_max
            )));
        }
        if self.max_iterations == 0 {
            return Err(bad("max_iterations must be positive".into()));
        }
        if !positive(self.initial_lu) || !positive(self.initial_lk) {
            return Err(bad("initial Lipschitz estimates must be positive".into()));
        }
        if self.prox_iterations == 0 || self.prox_budget_factor == 0 {
            return Err(bad("prox budget must be positive".into()));
        }
        let pam = &self.pam;
        if !positive(pam.tau_u) || !positive(pam.tau_k) || !positive(pam.rho) {
            return Err(bad("PAM step sizes and penalty must be positive".into()));
        }
        if pam.inner_iterations == 0 || pam.prox_iterations == 0 {
            return Err(bad("PAM inner budgets must be positive".into()));
        }
        Ok(())
    }

    /// Initial estimates clamped into `[l_min, l_max]`.
    pub(crate) fn clamp_l(&self, l: f64) -> f64 {
        l.clamp(self.l_min, self.l_max)
    }
}

/// `τ = (1 - α) / (1 + 2α) · 2 / (θ L)`.
pub fn step_size(alpha: f64, theta: f64, lipschitz: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(bad(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if !(theta > 1.0 && theta.is_finite()) {
        return Err(bad(format!("theta must exceed 1, got {theta}")));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(bad(format!("Lipschitz estimate must be positive, got {lipschitz}")));
    }
    Ok((1.0 - alpha) / (1.0 + 2.0 * alpha) * (2.0 / (theta * lipschitz)))
}
