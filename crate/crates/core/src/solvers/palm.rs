//! PALM and inertial PALM with backtracking.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::forward::{ForwardPlan, Spectrum};
use crate::grid::{Image, Kernel, VectorField};
use crate::regularizers::{dtv, prox_dtv_nonneg, prox_tv_simplex, tv, ProxConfig};

use super::backtracking::{backtrack_step, Block, BlockProblem, StepInput, StepOutcome};
use super::objective::{FusionProblem, Init};
use super::params::SolverParams;
use super::trace::{IterationRecord, SolverTrace};

/// Iterates, Lipschitz estimates and prox warm starts of one run.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: Image,
    pub u_prev: Image,
    pub k: Kernel,
    pub k_prev: Kernel,
    pub lu: f64,
    pub lk: f64,
    pub iteration: usize,
    pub prox_u: ProxConfig,
    pub prox_k: ProxConfig,
}

impl SolverState {
    pub(crate) fn new(problem: &FusionProblem, init: &Init, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        let g = problem.geometry();
        init.u.ensure_shape(g.image)?;
        init.k.ensure_shape(g.kernel)?;
        if !init.u.as_slice().iter().all(|&v| v >= 0.0) {
            return Err(Error::BadParams("initial image must be nonnegative".into()));
        }
        if !init.k.is_in_simplex() {
            return Err(Error::NotNormalized(init.k.sum()));
        }
        Ok(Self {
            u: init.u.clone(),
            u_prev: init.u.clone(),
            k: init.k.clone(),
            k_prev: init.k.clone(),
            lu: params.clamp_l(params.initial_lu),
            lk: params.clamp_l(params.initial_lk),
            iteration: 0,
            prox_u: ProxConfig::new(params.prox_iterations),
            prox_k: ProxConfig::new(params.prox_iterations),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutput {
    pub state: SolverState,
    pub trace: SolverTrace,
}

impl SolverOutput {
    pub fn u(&self) -> &Image {
        &self.state.u
    }

    pub fn k(&self) -> &Kernel {
        &self.state.k
    }
}

/// An accepted block update, exposed so callers can re-check the
/// backtracking inequalities. Kernel-block arrays are kernel-shaped images.
#[derive(Clone, Copy, Debug)]
pub struct StepAudit<'a> {
    pub iteration: usize,
    pub block: Block,
    pub current: &'a Image,
    pub extrapolated: &'a Image,
    pub gradient: &'a Image,
    pub accepted: &'a Image,
    /// The other variable, held fixed: `k` for the image block, `u⁺` for the kernel block.
    pub partner: &'a Image,
    pub tau: f64,
    pub lipschitz: f64,
    pub retries: usize,
    pub null_step: bool,
}

struct ImageBlock<'a> {
    plan: &'a ForwardPlan,
    f: &'a Image,
    kernel_spectrum: &'a Spectrum,
    xi: &'a VectorField,
    lambda: f64,
    cfg: &'a mut ProxConfig,
}

impl BlockProblem for ImageBlock<'_> {
    fn fidelity(&mut self, x: &Image) -> Result<f64> {
        let ax = self
            .plan
            .apply_spectra(self.kernel_spectrum, &self.plan.transform(x)?)?;
        Ok(0.5 * ax.sub(self.f).norm_sq())
    }

    fn regularizer(&self, x: &Image) -> Result<f64> {
        Ok(self.lambda * dtv(x, self.xi)?)
    }

    fn prox(&mut self, v: &Image, tau: f64, budget: usize) -> Result<Image> {
        self.cfg.max_inner_iterations = budget;
        prox_dtv_nonneg(v, tau, self.lambda, self.xi, self.cfg)
    }
}

struct KernelBlock<'a> {
    plan: &'a ForwardPlan,
    f: &'a Image,
    image_spectrum: &'a Spectrum,
    lambda: f64,
    cfg: &'a mut ProxConfig,
}

impl BlockProblem for KernelBlock<'_> {
    fn fidelity(&mut self, x: &Image) -> Result<f64> {
        let k = Kernel::new(x.clone())?;
        let ax = self
            .plan
            .apply_spectra(self.image_spectrum, &self.plan.kernel_transform(&k)?)?;
        Ok(0.5 * ax.sub(self.f).norm_sq())
    }

    fn regularizer(&self, x: &Image) -> Result<f64> {
        Ok(self.lambda * tv(x))
    }

    fn prox(&mut self, v: &Image, tau: f64, budget: usize) -> Result<Image> {
        self.cfg.max_inner_iterations = budget;
        let k = Kernel::new(v.clone())?;
        Ok(prox_tv_simplex(&k, tau, self.lambda, self.cfg)?.into_image())
    }
}

/// `x + α (x - x⁻)`.
fn extrapolate(x: &Image, prev: &Image, alpha: f64) -> Image {
    x.add_scaled(alpha, &x.sub(prev))
}

pub type Observer<'a> = dyn FnMut(&StepAudit<'_>) + 'a;

/// PALM: alternating backtracked forward-backward steps, image first.
pub fn run_palm(problem: &FusionProblem, params: &SolverParams, init: &Init) -> Result<SolverOutput> {
    run_palm_observed(problem, params, init, &mut |_| {})
}

pub fn run_palm_observed(
    problem: &FusionProblem,
    params: &SolverParams,
    init: &Init,
    observer: &mut Observer<'_>,
) -> Result<SolverOutput> {
    run(problem, params, init, None, observer)
}

/// iPALM with a single inertial parameter `params.alpha` for both blocks.
pub fn run_ipalm(problem: &FusionProblem, params: &SolverParams, init: &Init) -> Result<SolverOutput> {
    run_ipalm_observed(problem, params, init, &mut |_| {})
}

pub fn run_ipalm_observed(
    problem: &FusionProblem,
    params: &SolverParams,
    init: &Init,
    observer: &mut Observer<'_>,
) -> Result<SolverOutput> {
    run(problem, params, init, Some(params.alpha), observer)
}

fn run(
    problem: &FusionProblem,
    params: &SolverParams,
    init: &Init,
    inertia: Option<f64>,
    observer: &mut Observer<'_>,
) -> Result<SolverOutput> {
    let start = Instant::now();
    let mut state = SolverState::new(problem, init, params)?;
    let plan = problem.plan();
    let f = problem.data();
    let alpha = inertia.unwrap_or(0.0);

    let terms = problem.terms(&state.u, &state.k, params)?;
    let mut trace = SolverTrace::default();
    trace.records.push(IterationRecord {
        iter: 0,
        objective: terms.total(),
        data_fidelity: terms.data_fidelity,
        reg_u: terms.reg_u,
        reg_k: terms.reg_k,
        l_u: state.lu,
        l_k: state.lk,
        retries: 0,
        seconds: start.elapsed().as_secs_f64(),
    });
    let mut fidelity = terms.data_fidelity;
    let mut reg_u = terms.reg_u;
    let mut reg_k = terms.reg_k;

    for t in 1..=params.max_iterations {
        // Image block.
        let k_spec = plan.kernel_transform(&state.k)?;
        let u_alpha = match inertia {
            Some(a) => extrapolate(&state.u, &state.u_prev, a),
            None => state.u.clone(),
        };
        let residual = plan.apply_spectra(&k_spec, &plan.transform(&u_alpha)?)?.sub(f);
        let d_alpha = 0.5 * residual.norm_sq();
        let grad = plan.adjoint_spectrum(&residual, &k_spec)?;
        let d_current = if inertia.is_some() { fidelity } else { d_alpha };
        let step_u = {
            let mut block = ImageBlock {
                plan,
                f,
                kernel_spectrum: &k_spec,
                xi: problem.xi(),
                lambda: params.lambda_u,
                cfg: &mut state.prox_u,
            };
            let input = StepInput {
                current: &state.u,
                extrapolated: &u_alpha,
                gradient: &grad,
                fidelity_extrapolated: d_alpha,
                fidelity_current: d_current,
                regularizer_current: reg_u,
            };
            backtrack_step(&mut block, &input, state.lu, alpha, params)?
        };
        audit(observer, t, Block::Image, &state.u, &u_alpha, &grad, &step_u, state.k.image());
        state.u_prev = std::mem::replace(&mut state.u, step_u.next);
        state.lu = step_u.lipschitz;
        reg_u = step_u.regularizer_next;

        // Kernel block at the fresh image.
        let u_spec = plan.transform(&state.u)?;
        let k_alpha = match inertia {
            Some(a) => extrapolate(state.k.image(), state.k_prev.image(), a),
            None => state.k.image().clone(),
        };
        let residual = plan
            .apply_spectra(&u_spec, &plan.kernel_transform(&Kernel::new(k_alpha.clone())?)?)?
            .sub(f);
        let d_alpha = 0.5 * residual.norm_sq();
        let grad = plan
            .restrict_kernel(&plan.adjoint_spectrum(&residual, &u_spec)?)?
            .into_image();
        let d_current = if inertia.is_some() {
            step_u.fidelity_next
        } else {
            d_alpha
        };
        let step_k = {
            let mut block = KernelBlock {
                plan,
                f,
                image_spectrum: &u_spec,
                lambda: params.lambda_k,
                cfg: &mut state.prox_k,
            };
            let input = StepInput {
                current: state.k.image(),
                extrapolated: &k_alpha,
                gradient: &grad,
                fidelity_extrapolated: d_alpha,
                fidelity_current: d_current,
                regularizer_current: reg_k,
            };
            backtrack_step(&mut block, &input, state.lk, alpha, params)?
        };
        audit(observer, t, Block::Kernel, state.k.image(), &k_alpha, &grad, &step_k, &state.u);
        let k_next = Kernel::new(step_k.next)?;
        state.k_prev = std::mem::replace(&mut state.k, k_next);
        state.lk = step_k.lipschitz;
        reg_k = step_k.regularizer_next;
        fidelity = step_k.fidelity_next;
        state.iteration = t;

        trace.records.push(IterationRecord {
            iter: t,
            objective: fidelity + reg_u + reg_k,
            data_fidelity: fidelity,
            reg_u,
            reg_k,
            l_u: state.lu,
            l_k: state.lk,
            retries: step_u.retries + step_k.retries,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SolverOutput { state, trace })
}

#[allow(clippy::too_many_arguments)]
fn audit(
    observer: &mut Observer<'_>,
    iteration: usize,
    block: Block,
    current: &Image,
    extrapolated: &Image,
    gradient: &Image,
    step: &StepOutcome,
    partner: &Image,
) {
    observer(&StepAudit {
        iteration,
        block,
        current,
        extrapolated,
        gradient,
        accepted: &step.next,
        partner,
        tau: step.tau,
        lipschitz: step.lipschitz_used,
        retries: step.retries,
        null_step: step.null_step,
    });
}
