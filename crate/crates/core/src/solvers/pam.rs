//! Proximal alternating minimization with inner ADMM solves.
//!
//! Each half-step solves `argmin_x ½‖x - x₀‖² + τ Ψ(x, ·)` with the splitting
//! `z = C x`, `w = x` (scaled form, penalty `ρ`):
//!
//! * `x`: `((1 + ρ) I + ρ C*C) x = x₀ + ρ C*(z - a) + ρ (w - b)`, diagonal in
//!   Fourier for the image and a small Cholesky solve for the kernel;
//! * `z`: `(τ M*M + ρ I) z = τ M*f + ρ (C x + a)` with `M = S B`, in closed
//!   form because `M M* = I / s²`;
//! * `w`: the regularizer prox with step `τ / ρ`.
//!
//! The inner result replaces `x₀` only if it lowers the subproblem objective,
//! so the outer objective never increases.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{clip_boundary, pad_boundary, sample, sample_adjoint};
use crate::grid::{Image, Kernel, ProblemGeometry};
use crate::regularizers::{dtv, prox_dtv_nonneg, prox_tv_simplex, tv, ProxConfig};

use super::objective::{FusionProblem, Init};
use super::palm::{SolverOutput, SolverState};
use super::params::SolverParams;
use super::trace::{IterationRecord, SolverTrace};

/// Growth of the inner primal residual treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;

/// Warm-start variables of one ADMM subproblem.
#[derive(Clone, Debug, Default)]
pub struct AdmmState {
    z: Option<Vec<f64>>,
    a: Vec<f64>,
    w: Option<Image>,
    b: Vec<f64>,
    prox: Option<ProxConfig>,
}

/// Result of one PAM half-step.
#[derive(Clone, Debug)]
pub struct PamUpdate {
    pub next: Image,
    /// False when the inner solution was rejected and `x₀` was kept.
    pub accepted: bool,
    /// Final primal residual `‖C x - z‖ + ‖x - w‖`.
    pub residual: f64,
}

/// `M y = S B y`.
fn m_apply(y: &Image, g: &ProblemGeometry) -> Result<Image> {
    sample(&clip_boundary(y, g)?, g.sampling)
}

/// `M* d = B* S* d`.
fn m_adjoint(d: &Image, g: &ProblemGeometry) -> Result<Image> {
    pad_boundary(&sample_adjoint(d, g.sampling), g)
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed-form `z = (τ M*M + ρ I)⁻¹ (τ M*f + ρ v)`.
struct ZUpdate {
    mf: Image,
    tau: f64,
    rho: f64,
    beta: f64,
}

impl ZUpdate {
    fn new(f: &Image, g: &ProblemGeometry, tau: f64, rho: f64) -> Result<Self> {
        let s2 = (g.sampling * g.sampling) as f64;
        Ok(Self {
            mf: m_adjoint(f, g)?,
            tau,
            rho,
            beta: tau / (rho + tau / s2),
        })
    }

    fn solve(&self, v: &[f64], g: &ProblemGeometry) -> Result<Vec<f64>> {
        let q: Vec<f64> = self
            .mf
            .as_slice()
            .iter()
            .zip(v)
            .map(|(m, x)| self.tau * m + self.rho * x)
            .collect();
        let q = Image::from_raw(g.image, q);
        let mmq = m_adjoint(&m_apply(&q, g)?, g)?;
        Ok(q
            .as_slice()
            .iter()
            .zip(mmq.as_slice())
            .map(|(a, b)| (a - self.beta * b) / self.rho)
            .collect())
    }
}

struct DivergenceGuard {
    reference: Option<f64>,
    floor: f64,
}

impl DivergenceGuard {
    fn new(scale: f64) -> Self {
        Self {
            reference: None,
            floor: 1e-8 * (1.0 + scale),
        }
    }

    fn check(&mut self, residual: f64) -> Result<()> {
        if !residual.is_finite() {
            return Err(Error::InnerSolveDiverged {
                initial: self.reference.unwrap_or(0.0),
                current: residual,
            });
        }
        let reference = *self.reference.get_or_insert(residual);
        if residual > DIVERGENCE_FACTOR * reference.max(self.floor) {
            return Err(Error::InnerSolveDiverged {
                initial: reference,
                current: residual,
            });
        }
        Ok(())
    }
}

/// Image half-step: approximately `argmin_x ½‖x - u₀‖² + τ_u Ψ(x, k)`.
pub fn pam_image_update(
    problem: &FusionProblem,
    u0: &Image,
    k: &Kernel,
    params: &SolverParams,
    state: &mut AdmmState,
) -> Result<PamUpdate> {
    let plan = problem.plan();
    let g = *problem.geometry();
    let n = g.image.len();
    let fft = plan.fft();
    let (tau, rho) = (params.pam.tau_u, params.pam.rho);
    u0.ensure_shape(g.image)?;

    let k_hat = fft.forward_real(plan.embed_kernel(k)?.as_slice());
    let denom: Vec<f64> = k_hat.iter().map(|h| 1.0 + rho + rho * h.norm_sqr()).collect();
    let u0_hat = fft.forward_real(u0.as_slice());
    let zup = ZUpdate::new(problem.data(), &g, tau, rho)?;

    let mut z = match state.z.take() {
        Some(z) if z.len() == n => z,
        _ => plan.convolve(u0, k)?.into_vec(),
    };
    let mut w = match state.w.take() {
        Some(w) if w.shape() == g.image => w,
        _ => u0.clone(),
    };
    if state.a.len() != n {
        state.a = vec![0.0; n];
        state.b = vec![0.0; n];
    }
    let mut prox = state
        .prox
        .take()
        .unwrap_or_else(|| ProxConfig::new(params.pam.prox_iterations));
    prox.max_inner_iterations = params.pam.prox_iterations;

    let mut guard = DivergenceGuard::new(u0.norm());
    let mut residual = 0.0;
    for _ in 0..params.pam.inner_iterations {
        let za: Vec<f64> = z.iter().zip(&state.a).map(|(z, a)| z - a).collect();
        let wb: Vec<f64> = w.as_slice().iter().zip(&state.b).map(|(w, b)| w - b).collect();
        let za_hat = fft.forward_real(&za);
        let wb_hat = fft.forward_real(&wb);
        let x_hat: Vec<Complex64> = (0..n)
            .map(|i| (u0_hat[i] + rho * (k_hat[i].conj() * za_hat[i] + wb_hat[i])) / denom[i])
            .collect();
        let cx = fft.inverse_real(x_hat.iter().zip(&k_hat).map(|(x, h)| x * h).collect());
        let x = fft.inverse_real(x_hat);

        let v: Vec<f64> = cx.iter().zip(&state.a).map(|(c, a)| c + a).collect();
        z = zup.solve(&v, &g)?;
        let xb = Image::from_raw(g.image, x.iter().zip(&state.b).map(|(x, b)| x + b).collect());
        w = prox_dtv_nonneg(&xb, tau / rho, params.lambda_u, problem.xi(), &mut prox)?;

        for i in 0..n {
            state.a[i] += cx[i] - z[i];
            state.b[i] += x[i] - w.as_slice()[i];
        }
        residual = norm_diff(&cx, &z) + norm_diff(&x, w.as_slice());
        guard.check(residual)?;
    }

    let subproblem = |x: &Image| -> Result<f64> {
        let d = 0.5 * plan.apply(x, k)?.sub(problem.data()).norm_sq();
        Ok(0.5 * x.sub(u0).norm_sq() + tau * (d + params.lambda_u * dtv(x, problem.xi())?))
    };
    let accepted = subproblem(&w)? <= subproblem(u0)?;
    let next = if accepted { w.clone() } else { u0.clone() };
    state.z = Some(z);
    state.w = Some(w);
    state.prox = Some(prox);
    Ok(PamUpdate {
        next,
        accepted,
        residual,
    })
}

/// Kernel half-step: approximately `argmin_k ½‖k - k₀‖² + τ_k Ψ(u, k)`.
pub fn pam_kernel_update(
    problem: &FusionProblem,
    u: &Image,
    k0: &Kernel,
    params: &SolverParams,
    state: &mut AdmmState,
) -> Result<PamUpdate> {
    let plan = problem.plan();
    let g = *problem.geometry();
    let m = g.image;
    let n = m.len();
    let r = g.kernel;
    let nk = r.len();
    let fft = plan.fft();
    let (tau, rho) = (params.pam.tau_k, params.pam.rho);
    k0.ensure_shape(r)?;

    let u_hat = fft.forward_real(u.as_slice());
    // G[a, b] = ⟨C_u J e_a, C_u J e_b⟩ is the cyclic autocorrelation of u at
    // the difference of the embedded tap positions.
    let autocorr = fft.inverse_real(u_hat.iter().map(|h| Complex64::new(h.norm_sqr(), 0.0)).collect());
    let pos: Vec<(usize, usize)> = (0..r.rows)
        .flat_map(|a| {
            (0..r.cols).map(move |b| {
                (
                    (a + m.rows - g.margin.rows) % m.rows,
                    (b + m.cols - g.margin.cols) % m.cols,
                )
            })
        })
        .collect();
    let system = DMatrix::from_fn(nk, nk, |i, j| {
        let dr = (pos[i].0 + m.rows - pos[j].0) % m.rows;
        let dc = (pos[i].1 + m.cols - pos[j].1) % m.cols;
        rho * autocorr[m.index(dr, dc)] + if i == j { 1.0 + rho } else { 0.0 }
    });
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::BadParams("kernel ADMM system is not positive definite".into()))?;
    let zup = ZUpdate::new(problem.data(), &g, tau, rho)?;

    let mut z = match state.z.take() {
        Some(z) if z.len() == n => z,
        _ => plan.convolve(u, k0)?.into_vec(),
    };
    let mut w = match state.w.take() {
        Some(w) if w.shape() == r => w,
        _ => k0.image().clone(),
    };
    if state.a.len() != n || state.b.len() != nk {
        state.a = vec![0.0; n];
        state.b = vec![0.0; nk];
    }
    let mut prox = state
        .prox
        .take()
        .unwrap_or_else(|| ProxConfig::new(params.pam.prox_iterations));
    prox.max_inner_iterations = params.pam.prox_iterations;

    let mut guard = DivergenceGuard::new(k0.norm());
    let mut residual = 0.0;
    let k0v = k0.as_slice();
    for _ in 0..params.pam.inner_iterations {
        let za: Vec<f64> = z.iter().zip(&state.a).map(|(z, a)| z - a).collect();
        let mut za_hat = to_complex(&za);
        fft.forward(&mut za_hat);
        for (v, h) in za_hat.iter_mut().zip(&u_hat) {
            *v *= h.conj();
        }
        let back = fft.inverse_real(za_hat);
        let rhs = DVector::from_fn(nk, |i, _| {
            let (pr, pc) = pos[i];
            k0v[i] + rho * back[m.index(pr, pc)] + rho * (w.as_slice()[i] - state.b[i])
        });
        let x = chol.solve(&rhs);

        let mut embedded = vec![Complex64::new(0.0, 0.0); n];
        for (i, &(pr, pc)) in pos.iter().enumerate() {
            embedded[m.index(pr, pc)] = Complex64::new(x[i], 0.0);
        }
        fft.forward(&mut embedded);
        for (v, h) in embedded.iter_mut().zip(&u_hat) {
            *v *= h;
        }
        let cx = fft.inverse_real(embedded);

        let v: Vec<f64> = cx.iter().zip(&state.a).map(|(c, a)| c + a).collect();
        z = zup.solve(&v, &g)?;
        let xb = Kernel::new(Image::from_raw(r, (0..nk).map(|i| x[i] + state.b[i]).collect()))?;
        w = prox_tv_simplex(&xb, tau / rho, params.lambda_k, &mut prox)?.into_image();

        for i in 0..n {
            state.a[i] += cx[i] - z[i];
        }
        for i in 0..nk {
            state.b[i] += x[i] - w.as_slice()[i];
        }
        residual = norm_diff(&cx, &z) + norm_diff(x.as_slice(), w.as_slice());
        guard.check(residual)?;
    }

    let subproblem = |x: &Kernel| -> Result<f64> {
        let d = 0.5 * plan.apply(u, x)?.sub(problem.data()).norm_sq();
        Ok(0.5 * x.sub(k0).norm_sq() + tau * (d + params.lambda_k * tv(x)))
    };
    let candidate = Kernel::new(w.clone())?;
    let accepted = subproblem(&candidate)? <= subproblem(k0)?;
    let next = if accepted {
        w.clone()
    } else {
        k0.image().clone()
    };
    state.z = Some(z);
    state.w = Some(w);
    state.prox = Some(prox);
    Ok(PamUpdate {
        next,
        accepted,
        residual,
    })
}

/// PAM: image half-step, then kernel half-step at the new image.
pub fn run_pam(problem: &FusionProblem, params: &SolverParams, init: &Init) -> Result<SolverOutput> {
    let start = Instant::now();
    let mut state = SolverState::new(problem, init, params)?;
    state.lu = 1.0 / params.pam.tau_u;
    state.lk = 1.0 / params.pam.tau_k;
    let mut admm_u = AdmmState::default();
    let mut admm_k = AdmmState::default();
    let mut trace = SolverTrace::default();
    let record = |iter: usize, state: &SolverState, trace: &mut SolverTrace| -> Result<()> {
        let terms = problem.terms(&state.u, &state.k, params)?;
        trace.records.push(IterationRecord {
            iter,
            objective: terms.total(),
            data_fidelity: terms.data_fidelity,
            reg_u: terms.reg_u,
            reg_k: terms.reg_k,
            l_u: state.lu,
            l_k: state.lk,
            retries: 0,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };
    record(0, &state, &mut trace)?;

    for t in 1..=params.max_iterations {
        let up = pam_image_update(problem, &state.u, &state.k, params, &mut admm_u)?;
        state.u_prev = std::mem::replace(&mut state.u, up.next);
        let kp = pam_kernel_update(problem, &state.u, &state.k, params, &mut admm_k)?;
        let k_next = Kernel::new(kp.next)?;
        state.k_prev = std::mem::replace(&mut state.k, k_next);
        state.iteration = t;
        record(t, &state, &mut trace)?;
    }
    Ok(SolverOutput { state, trace })
}
