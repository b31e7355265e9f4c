//! Proximal maps of `λ·dTV + ι_{x≥0}` and `λ·TV + ι_𝕊`.
//!
//! Both are solved in the dual with warm-started fast gradient projection
//! (Beck–Teboulle). For `min_x ½‖x - y‖² + λ Σ‖(P∇x)_i‖ + ι_C(x)` the dual
//! variable `p` lives in the product of unit balls and the primal point is
//! recovered as `x(p) = Proj_C(y + λ div(P p))`. Since `‖P∇‖² ≤ ‖∇‖² ≤ 8`,
//! the dual step is `1 / (8λ)`.

use crate::error::{Error, Result};
use crate::grid::{divergence_into, gradient_into, GradientField, Image, Kernel, Shape2, VectorField};

use super::dtv::{dtv, tv};
use super::simplex::{positive_part, project_simplex_in_place};

pub const DEFAULT_PROX_ITERATIONS: usize = 20;

/// Inner-iteration budget, optional early-stop tolerance on the duality gap,
/// and the dual variable carried between calls.
#[derive(Clone, Debug)]
pub struct ProxConfig {
    pub max_inner_iterations: usize,
    /// Stop once the duality gap falls below this value. Zero runs the full budget.
    pub duality_tolerance: f64,
    dual: Option<GradientField>,
    last_gap: Option<f64>,
    last_iterations: usize,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self::new(DEFAULT_PROX_ITERATIONS)
    }
}

impl ProxConfig {
    pub fn new(max_inner_iterations: usize) -> Self {
        Self {
            max_inner_iterations,
            duality_tolerance: 0.0,
            dual: None,
            last_gap: None,
            last_iterations: 0,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.duality_tolerance = tolerance;
        self
    }

    /// Warm-start dual variable; every entry has norm at most one.
    pub fn dual(&self) -> Option<&GradientField> {
        self.dual.as_ref()
    }

    /// Duality gap at the last output, when a tolerance was requested.
    pub fn last_gap(&self) -> Option<f64> {
        self.last_gap
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn reset(&mut self) {
        self.dual = None;
        self.last_gap = None;
    }
}

#[derive(Clone, Copy)]
enum Constraint {
    Nonnegative,
    Simplex,
}

struct DualSolver<'a> {
    shape: Shape2,
    y: &'a [f64],
    lambda: f64,
    xi: Option<&'a VectorField>,
    constraint: Constraint,
    sort_scratch: Vec<f64>,
    w_row: Vec<f64>,
    w_col: Vec<f64>,
}

impl DualSolver<'_> {
    /// `(a, b) ↦ (a, b) - ⟨ξ, (a, b)⟩ ξ` per pixel.
    fn apply_direction(&self, a: &mut [f64], b: &mut [f64]) {
        if let Some(xi) = self.xi {
            for i in 0..a.len() {
                let (p, q) = (xi.xi_row[i], xi.xi_col[i]);
                let inner = p * a[i] + q * b[i];
                a[i] -= inner * p;
                b[i] -= inner * q;
            }
        }
    }

    fn project(&mut self, x: &mut [f64]) {
        match self.constraint {
            Constraint::Nonnegative => x.iter_mut().for_each(|v| *v = positive_part(*v)),
            Constraint::Simplex => project_simplex_in_place(x, &mut self.sort_scratch),
        }
    }

    /// `x(p) = Proj_C(y + λ div(P p))`.
    fn primal(&mut self, p_row: &[f64], p_col: &[f64], x: &mut [f64]) {
        self.w_row.copy_from_slice(p_row);
        self.w_col.copy_from_slice(p_col);
        let (mut wr, mut wc) = (std::mem::take(&mut self.w_row), std::mem::take(&mut self.w_col));
        self.apply_direction(&mut wr, &mut wc);
        divergence_into(self.shape, &wr, &wc, x);
        for (xv, yv) in x.iter_mut().zip(self.y) {
            *xv = yv + self.lambda * *xv;
        }
        self.w_row = wr;
        self.w_col = wc;
        self.project(x);
    }

    /// `P∇x` into the work buffers.
    fn directional_gradient(&mut self, x: &[f64]) {
        let (mut wr, mut wc) = (std::mem::take(&mut self.w_row), std::mem::take(&mut self.w_col));
        gradient_into(self.shape, x, &mut wr, &mut wc);
        self.apply_direction(&mut wr, &mut wc);
        self.w_row = wr;
        self.w_col = wc;
    }

    /// `λ (Σ‖(P∇x)_i‖ - ⟨P∇x, p⟩)`, the gap between primal and dual values.
    fn gap(&mut self, x: &[f64], p_row: &[f64], p_col: &[f64]) -> f64 {
        self.directional_gradient(x);
        let mut acc = 0.0;
        for i in 0..x.len() {
            let (a, b) = (self.w_row[i], self.w_col[i]);
            acc += a.hypot(b) - (a * p_row[i] + b * p_col[i]);
        }
        self.lambda * acc.max(0.0)
    }

    fn solve(&mut self, cfg: &mut ProxConfig) -> Vec<f64> {
        let n = self.shape.len();
        let (mut p_row, mut p_col) = match cfg.dual.take() {
            Some(d) if d.shape() == self.shape => (d.d_row, d.d_col),
            _ => (vec![0.0; n], vec![0.0; n]),
        };
        let mut q_row = p_row.clone();
        let mut q_col = p_col.clone();
        let mut x = vec![0.0; n];
        let mut t = 1.0f64;
        let step = 1.0 / (8.0 * self.lambda);
        let check_gap = cfg.duality_tolerance > 0.0;
        cfg.last_gap = None;
        let mut iterations = 0;

        for it in 0..cfg.max_inner_iterations {
            iterations = it + 1;
            self.primal(&q_row, &q_col, &mut x);
            self.directional_gradient(&x);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..n {
                let mut a = q_row[i] + step * self.w_row[i];
                let mut b = q_col[i] + step * self.w_col[i];
                let norm = a.hypot(b);
                if norm > 1.0 {
                    a /= norm;
                    b /= norm;
                }
                q_row[i] = a + beta * (a - p_row[i]);
                q_col[i] = b + beta * (b - p_col[i]);
                p_row[i] = a;
                p_col[i] = b;
            }
            t = t_next;

            if check_gap && (it + 1) % 10 == 0 {
                self.primal(&p_row, &p_col, &mut x);
                let gap = self.gap(&x, &p_row, &p_col);
                cfg.last_gap = Some(gap);
                if gap <= cfg.duality_tolerance {
                    break;
                }
            }
        }

        self.primal(&p_row, &p_col, &mut x);
        if check_gap {
            cfg.last_gap = Some(self.gap(&x, &p_row, &p_col));
        }
        cfg.last_iterations = iterations;
        cfg.dual = Some(GradientField::from_raw(self.shape, p_row, p_col));
        x
    }
}

fn check_step(tau: f64, lambda: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::BadStep(tau));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::BadParams(format!(
            "regularization weight must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Approximates `argmin_x ½‖x - y‖² + τλ·dTV(x; ξ) + ι_{x≥0}(x)`.
///
/// The output is exactly nonnegative, and its denoising objective never
/// exceeds that of `max(0, y)`.
pub fn prox_dtv_nonneg(
    y: &Image,
    tau: f64,
    lambda_u: f64,
    xi: &VectorField,
    cfg: &mut ProxConfig,
) -> Result<Image> {
    check_step(tau, lambda_u)?;
    y.ensure_shape(xi.shape())?;
    let projected = y.map(positive_part);
    let weight = tau * lambda_u;
    if weight == 0.0 {
        return Ok(projected);
    }
    let n = y.shape().len();
    let mut solver = DualSolver {
        shape: y.shape(),
        y: y.as_slice(),
        lambda: weight,
        xi: (!xi.is_zero()).then_some(xi),
        constraint: Constraint::Nonnegative,
        sort_scratch: Vec::new(),
        w_row: vec![0.0; n],
        w_col: vec![0.0; n],
    };
    let x = Image::from_raw(y.shape(), solver.solve(cfg));
    let objective = |z: &Image| -> Result<f64> {
        Ok(0.5 * z.sub(y).norm_sq() + weight * dtv(z, xi)?)
    };
    if objective(&x)? <= objective(&projected)? {
        Ok(x)
    } else {
        Ok(projected)
    }
}

/// Approximates `argmin_x ½‖x - y‖² + τλ·TV(x) + ι_𝕊(x)` on the kernel lattice.
///
/// The output always lies in the unit simplex.
pub fn prox_tv_simplex(y: &Kernel, tau: f64, lambda_k: f64, cfg: &mut ProxConfig) -> Result<Kernel> {
    check_step(tau, lambda_k)?;
    let mut scratch = Vec::new();
    let mut projected = y.as_slice().to_vec();
    project_simplex_in_place(&mut projected, &mut scratch);
    let projected = Image::from_raw(y.shape(), projected);
    let weight = tau * lambda_k;
    if weight == 0.0 {
        return Ok(Kernel::from_raw(projected));
    }
    let n = y.shape().len();
    let mut solver = DualSolver {
        shape: y.shape(),
        y: y.as_slice(),
        lambda: weight,
        xi: None,
        constraint: Constraint::Simplex,
        sort_scratch: scratch,
        w_row: vec![0.0; n],
        w_col: vec![0.0; n],
    };
    let x = Image::from_raw(y.shape(), solver.solve(cfg));
    let objective = |z: &Image| 0.5 * z.sub(y).norm_sq() + weight * tv(z);
    if objective(&x) <= objective(&projected) {
        Ok(Kernel::from_raw(x))
    } else {
        Ok(Kernel::from_raw(projected))
    }
}
