use crate::error::{Error, Result};
use crate::forward::{upsample_init, ForwardPlan};
use crate::grid::{geometry_from, Image, Kernel, ProblemGeometry, Shape2, VectorField};
use crate::regularizers::{build_vector_field, dtv, tv, DtvParams};

use super::params::SolverParams;

/// Data, side-information direction field and forward plan of one fusion
/// problem. Shared read-only by any number of solver runs.
#[derive(Clone, Debug)]
pub struct FusionProblem {
    plan: ForwardPlan,
    data: Image,
    xi: VectorField,
}

impl FusionProblem {
    /// Builds the geometry from the data and kernel shapes and checks the side
    /// information against it.
    pub fn new(
        data: Image,
        side_info: &Image,
        kernel: Shape2,
        sampling: usize,
        dtv_params: &DtvParams,
    ) -> Result<Self> {
        let geometry = geometry_from(data.shape(), kernel, sampling)?;
        if side_info.shape() != geometry.image {
            return Err(Error::GeometryMismatch {
                expected: geometry.image,
                found: side_info.shape(),
            });
        }
        let xi = build_vector_field(side_info, dtv_params);
        Self::from_parts(ForwardPlan::new(geometry), data, xi)
    }

    pub fn from_parts(plan: ForwardPlan, data: Image, xi: VectorField) -> Result<Self> {
        data.ensure_shape(plan.geometry().data)?;
        if xi.shape() != plan.geometry().image {
            return Err(Error::GeometryMismatch {
                expected: plan.geometry().image,
                found: xi.shape(),
            });
        }
        Ok(Self { plan, data, xi })
    }

    pub fn plan(&self) -> &ForwardPlan {
        &self.plan
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        self.plan.geometry()
    }

    pub fn data(&self) -> &Image {
        &self.data
    }

    pub fn xi(&self) -> &VectorField {
        &self.xi
    }

    /// Upsampled data and a centered Gaussian with `σ = min(r) / 8`.
    pub fn default_init(&self) -> Result<Init> {
        let g = self.geometry();
        let sigma = g.kernel.rows.min(g.kernel.cols) as f64 / 8.0;
        Ok(Init {
            u: upsample_init(&self.data, g)?,
            k: gaussian_init_kernel(g.kernel, sigma)?,
        })
    }

    pub fn terms(&self, u: &Image, k: &Kernel, params: &SolverParams) -> Result<ObjectiveTerms> {
        objective_terms(u, k, &self.data, params, &self.xi, &self.plan)
    }
}

/// Starting point of a solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct Init {
    pub u: Image,
    pub k: Kernel,
}

/// `D(u, k) = ½‖A_k u - f‖²`.
pub fn data_fidelity(u: &Image, k: &Kernel, f: &Image, plan: &ForwardPlan) -> Result<f64> {
    f.ensure_shape(plan.geometry().data)?;
    Ok(0.5 * plan.apply(u, k)?.sub(f).norm_sq())
}

/// `∇_u D = A_k*(A_k u - f)`.
pub fn grad_u(u: &Image, k: &Kernel, f: &Image, plan: &ForwardPlan) -> Result<Image> {
    f.ensure_shape(plan.geometry().data)?;
    let h = plan.kernel_transform(k)?;
    let residual = plan.apply_spectra(&h, &plan.transform(u)?)?.sub(f);
    plan.adjoint_spectrum(&residual, &h)
}

/// `∇_k D = J* A_u*(A_u J k - f)`.
pub fn grad_k(u: &Image, k: &Kernel, f: &Image, plan: &ForwardPlan) -> Result<Kernel> {
    f.ensure_shape(plan.geometry().data)?;
    let h = plan.transform(u)?;
    let residual = plan.apply_spectra(&h, &plan.kernel_transform(k)?)?.sub(f);
    plan.restrict_kernel(&plan.adjoint_spectrum(&residual, &h)?)
}

/// The three parts of `Ψ`, with regularizer values already weighted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub data_fidelity: f64,
    pub reg_u: f64,
    pub reg_k: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.data_fidelity + self.reg_u + self.reg_k
    }
}

/// `u ≥ 0` componentwise and `k ∈ 𝕊`.
pub fn is_feasible(u: &Image, k: &Kernel) -> bool {
    u.as_slice().iter().all(|&v| v >= 0.0) && k.is_in_simplex()
}

/// Term-wise evaluation of `Ψ`. Indicator terms are infinite when violated.
pub fn objective_terms(
    u: &Image,
    k: &Kernel,
    f: &Image,
    params: &SolverParams,
    xi: &VectorField,
    plan: &ForwardPlan,
) -> Result<ObjectiveTerms> {
    let data_fidelity = data_fidelity(u, k, f, plan)?;
    let mut reg_u = params.lambda_u * dtv(u, xi)?;
    let mut reg_k = params.lambda_k * tv(k);
    if !u.as_slice().iter().all(|&v| v >= 0.0) {
        reg_u = f64::INFINITY;
    }
    if !k.is_in_simplex() {
        reg_k = f64::INFINITY;
    }
    Ok(ObjectiveTerms {
        data_fidelity,
        reg_u,
        reg_k,
    })
}

/// `Ψ(u, k)`; `+∞` when `u` has a negative pixel or `k` leaves the simplex.
pub fn objective(
    u: &Image,
    k: &Kernel,
    f: &Image,
    params: &SolverParams,
    xi: &VectorField,
    plan: &ForwardPlan,
) -> Result<f64> {
    Ok(objective_terms(u, k, f, params, xi, plan)?.total())
}

/// Centered isotropic Gaussian on the kernel lattice, normalized to unit sum.
pub fn gaussian_init_kernel(shape: Shape2, sigma: f64) -> Result<Kernel> {
    if !shape.is_odd() {
        return Err(Error::EvenKernel(shape));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadParams(format!("sigma must be positive, got {sigma}")));
    }
    let (cr, cc) = ((shape.rows / 2) as f64, (shape.cols / 2) as f64);
    let raw = Image::from_fn(shape, |r, c| {
        let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    });
    let total = raw.sum();
    Kernel::new(raw.scale(1.0 / total))
}
