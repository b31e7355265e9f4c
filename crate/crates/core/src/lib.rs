//! Blind image fusion for hyperspectral super-resolution.
//!
//! Jointly estimates a high-resolution image `u` and a blur kernel `k` from
//! low-resolution data `f` and a high-resolution guide image by minimizing
//!
//! ```text
//! Ψ(u, k) = ½‖S B (k ∗ u) − f‖² + λ_u dTV(u) + ι_{u≥0} + λ_k TV(k) + ι_𝕊(k)
//! ```
//!
//! with PALM, inertial PALM or PAM.

pub mod error;
mod fft;
pub mod forward;
pub mod grid;
pub mod imageio;
pub mod metrics;
pub mod regularizers;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use forward::ForwardPlan;
pub use grid::{
    divergence, geometry_from, gradient, ColorImage, GradientField, Image, Kernel,
    ProblemGeometry, Shape2, VectorField,
};
