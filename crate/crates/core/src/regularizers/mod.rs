//! Total variation, directional total variation and the proximal maps of
//! the image and kernel regularizers.

mod dtv;
mod prox;
mod simplex;

pub use dtv::{build_vector_field, dtv, grayscale, tv, DtvParams, LUMA_WEIGHTS};
pub use prox::{prox_dtv_nonneg, prox_tv_simplex, ProxConfig, DEFAULT_PROX_ITERATIONS};
pub use simplex::{project_nonnegative, project_simplex, project_simplex_vec};

