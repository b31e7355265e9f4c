use crate::grid::Shape2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape2, found: Shape2 },

    #[error("kernel shape {0} has an even side")]
    EvenKernel(Shape2),

    #[error("sampling factor must be at least 1, got {0}")]
    BadFactor(usize),

    #[error("image shape {shape} is not divisible by sampling factor {factor}")]
    NotDivisible { shape: Shape2, factor: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid value count: shape {shape} needs {expected} values, got {found}")]
    BadLength { shape: Shape2, expected: usize, found: usize },

    #[error("step size must be positive, got {0}")]
    BadStep(f64),

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("backtracking stalled after {retries} retries (L = {lipschitz:e})")]
    BacktrackStall { retries: usize, lipschitz: f64 },

    #[error("inner ADMM solve diverged (residual grew from {initial:e} to {current:e})")]
    InnerSolveDiverged { initial: f64, current: f64 },

    #[error("kernel is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("disk radius {radius} does not fit a kernel with margin {margin}")]
    RadiusTooLarge { radius: f64, margin: Shape2 },

    #[error("offset ({0}, {1}) leaves the kernel window")]
    OffsetOutOfWindow(f64, f64),

    #[error("source image {found} is too small for the requested image size {needed}")]
    ImageTooSmall { needed: Shape2, found: Shape2 },

    #[error("side information shape {found} does not match the geometry (expected {expected})")]
    GeometryMismatch { expected: Shape2, found: Shape2 },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
