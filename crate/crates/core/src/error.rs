use thiserror::Error;

/// Errors raised by mesh construction, assembly, the de Rham operators and the time stepper.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("polynomial order k = {0} is not supported (only k = 0 is implemented)")]
    UnsupportedOrder(usize),

    #[error("point {0:?} lies outside the reference tetrahedron")]
    OutsideReferenceCell([f64; 3]),

    #[error("field has length {found} but the {space} space has {expected} degrees of freedom")]
    DimensionMismatch {
        space: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sparse factorisation failed: {0}")]
    Factorisation(String),

    #[error("magnetic field is not divergence free: max |D2 B| = {0:.3e}")]
    NotDivergenceFree(f64),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("nonlinear iteration diverged at iteration {iterations} (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("manufactured case `{case}` failed its self-check: {detail}")]
    SelfCheck { case: String, detail: String },

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
