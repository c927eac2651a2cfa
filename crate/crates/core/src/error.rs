use thiserror::Error;

/// Errors raised by the simulation and crypto layers.
///
/// `⊥` results (failed decryptions, punctured evaluation points) are ordinary
/// `Option::None` values and never show up here.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid dimension {0}: must be even and at least 2")]
    InvalidDimension(usize),

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not a projector (max deviation {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("post-measurement state has degenerate norm {norm:e}")]
    DegeneratePostState { norm: f64 },

    #[error("hermitian eigensolver did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },

    #[error("eigenvalue {value} lies outside [0, 1] beyond tolerance")]
    EigenvalueOutOfRange { value: f64 },

    #[error("invariant violated: {0}")]
    Invariant(&'static str),

    #[error("projective implementation disagrees with the POVM: {projimp} vs {direct}")]
    ProjImpMismatch { projimp: f64, direct: f64 },

    #[error("flush loop exceeded {max_rounds} rounds")]
    FlushNonTermination { max_rounds: usize },

    #[error("bit length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("circuit evaluation fault: {0}")]
    Circuit(&'static str),

    #[error("malformed encoding: {0}")]
    Decode(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
