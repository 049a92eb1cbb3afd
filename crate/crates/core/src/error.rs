use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {panels} panels")]
    QuadratureNonConvergence { value: f64, error: f64, panels: usize },

    #[error("truncation tail bound {bound:e} exceeds tolerance {tolerance:e} at cutoff {cutoff}")]
    TailBound { bound: f64, tolerance: f64, cutoff: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel matrix not symmetric at ({i}, {j}): |K_ij - K_ji| = {diff:e}")]
    SymmetryViolation { i: usize, j: usize, diff: f64 },

    #[error("collision frequency at node {index} is not positive ({value:e})")]
    DegenerateGamma { index: usize, value: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("singular linear system in time step")]
    SingularSolve,

    #[error("scaled exponent {exponent:e} exceeds representable range")]
    Overflow { exponent: f64 },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit degenerate: distance reached round-off floor {floor:e} at t = {floor_time}")]
    DegenerateFit { floor: f64, floor_time: f64 },

    #[error("grid resolution: window ({lo}, {hi}) holds {nodes} nodes, need at least {required}")]
    GridResolution {
        lo: f64,
        hi: f64,
        nodes: usize,
        required: usize,
    },

    #[error("unknown {kind} '{name}', registered: {known}")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("angular grid too coarse for L_max = {l_max}: {detail}")]
    AngularResolution { l_max: usize, detail: String },

    #[error("half-decay time not reached by t = {t_max} for eps = {eps}")]
    NotReached { eps: f64, t_max: f64 },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
