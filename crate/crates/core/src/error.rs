use thiserror::Error;

/// Errors raised across the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("qubit {0} appears more than once among targets and controls")]
    DuplicateQubit(usize),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("degenerate state: norm {0:.3e} is below the measurement threshold")]
    DegenerateState(f64),

    #[error("label `{0}` has inconsistent extents")]
    InconsistentExtent(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("einsum parse error: {0}")]
    Parse(String),

    #[error("contraction tree does not match the network: {0}")]
    TreeMismatch(String),

    #[error("memory budget of {budget} bytes is infeasible (smallest achievable {achievable} bytes)")]
    Infeasible { budget: f64, achievable: f64 },

    #[error("workspace too small: need {required} bytes, have {available}")]
    WorkspaceTooSmall { required: usize, available: usize },

    #[error("tensor {0} has no data bound")]
    UnboundData(usize),

    #[error("all singular values were discarded by the truncation policy")]
    AllDiscarded,

    #[error("gate acts on {0} qubits; at most {1} supported here")]
    ArityTooLarge(usize, usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
