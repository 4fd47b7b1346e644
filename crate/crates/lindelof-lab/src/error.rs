use thiserror::Error;

/// Every failure mode of the library. `name()` gives the stable code printed by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureNonconverged(String),
    #[error("normalizer is degenerate: {0}")]
    DivisionDegenerate(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("construction windows overlap: {0}")]
    WindowOverlap(String),
    #[error("K too small for the phase-error check: {0}")]
    PreconditionKTooSmall(String),
    #[error("M too small for the phase-error check: {0}")]
    PreconditionMTooSmall(String),
    #[error("t too small to reach the target phase: {0}")]
    InfeasibleT(String),
    #[error("clustering condition violated: {0}")]
    ClusterViolation(String),
    #[error("root finding failed: {0}")]
    RootfindFail(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid prime: {0}")]
    InvalidPrime(String),
    #[error("argument beyond stored cutoff: {0}")]
    CutoffExceeded(String),
    #[error("real part too small: {0}")]
    SigmaTooSmall(String),
    #[error("real part not above the error exponent: {0}")]
    SigmaBelowTheta(String),
    #[error("too close to a pole: {0}")]
    PoleProximity(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("incompatible inputs: {0}")]
    SchemaMismatch(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl LabError {
    pub fn name(&self) -> &'static str {
        match self {
            LabError::QuadratureNonconverged(_) => "QUADRATURE_NONCONVERGED",
            LabError::DivisionDegenerate(_) => "DIVISION_DEGENERATE",
            LabError::InvalidGrid(_) => "INVALID_GRID",
            LabError::WindowOverlap(_) => "WINDOW_OVERLAP",
            LabError::PreconditionKTooSmall(_) => "PRECONDITION_K_TOO_SMALL",
            LabError::PreconditionMTooSmall(_) => "PRECONDITION_M_TOO_SMALL",
            LabError::InfeasibleT(_) => "INFEASIBLE_T",
            LabError::ClusterViolation(_) => "CLUSTER_VIOLATION",
            LabError::RootfindFail(_) => "ROOTFIND_FAIL",
            LabError::BudgetExceeded(_) => "BUDGET_EXCEEDED",
            LabError::InvalidPrime(_) => "INVALID_PRIME",
            LabError::CutoffExceeded(_) => "CUTOFF_EXCEEDED",
            LabError::SigmaTooSmall(_) => "SIGMA_TOO_SMALL",
            LabError::SigmaBelowTheta(_) => "SIGMA_BELOW_THETA",
            LabError::PoleProximity(_) => "POLE_PROXIMITY",
            LabError::InvalidInput(_) => "INVALID_INPUT",
            LabError::FileNotFound(_) => "FILE_NOT_FOUND",
            LabError::Format(_) => "FORMAT_ERROR",
            LabError::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            LabError::Io(_) => "IO_ERROR",
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            LabError::FileNotFound(e.to_string())
        } else {
            LabError::Io(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
