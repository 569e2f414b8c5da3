use thiserror::Error;

#[derive(Debug, Error)]
pub enum VekuaError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("no grid cell center lies inside the domain")]
    EmptyGrid,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation requires a ball domain")]
    NotABall,
    #[error("kernel evaluated at its singularity")]
    Singular,
    #[error("point {point:?} is not at least {margin} inside the domain")]
    PointNotInterior { point: [f64; 3], margin: f64 },
    #[error("generating point {0:?} lies in the closed domain")]
    PointInsideDomain([f64; 3]),
    #[error("contraction constant {kappa} >= 1, Neumann series not certified")]
    ContractionViolated { kappa: f64 },
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("all input fields are numerically zero")]
    AllFieldsZero,
    #[error("Bergman space is not a right module for these coefficients (defect {defect:e})")]
    ModuleStructureAbsent { defect: f64 },
    #[error("test function support reaches within {distance} of the boundary (need {required})")]
    SupportMarginViolated { distance: f64, required: f64 },
    #[error("function vanishes at {0:?}")]
    VanishingFunction([f64; 3]),
    #[error("kernel branch {expected} does not apply to this parameter (branch {actual})")]
    BranchMismatch { expected: String, actual: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = VekuaError> = std::result::Result<T, E>;
