use thiserror::Error;

/// Crate-wide error type.
///
/// Variants split into two families used by the CLI exit-code contract:
/// input/validation problems (exit code 2) and numerical hard failures
/// (exit code 3). `exit_code` encodes that mapping.
#[derive(Debug, Error)]
pub enum Error {
    /// An input invariant was violated; the message names the offending object.
    #[error("validation: {0}")]
    Validation(String),
    #[error("not Hermitian: {0}")]
    NotHermitian(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("no chart with an invertible right block found for the boundary pair")]
    NoChartFound,
    #[error("coefficient must be positive: {0}")]
    NonPositiveCoefficient(String),
    #[error("inconsistent transition probabilities: {0}")]
    InconsistentProbabilities(String),
    #[error("P_0^-1 is not positive definite")]
    P0NotPositiveDefinite,
    #[error("degenerate boundary condition: {0}")]
    DegenerateBoundaryCondition(String),
    #[error("index set K is empty")]
    EmptyK,
    #[error("incompatible signatures: {0}")]
    IncompatibleSignatures(String),

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("characteristic polynomial degree {got} does not match the counting formula value {expected}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("multiplicity mismatch at lambda = {lambda}: analytic {analytic}, geometric {geometric}")]
    MultiplicityMismatch {
        lambda: f64,
        analytic: usize,
        geometric: usize,
    },
    #[error("lambda = {0} is not an eigenvalue within tolerance")]
    NotAnEigenvalue(f64),
    #[error("eigenvalue lambda = {0} is not simple")]
    DegenerateEigenvalue(f64),
    #[error("perturbed coefficient lost invertibility at t = {0}")]
    LostInvertibility(f64),
    #[error("branch {index} neither converges nor crosses the divergence threshold")]
    Inconclusive { index: usize },
    #[error("eigenvalue count changed along the path: {0}")]
    CountChangedAlongPath(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code for this error: 2 for rejected input, 3 for a numerical
    /// failure on input that passed validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::NotHermitian(_)
            | Error::IndexOutOfRange(_)
            | Error::NoChartFound
            | Error::NonPositiveCoefficient(_)
            | Error::InconsistentProbabilities(_)
            | Error::P0NotPositiveDefinite
            | Error::DegenerateBoundaryCondition(_)
            | Error::EmptyK
            | Error::IncompatibleSignatures(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
