use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("height profile is not positive: min sampled h = {min}")]
    NonPositiveHeight { min: f64 },
    #[error("period length must be positive, got {0}")]
    BadPeriod(f64),
    #[error("height profile is not periodic: |h(0) - h(L)| = {0}")]
    NonPeriodic(f64),
    #[error("Gram matrix is singular while orthogonalizing {what}")]
    SingularGram { what: String },
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("superpotential is discontinuous at s = {at} (jump {jump})")]
    Discontinuous { at: f64, jump: f64 },
    #[error("mollifier quadrature tolerance {tol} unreachable within budget (best {best})")]
    QuadratureBudgetExceeded { tol: f64, best: f64 },
    #[error("dissipativity cannot be certified: needs d2 = {needed}, limit {limit} (witness s = {witness})")]
    DissipativityViolated { witness: f64, needed: f64, limit: f64 },
    #[error("lift and basis do not share a geometry")]
    GeometryMismatch,
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("state left the admissible ball at step {step}: |v|_H = {norm} > {limit}")]
    BlowUp { step: usize, norm: f64, limit: f64 },
    #[error("shift {shift} beyond trajectory horizon {horizon}")]
    ShiftBeyondHorizon { shift: f64, horizon: f64 },
    #[error("window [{start}, {start}+1] beyond trajectory horizon {horizon}")]
    WindowBeyondHorizon { start: f64, horizon: f64 },
    #[error("trajectory horizon {0} shorter than one unit window")]
    HorizonTooShort(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Name of the module that raised the error, used in structured error output.
    pub fn module(&self) -> &'static str {
        match self {
            Error::NonPositiveHeight { .. } | Error::BadPeriod(_) | Error::NonPeriodic(_) => {
                "geometry"
            }
            Error::SingularGram { .. } | Error::NotPositiveDefinite(_) | Error::EigenFailure(_) => {
                "geometry"
            }
            Error::Discontinuous { .. }
            | Error::QuadratureBudgetExceeded { .. }
            | Error::DissipativityViolated { .. } => "potential",
            Error::GeometryMismatch => "operators",
            Error::InvalidCertificate(_)
            | Error::SolverFailure(_)
            | Error::NonFiniteState { .. }
            | Error::BlowUp { .. } => "simulate",
            Error::ShiftBeyondHorizon { .. }
            | Error::WindowBeyondHorizon { .. }
            | Error::HorizonTooShort(_) => "attractor",
            Error::InvalidParameter { .. } => "setup",
            Error::Config(_) => "cli",
            Error::Cache(_) | Error::Io(_) => "io",
        }
    }

    /// Short machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveHeight { .. } => "NonPositiveHeight",
            Error::BadPeriod(_) => "BadPeriod",
            Error::NonPeriodic(_) => "NonPeriodic",
            Error::SingularGram { .. } => "SingularGram",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::EigenFailure(_) => "EigenFailure",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::Discontinuous { .. } => "Discontinuous",
            Error::QuadratureBudgetExceeded { .. } => "QuadratureBudgetExceeded",
            Error::DissipativityViolated { .. } => "DissipativityViolated",
            Error::GeometryMismatch => "GeometryMismatch",
            Error::InvalidCertificate(_) => "InvalidCertificate",
            Error::SolverFailure(_) => "SolverFailure",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::BlowUp { .. } => "BlowUp",
            Error::ShiftBeyondHorizon { .. } => "ShiftBeyondHorizon",
            Error::WindowBeyondHorizon { .. } => "WindowBeyondHorizon",
            Error::HorizonTooShort(_) => "HorizonTooShort",
            Error::Config(e) => e.code(),
            Error::Cache(_) => "Cache",
            Error::Io(_) => "Io",
        }
    }

    /// A numeric witness attached to the failure, when one exists.
    pub fn witness(&self) -> Option<f64> {
        match self {
            Error::NonPositiveHeight { min } => Some(*min),
            Error::BadPeriod(l) => Some(*l),
            Error::DissipativityViolated { witness, .. } => Some(*witness),
            Error::NonFiniteState { step } | Error::BlowUp { step, .. } => Some(*step as f64),
            Error::ShiftBeyondHorizon { shift, .. } => Some(*shift),
            Error::WindowBeyondHorizon { start, .. } => Some(*start),
            _ => None,
        }
    }

    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}
