use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported grid mode: {0}")]
    UnsupportedMode(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The datum fails the necessary solvability condition `∫ f⟨ξ,E_α⟩ = 0`.
    #[error(
        "inconsistent data: necessary condition ∫ f·⟨ξ,E_{alpha}⟩ dH^n = 0 fails, \
         defect {defect:.6e} exceeds tolerance {tolerance:.3e}"
    )]
    InconsistentData { alpha: usize, defect: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("ellipticity lost at node {node} (rho={rho:.6}, phi={phi:.6}): spectrum {spectrum:?} leaves Γ_{k}")]
    EllipticityLost { node: usize, rho: f64, phi: f64, k: usize, spectrum: Vec<f64> },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("continuation stuck: step fell below the floor after reaching t = {t}")]
    ContinuationStuck { t: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, message: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
