use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories. The CLI maps them onto exit codes through
/// [`Error::category`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("J_{nu}({z}) is not representable in double precision (log magnitude {log_magnitude:.3}); use log_bessel_j")]
    Overflow {
        nu: f64,
        z: Complex64,
        log_magnitude: f64,
    },

    #[error("pole: {what} vanishes for order {nu} at z = {z}")]
    Pole {
        what: &'static str,
        nu: f64,
        z: Complex64,
    },

    #[error("lambda = {lambda} is a Neumann eigenvalue of mode ell = {ell} (u'(R) = 0)")]
    NeumannPole { ell: usize, lambda: Complex64 },

    #[error("lambda = {lambda} is an eigenvalue of the Robin realization in mode ell = {ell} (theta - M(lambda) = 0)")]
    EigenvalueHit { ell: usize, lambda: Complex64 },

    #[error("inadmissible spectral point lambda = {lambda}: {participant}: {reason}")]
    Inadmissible {
        lambda: Complex64,
        participant: String,
        reason: String,
    },

    #[error("essential-spectrum gap violated: {0}")]
    EssentialSpectrumGap(String),

    #[error("symmetry class mismatch: {0}")]
    SymmetryMismatch(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Admissibility,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Validation(_) | Error::SymmetryMismatch(_) | Error::InsufficientData(_) => {
                ErrorCategory::Config
            }
            Error::Inadmissible { .. } | Error::EssentialSpectrumGap(_) => {
                ErrorCategory::Admissibility
            }
            Error::Overflow { .. }
            | Error::Pole { .. }
            | Error::NeumannPole { .. }
            | Error::EigenvalueHit { .. }
            | Error::Quadrature { .. }
            | Error::Singular(_)
            | Error::Bracketing(_) => ErrorCategory::Numerical,
        }
    }
}
