//! Crate-wide error type.

use std::fmt;
use std::path::PathBuf;

/// Errors raised by simulation and I/O operations.
#[derive(Debug)]
pub enum Error {
    /// A domain type rejected its inputs. `field` names the offending field.
    Invalid { field: &'static str, message: String },
    /// Adaptive quadrature failed to reach the requested tolerance.
    QuadratureNonConvergence { achieved: f64, requested: f64 },
    /// A linear solve hit a (numerically) singular system.
    SingularSystem(&'static str),
    /// `dark_state` was asked for a configuration with cos Φ ≠ 0.
    NoDarkState { cos_phi: f64 },
    /// Fixed-step integration disagreed with its halved-step check.
    StepCountTooSmall { deviation: f64, threshold: f64 },
    /// Lobe extraction found no structure to work with.
    NoLobes(String),
    /// Adiabatic evolution left the dark state (fidelity below threshold).
    Diabatic { fidelity: f64, threshold: f64 },
    /// Configuration file could not be parsed.
    ConfigParse(String),
    /// Configuration parsed but failed validation.
    ConfigInvalid(String),
    /// An I/O failure, tagged with the path involved.
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid { field, message } => write!(f, "invalid `{field}`: {message}"),
            Error::QuadratureNonConvergence { achieved, requested } => write!(
                f,
                "quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}"
            ),
            Error::SingularSystem(what) => write!(f, "singular linear system in {what}"),
            Error::NoDarkState { cos_phi } => write!(
                f,
                "no dark state: cos(loop phase) = {cos_phi:.3e} is not 0 within tolerance"
            ),
            Error::StepCountTooSmall { deviation, threshold } => write!(
                f,
                "step count too small: halved-step deviation {deviation:.3e} exceeds {threshold:.3e}"
            ),
            Error::NoLobes(why) => write!(f, "lobe detection failed: {why}"),
            Error::Diabatic { fidelity, threshold } => write!(
                f,
                "non-adiabatic evolution: fidelity {fidelity:.6} below {threshold}"
            ),
            Error::ConfigParse(msg) => write!(f, "config parse error: {msg}"),
            Error::ConfigInvalid(msg) => write!(f, "config validation error: {msg}"),
            Error::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
