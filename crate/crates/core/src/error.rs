//! Error type shared across the toolkit.

use std::path::PathBuf;

use nalgebra::DMatrix;

/// Errors produced by scenario handling, measurement generation, estimation,
/// and bound computation.
#[derive(Debug)]
pub enum Error {
    /// Scenario or input semantics are invalid (bad pairing, bad units, ...).
    Scenario(String),
    /// Underlying file I/O failure.
    Io { path: PathBuf, source: std::io::Error },
    /// A file could not be parsed. `line` is 1-based when known.
    Parse {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },
    /// An operation needed an emitter but the scenario has none.
    MissingEmitter,
    /// Emitter sits exactly on a receiver; range-dependent models blow up.
    CoincidentEmitterReceiver { receiver: usize },
    /// A direction vector was expected to have unit norm.
    NonUnitDirection { norm: f64 },
    /// Operation restricted to a specific dimension (e.g. the ellipse locus is 2-D only).
    UnsupportedDimension { required: usize, got: usize },
    /// Measurement vector does not match the system it is solved against.
    MeasurementMismatch(String),
    /// A covariance matrix failed the symmetric positive-definite check.
    NotPositiveDefinite(String),
    /// System matrix rank is below the direction dimension; the columns of
    /// `null_space` span the unobservable subspace.
    RankDeficient {
        rank: usize,
        dim: usize,
        null_space: DMatrix<f64>,
    },
    /// Least-squares solution is numerically zero; no direction can be normalized.
    DegenerateSolution,
    /// Triangulation geometry is singular (all bearing lines parallel).
    UnresolvableGeometry,
    /// Fisher information vanished; the AOA cannot be observed at this geometry.
    UnobservableAoa,
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Scenario(msg) => write!(f, "invalid scenario: {msg}"),
            Error::Io { path, source } => {
                write!(f, "i/o error on {}: {source}", path.display())
            }
            Error::Parse { path, line, message } => {
                write!(f, "parse error")?;
                if let Some(p) = path {
                    write!(f, " in {}", p.display())?;
                }
                if let Some(l) = line {
                    write!(f, " at line {l}")?;
                }
                write!(f, ": {message}")
            }
            Error::MissingEmitter => {
                write!(f, "scenario field \"emitter\" is required for this operation")
            }
            Error::CoincidentEmitterReceiver { receiver } => {
                write!(f, "coincident emitter/receiver: receiver {receiver} has zero range")
            }
            Error::NonUnitDirection { norm } => {
                write!(f, "direction vector must have unit norm, got {norm}")
            }
            Error::UnsupportedDimension { required, got } => {
                write!(f, "operation requires dimension {required}, scenario has {got}")
            }
            Error::MeasurementMismatch(msg) => {
                write!(f, "measurements do not match system: {msg}")
            }
            Error::NotPositiveDefinite(msg) => {
                write!(f, "covariance is not symmetric positive definite: {msg}")
            }
            Error::RankDeficient { rank, dim, .. } => {
                write!(
                    f,
                    "unobservable direction component: system rank {rank} < dimension {dim}"
                )
            }
            Error::DegenerateSolution => {
                write!(f, "degenerate solution: least-squares solution has zero norm")
            }
            Error::UnresolvableGeometry => {
                write!(f, "unresolvable geometry: all bearing lines are parallel")
            }
            Error::UnobservableAoa => {
                write!(f, "AOA unobservable at this geometry: Fisher information is zero")
            }
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

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
