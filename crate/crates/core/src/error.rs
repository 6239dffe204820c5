//! Error type shared across the crate.
//!
//! Everything fallible returns [`Result`]. Pipeline stages wrap their
//! failures in [`Error::Stage`] so callers can tell *where* a run fell over
//! without parsing message strings.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying filesystem failure, tagged with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file existed but its contents could not be understood.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Two containers that must agree on voxel grid dimensions did not.
    #[error("dim mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    /// Timestamps must be strictly increasing and start at zero.
    #[error("invalid timestamps: {0}")]
    InvalidTimestamps(String),

    /// A value that must be finite (intensity, parameter, ...) was not.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A scalar or configuration field violated its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An operation that needs at least one masked voxel got none.
    #[error("empty mask")]
    EmptyMask,

    /// Vascular-input detection rejected every candidate region.
    #[error("no vascular region found")]
    NoVascularRegion,

    /// Too few usable samples/voxels for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A pipeline stage failed; `stage` names the step for diagnostics.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap `self` with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Convenience constructor for [`Error::Parse`].
    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// The stage tag if this error came out of a pipeline run.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// True when the failure is bad *input* (missing/ill-formed files,
    /// out-of-range configuration) rather than a processing failure.
    /// The command-line front end maps these to distinct exit codes.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DimMismatch { .. }
            | Error::InvalidTimestamps(_)
            | Error::NonFinite(_)
            | Error::InvalidParam(_)
            | Error::EmptyMask => true,
            Error::NoVascularRegion | Error::InsufficientData(_) => false,
            Error::Stage { source, .. } => source.is_validation(),
        }
    }
}
