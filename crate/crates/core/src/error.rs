use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a trial-level error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Events,
    Smoothing,
    Synchronization,
    Selection,
    InverseDynamics,
    Estimation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Events => "events",
            Stage::Smoothing => "smoothing",
            Stage::Synchronization => "sync",
            Stage::Selection => "selection",
            Stage::InverseDynamics => "invdyn",
            Stage::Estimation => "estimate",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("segment {segment} is degenerate (length {length:e} m)")]
    DegenerateSegment { segment: usize, length: f64 },

    #[error("gyration ratio {0} outside (0, 1]")]
    GyrationRange(f64),

    #[error("invalid anthropometric table: {0}")]
    InvalidTable(String),

    #[error("invalid spline input: {0}")]
    SplineInput(String),

    #[error("smoothing parameter {0} outside [0, 1]")]
    SmoothingRange(f64),

    #[error("t = {t} outside spline domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("out of range: {0}")]
    Range(String),

    #[error("degree {0} is not one of 0, 1, 2")]
    Degree(u8),

    #[error("unknown method {0:?}, expected A, B or C")]
    Method(String),

    #[error("epsilon undefined: both series have zero norm")]
    UndefinedMetric,

    #[error("singular system: column(s) {columns:?} linearly dependent")]
    Singular { columns: Vec<usize> },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("smoothing parameter selection failed: {0}")]
    Selection(String),

    #[error("synchronization failed: {0}")]
    Synchronization(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stage the error was tagged with, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Innermost error below any stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            tagged @ Error::Stage { .. } => tagged,
            other => Error::Stage { stage, source: Box::new(other) },
        })
    }
}
