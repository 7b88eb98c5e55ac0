use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation angle {angle} rad is too close to pi for a unique logarithm")]
    AngleNearPi { angle: f64 },
    #[error("point depth {depth} m is at or behind the near plane")]
    BehindCamera { depth: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("information matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("DR weight {alpha} outside [{min}, {max}]")]
    WeightOutOfBounds { alpha: f64, min: f64, max: f64 },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("cost increased on every damping retry (cost {cost})")]
    Diverged { cost: f64 },
    #[error("no visual or DR factor constrains the free pose")]
    NoConstraints,
    #[error("free pose {pose} has no fixed anchor or DR chain to one")]
    GaugeUnderconstrained { pose: usize },
    #[error("reduced camera system is singular")]
    SingularSystem,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Parse failure with a location inside a text file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{file}:{line}: {message}")]
pub struct FormatError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("timestamps are not strictly increasing at line {line} of {file}")]
    NonMonotoneTimestamps { file: String, line: usize },
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("degenerate trajectory spec: {0}")]
    DegenerateSpec(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlamError {
    #[error("tracking lost at frame {frame}")]
    TrackLost { frame: u64 },
    #[error("frame {frame} has no DR link to its predecessor")]
    MissingDr { frame: u64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("only {pairs} time-associated pairs, need at least 3")]
    TooFewPairs { pairs: usize },
    #[error("keyframe RMSE {rmse} is too small to form a ratio")]
    DivisionByZeroRmse { rmse: f64 },
    #[error("repeat runs need at least 2 loops, got {loops}")]
    TooFewLoops { loops: usize },
    #[error("trajectory timestamps are not strictly increasing at sample {index}")]
    NonMonotone { index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: unknown section `{section}`")]
    UnknownSection { section: String, line: usize },
    #[error("line {line}: key `{key}` belongs to section `{expected}`")]
    WrongSection {
        key: String,
        expected: String,
        line: usize,
    },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        key: String,
        line: usize,
        message: String,
    },
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("--set {arg}: {message}")]
    Override { arg: String, message: String },
    #[error("config constraint violated: {0}")]
    Constraint(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
}
