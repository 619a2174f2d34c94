//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Constructors and operations return `Result<_, Error>`; variants carry just
/// enough context to make a failed batch run diagnosable from the message
/// alone.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point with |z| >= 1 was offered where an open-disc point is required.
    #[error("point ({re}, {im}) lies outside the open unit disc (|z| = {modulus})")]
    PointOutsideDisc { re: f64, im: f64, modulus: f64 },

    /// A ratio parameter that must satisfy 0 < gamma < 1.
    #[error("ratio gamma = {0} must lie strictly between 0 and 1")]
    InvalidGamma(f64),

    /// A separation parameter that must satisfy 0 < delta < 1.
    #[error("separation delta = {0} must lie strictly between 0 and 1")]
    InvalidDelta(f64),

    /// Window heights must satisfy 0 < h < 1.
    #[error("window height {0} must lie in (0, 1)")]
    InvalidWindowHeight(f64),

    /// A boundary direction cannot be derived from the origin.
    #[error("cannot take a boundary direction from the origin")]
    DirectionFromOrigin,

    /// An operation needs at least one point.
    #[error("sequence must contain at least one point")]
    EmptySequence,

    /// Sequences must consist of pairwise distinct points.
    #[error("duplicate point at indices {0} and {1}")]
    DuplicatePoint(usize, usize),

    /// An index referred past the end of a sequence.
    #[error("index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// A named numeric parameter outside its documented range.
    #[error("invalid value {name} = {value}")]
    InvalidThreshold { name: &'static str, value: f64 },

    /// A Blaschke denominator vanished to working precision.
    #[error("denominator vanished to working precision ({0:e})")]
    DegenerateDenominator(f64),

    /// A partition does not match the sequence it claims to describe.
    #[error("partition describes {partition_len} points but sequence has {sequence_len}")]
    PartitionMismatch {
        partition_len: usize,
        sequence_len: usize,
    },

    /// A strip anchor fell outside the window under inspection.
    #[error("anchor point lies outside the window")]
    AnchorOutsideWindow,

    /// Tube routing could not connect the endpoints within its constraints.
    #[error("could not route a tube between sequence points {0} and {1}")]
    TubeUnreachable(usize, usize),

    /// A polyline exceeded the (pi/2) x endpoint-distance length budget.
    #[error("curve length {length} exceeds the length budget {budget}")]
    BudgetExceeded { length: f64, budget: f64 },

    /// Two tubes that must be disjoint overlap.
    #[error("tubes {0} and {1} overlap")]
    TubesOverlap(usize, usize),

    /// A tube left the window that is supposed to contain it.
    #[error("tube {0} is not contained in the enlarged window")]
    TubeOutsideWindow(usize),

    /// A scalar field produced a non-finite value.
    #[error("scalar field evaluated to a non-finite value at ({re}, {im})")]
    NonFiniteField { re: f64, im: f64 },

    /// Capacity limit hit while generating or refining.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(&'static str),

    /// A count parameter outside its documented range.
    #[error("invalid count {0}")]
    InvalidCount(usize),

    /// A configuration or argument combination failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Input text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// An error raised inside a named stage of the experiment pipeline.
    #[error("{stage} stage: {source}")]
    Pipeline {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the pipeline stage it surfaced in.
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Pipeline {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
