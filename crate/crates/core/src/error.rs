//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The Green's function is singular for coincident points.
    #[error("coincident points{}: Green's function is singular", fmt_index(.index))]
    CoincidentPoints {
        /// Transducer index when the distance was evaluated against an array.
        index: Option<usize>,
    },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The requested image-window discretization has fewer than one point.
    #[error("degenerate grid: optimal point count {count:.3} is below 1")]
    DegenerateGrid { count: f64 },

    /// Paraxial assembly requires every grid point at the same known range.
    #[error("paraxial model requires a flat grid (all points at range L)")]
    NonFlatGrid,

    /// The Hankel construction and the six-illumination protocol require a
    /// uniform linear array and a uniform flat line of grid points.
    #[error("operation requires a 1-D setup: {0}")]
    NotOneDimensional(String),

    #[error("noise strength epsilon must lie in [0, 1), got {0}")]
    NoiseOutOfRange(f64),

    /// A skew-diagonal magnitude fell below the conditioning floor, so the
    /// phase chain cannot be continued.
    #[error(
        "broken phase chain at skew-diagonal {index}: |Xi| = {magnitude:.3e} \
         is below the floor {floor:.3e}"
    )]
    BrokenPhaseChain {
        index: usize,
        magnitude: f64,
        floor: f64,
    },

    /// A protocol precondition failed before any measurement was taken.
    #[error("protocol precondition: {0}")]
    ProtocolPrecondition(String),

    /// The signal space is empty, so no pseudo-spectrum can be formed.
    #[error("empty signal space: estimated rank is 0")]
    EmptySignalSpace,

    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,

    /// An oracle was asked for an illumination it has no data for.
    #[error("oracle has no record for the requested illumination: {0}")]
    UnknownIllumination(String),
}

fn fmt_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (transducer {i})"),
        None => String::new(),
    }
}
