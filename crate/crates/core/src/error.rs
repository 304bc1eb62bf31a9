use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(
        "angle difference {diff:.6} (column {col}, row {row}) lies outside [{min:.6}, {max:.6}]"
    )]
    BoundedAngle {
        row: usize,
        col: usize,
        diff: f64,
        min: f64,
        max: f64,
    },

    #[error("degenerate angle sequence: {0}")]
    DegenerateAngles(String),

    #[error("malformed graph data: {0}")]
    MalformedGraph(String),

    #[error("graph has no edges")]
    EmptyEdgeSet,

    #[error("edge {0} has zero length")]
    ZeroLengthEdge(usize),

    #[error("vertex {0} lies on the window boundary")]
    BoundaryVertex(usize),

    #[error("vertex {0} does not exist")]
    UnknownVertex(usize),

    #[error("vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),

    #[error("ball of radius {radius} around vertex {center} is clipped by the window boundary")]
    BallClipped { center: usize, radius: usize },

    #[error(
        "window too small around vertex {vertex}: need combinatorial radius {required}, have {available}"
    )]
    WindowTooSmall {
        vertex: usize,
        required: usize,
        available: usize,
    },

    #[error("walk from vertex {start} reached the window boundary at depth {depth}; need a window of combinatorial radius > {depth}")]
    BoundaryHit { start: usize, depth: usize },

    #[error("endpoints coincide after projection")]
    CoincidentEndpoints,

    #[error("path cutoff {n_max} is below the combinatorial distance {distance}")]
    CutoffTooSmall { n_max: usize, distance: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no feasible (c_l, C_l) pair on the declared grid")]
    InfeasibleGrid,

    #[error("beta = 1 is the critical case and is not treated; choose beta < 1 or beta > 1")]
    CriticalBeta,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
