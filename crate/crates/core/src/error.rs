use crate::mesh::BoundaryTag;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no such boundary: {0:?}")]
    NoSuchBoundary(BoundaryTag),

    #[error("singular system: pivot {pivot:e} in column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("inconsistent Dirichlet data at vertex {0}")]
    InconsistentDirichlet(usize),

    #[error("interior evaluation point #{index} at ({x}, {y})")]
    InteriorEvaluationPoint { index: usize, x: f64, y: f64 },

    #[error("diverged at time step {0}")]
    Diverged(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
