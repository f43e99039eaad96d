use thiserror::Error;

use crate::fine_solver::FlowSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {element}: jacobian determinant {jacobian} is not positive")]
    DegenerateElement { element: usize, jacobian: f64 },

    #[error("singular corner {corner} of element {element}: edge normals are parallel")]
    SingularCorner { element: usize, corner: usize },

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("boundary configuration error: {0}")]
    Configuration(String),

    #[error("assembly error: vertex block {vertex} is not positive definite")]
    NotPositiveDefinite { vertex: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("nonlinear iteration did not converge within {} iterations", .0.iterations)]
    NonConvergence(Box<FlowSolution>),

    #[error("local solve failed on coarse element {element} (boundary edge {edge:?}): {source}")]
    LocalSolve {
        element: usize,
        edge: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("reduction map is rank deficient; offending columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("undefined metric: reference has zero norm")]
    UndefinedMetric,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn local(element: usize, edge: Option<usize>, source: Error) -> Self {
        Error::LocalSolve {
            element,
            edge,
            source: Box::new(source),
        }
    }
}
