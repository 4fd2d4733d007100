use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient requested at a non-differentiable point {0:?}")]
    NonDifferentiable(Vec<f64>),

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("frame construction failed: {0}")]
    Frame(String),

    #[error("geometry bound violated: {0}")]
    Geometry(String),

    #[error("point {0:?} leaves the chart where the graph is defined")]
    OutOfChart(Vec<f64>),

    #[error("fixed-point iteration did not converge after {iters} iterations (last step {last_step:e})")]
    Convergence { iters: usize, last_step: f64 },

    #[error("contraction violated: |1 - G_tau| = {0}")]
    ContractionViolation(f64),

    #[error("hessian requested on the boundary (rho = {0:e})")]
    BoundarySingularity(f64),

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("containment failure: {0}")]
    Containment(String),

    #[error("extension failure: {0}")]
    Extension(String),

    #[error("flattening failure: {0}")]
    Flattening(String),

    #[error("linear solver failure: {message}")]
    Solver { message: String, residuals: Vec<f64> },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config {
            path: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }
}
