use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("chart not applicable: {0}")]
    ChartNotApplicable(String),

    #[error("quadrature did not converge at {nodes} nodes (last relative delta {delta:e})")]
    Quadrature { nodes: usize, delta: f64 },

    #[error("demo not applicable: {0}")]
    NotApplicable(String),

    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    /// True for failures caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Input(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
