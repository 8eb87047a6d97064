use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the metric domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("trajectory left the domain at t = {t}")]
    LeftDomain { t: f64 },
    #[error("no boundary hit before horizon {horizon}")]
    NotExited { horizon: f64 },
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
