use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular kernel argument at x={x}, xi={xi}")]
    SingularKernel { x: f64, xi: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{0} is not a grid node")]
    NotANode(f64),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("singular linear system (smallest singular value {sigma_min:.3e})")]
    SingularSystem { sigma_min: f64 },
    #[error("contraction failure at iteration {iteration}: |psi'| = {lip:.3e} left the box (residual trace {trace:?})")]
    ContractionFailure {
        iteration: usize,
        lip: f64,
        trace: Vec<f64>,
    },
    #[error("blow-up at t = {t}")]
    BlowUp { t: f64, last_valid: Vec<f64> },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
