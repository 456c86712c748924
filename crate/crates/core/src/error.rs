use thiserror::Error;

#[derive(Debug, Error)]
pub enum VmbError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("basis construction failed: {0}")]
    Construction(String),
    #[error("operator assembly failed: {0}")]
    Assembly(String),
    #[error("right-hand side not orthogonal to the kernel (component {component} = {value:e})")]
    Infeasible { component: usize, value: f64 },
    #[error("iterative solve stalled after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("integration aborted at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    /// `line` is 1-based; 0 means the value came from the command line.
    #[error("config parse error {}: {msg}", where_(*.line))]
    Parse { line: usize, msg: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VmbError>;

fn where_(line: usize) -> String {
    if line == 0 {
        "in command-line override".to_string()
    } else {
        format!("at line {line}")
    }
}
