use thiserror::Error;

/// Errors raised by the solvers and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("singular cell block in cell {cell}: {detail}")]
    SingularCell { cell: usize, detail: String },

    #[error("time step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time grid mismatch: {0} vs {1} intervals")]
    GridMismatch(usize, usize),

    #[error("gradient vanishes, the control is already stationary")]
    Stationary,

    #[error("Armijo line search failed after {backtracks} backtracks (last step {step:.3e}, trial objective {trial:.9e}, current {current:.9e})")]
    LineSearch {
        backtracks: usize,
        step: f64,
        trial: f64,
        current: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping time step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
