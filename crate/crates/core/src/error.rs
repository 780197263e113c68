use thiserror::Error;

/// Errors produced by the estimator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part has norm {0:.3e})")]
    NotSkewSymmetric(f64),

    #[error("need at least {required} vectors, got {got}")]
    TooFewVectors { required: usize, got: usize },

    #[error("length mismatch: {positions} positions but {velocities} velocities")]
    LengthMismatch { positions: usize, velocities: usize },

    #[error("degenerate feature geometry: {0}")]
    DegenerateGeometry(String),

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("estimator state became non-finite")]
    NonFiniteState,

    #[error("invalid gain `{field}`: {reason}")]
    InvalidGain { field: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            // keep the innermost index
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the numerics during a run (Newton
    /// non-convergence, a blown-up state, or measurement geometry that
    /// degenerates mid-run) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NewtonDiverged { .. } | Error::NonFiniteState => true,
            Error::AtStep { source, .. } => {
                matches!(**source, Error::DegenerateGeometry(_)) || source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
