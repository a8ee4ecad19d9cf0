use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root finder did not converge for {what} in bracket [{lo}, {hi}]")]
    NoConvergence { what: String, lo: f64, hi: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{what}: discrepancy {got:e} exceeds tolerance {tol:e}; {hint}")]
    Tolerance {
        what: String,
        got: f64,
        tol: f64,
        hint: String,
    },

    #[error("singular projection: the Q_1^1 coefficient a11 vanishes")]
    SingularProjection,

    #[error("diffusion matrix is singular along direction {null_direction:?}")]
    SingularSigma { null_direction: Vec<f64> },

    #[error("grid margin violated: {0}")]
    GridMargin(String),
}

pub type Result<T> = std::result::Result<T, Error>;
