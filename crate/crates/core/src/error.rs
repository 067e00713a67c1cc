use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a NaN or infinite value.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    /// Matrix dimensions do not line up for the requested operation.
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    Shape {
        context: String,
        expected: String,
        found: String,
    },

    /// An index set is invalid (duplicate, out of range, infeasible count).
    #[error("index error: {0}")]
    Index(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Iterative SVD failed to converge within its sweep budget.
    #[error("SVD did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    /// A rank request cannot be satisfied by the input.
    #[error("rank error: {0}")]
    Rank(String),

    /// A matrix expected to have orthonormal columns does not.
    #[error("basis is not orthonormal (max deviation {deviation:.3e})")]
    Orthonormality { deviation: f64 },

    /// A descent step increased the objective; the step size is too large.
    #[error("objective increased at iteration {iteration}: {from:.6e} -> {to:.6e} (step size too large)")]
    Divergence {
        iteration: usize,
        from: f64,
        to: f64,
    },

    /// A theorem assumption does not hold for this instance.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    /// A size guard was exceeded (e.g. explicit Hessian for large rank).
    #[error("size guard exceeded: {0}")]
    Size(String),

    /// A metric is undefined for the given input (e.g. zero reference).
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// An error from a named stage of a multi-stage solver.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the solver stage it came from.
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
