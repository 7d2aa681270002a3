use thiserror::Error;

/// Errors surfaced by the numerical kernels and formula engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested accuracy was not reached within the evaluation budget.
    /// Carries the best estimate obtained and the error bound attached to it.
    #[error("accuracy failure after {evals} evaluations: best estimate {estimate}, error bound {bound}")]
    Accuracy {
        estimate: f64,
        bound: f64,
        evals: usize,
    },

    /// A denominator that is provably bounded away from zero for valid
    /// inputs came out numerically singular. Never regularized.
    #[error("singular denominator: {0}")]
    Singularity(String),

    #[error("transform evaluation failed at contour node {node}: {source}")]
    InversionNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty sample set")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;
