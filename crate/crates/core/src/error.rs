use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid displacement law: {0}")]
    InvalidDisplacement(String),

    #[error("moment of order {order} does not converge under truncation (tail bound {bound:.3e})")]
    MomentTruncation { order: u32, bound: f64 },

    #[error("reduced pmf tail bound {bound:.3e} not met at k={k}, n={n}")]
    ReducedTruncation { k: usize, n: usize, bound: f64 },

    #[error("node budget of {budget} exceeded")]
    NodeBudget { budget: usize },

    #[error("rejection sampler gave up after {trials} trials; use the conditioned sampler")]
    TrialBudget { trials: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
