use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: {reason}")]
    InvalidInterval { a: f64, b: f64, reason: String },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("intervals {first} and {second} intersect in more than one point")]
    Adjacency { first: usize, second: usize },

    #[error(
        "intervals {first} and {second} are not disjoint; ratio asymptotics require bounded, disjoint intervals"
    )]
    NotDisjoint { first: usize, second: usize },

    #[error("invalid precision policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid multi-index: {0}")]
    InvalidIndex(String),

    #[error("degree budget {budget} is too small; at least {needed} moments are required")]
    DegreeBudget { budget: usize, needed: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("evaluation point {point} is too close to the support [{a}, {b}] (distance {distance:e})")]
    Domain {
        point: String,
        a: f64,
        b: f64,
        distance: f64,
    },

    #[error("null space is not one-dimensional at {bits} bits: {detail}")]
    NullSpace { bits: u32, detail: String },

    #[error("found {found} zeros on ({a}, {b}) where {expected} were expected")]
    RootCount {
        found: usize,
        expected: usize,
        a: f64,
        b: f64,
    },

    #[error("interlacing is undecidable at the current precision: {0}")]
    Undecidable(String),

    #[error("surface map solve failed: {reason}")]
    Newton { reason: String, trace: Vec<String> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input rather than by numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInterval { .. }
                | Error::InvalidWeight(_)
                | Error::Adjacency { .. }
                | Error::NotDisjoint { .. }
                | Error::InvalidPolicy(_)
                | Error::InvalidIndex(_)
                | Error::DegreeBudget { .. }
                | Error::Domain { .. }
                | Error::Argument(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
