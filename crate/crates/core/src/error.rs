use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A non-finite value appeared while stepping the vector field.
    #[error("integration failed at t={time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("step limit exceeded: {requested} steps requested, limit is {limit}")]
    StepLimit { requested: u64, limit: u64 },

    #[error("zeta has no real roots (discriminant {discriminant})")]
    RootsNotReal { discriminant: f64 },

    /// The nominal reward lies outside the bistable range (d/(m+n), d/m)
    /// or the anchor x_bar is not in (x1*, 1].
    #[error("controller domain violated: {0}")]
    Domain(String),

    #[error("controller infeasible: {0}")]
    Infeasible(String),

    #[error("sweep leg {leg} (R={reward}) did not settle; last state {last_state}")]
    SweepLeg {
        leg: usize,
        reward: f64,
        last_state: f64,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
