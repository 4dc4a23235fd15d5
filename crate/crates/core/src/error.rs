use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A named model constraint does not hold, e.g. `sigma^2 < 2*mu`.
    #[error("constraint violated: {rule} ({detail})")]
    Constraint { rule: &'static str, detail: String },

    #[error("grids do not match")]
    GridMismatch,

    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("solution blew up at t = {time}: max |u| = {max_abs} > {bound}")]
    Blowup { time: f64, max_abs: f64, bound: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("area witness construction broke down at n = {n}: t_n = {t_n} >= s_(n+1) = {s_next}")]
    WitnessBreakdown { n: usize, t_n: f64, s_next: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("path with seed {seed} failed: {source}")]
    PathFailed { seed: u64, source: Box<Error> },

    #[error("{failed} of {total} paths failed (first: {first})")]
    TooManyFailures { failed: usize, total: usize, first: Box<Error> },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
