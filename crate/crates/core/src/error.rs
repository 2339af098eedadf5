use thiserror::Error;

/// Errors produced anywhere in the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("numerical failure in {context}")]
    Numerical { context: String },

    #[error("{what} did not converge after {steps} steps (last change {last:e})")]
    NoConvergence { what: &'static str, steps: usize, last: f64 },

    #[error("rank deficiency: smallest Schmidt value {smallest:e} is below {floor:e}")]
    RankDeficient { smallest: f64, floor: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("site {site} lies outside the window [{first}, {last}]")]
    OutsideWindow { site: i64, first: i64, last: i64 },

    #[error("window would shrink to {len} sites; at least {min} are required")]
    WindowTooSmall { len: usize, min: usize },

    #[error("states are not comparable: {0}")]
    Incomparable(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("state became non-finite at t = {time}")]
    Poisoned { time: f64, checkpoint: Option<std::path::PathBuf> },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
