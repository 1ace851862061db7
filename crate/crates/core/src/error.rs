use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, nonlinearity or solver parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its domain, e.g. projecting the zero profile.
    #[error("domain error: {0}")]
    Domain(String),

    /// The nonlinearity does not behave as the fiber-map structure requires.
    /// `hypothesis` names the condition that failed numerically.
    #[error("nonconforming nonlinearity (hypothesis {hypothesis}): {detail}")]
    Nonconformance { hypothesis: String, detail: String },

    /// A non-finite reduced energy appeared during a line search.
    #[error("non-finite energy at iteration {iteration} (step {step:e}); iterate dumped ({} values)", dump.len())]
    NonFinite {
        iteration: usize,
        step: f64,
        dump: Vec<f64>,
    },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
