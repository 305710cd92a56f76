use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, scenario or numerical parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite amplitude appeared during time stepping.
    #[error("propagation diverged at step {step} (t = {time}) in {mode} mode")]
    Diverged {
        step: usize,
        time: f64,
        mode: String,
    },

    #[error("field is not normalized (norm = {0}); seeding requires unit norm")]
    Unnormalized(f64),

    #[error("time {0} is not one of the recorded snapshot times")]
    UnknownTime(f64),

    #[error("{0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
