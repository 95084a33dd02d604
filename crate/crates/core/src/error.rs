use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid potential: {0}")]
    Potential(String),

    #[error("invalid frame: {0}")]
    Frame(String),

    #[error("{solver} did not converge after {iterations} iterations: {detail}")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        detail: String,
        /// Best iterate reached before giving up.
        best: Vec<f64>,
    },

    #[error("support touches the domain boundary at {side} (support [{y1}, {y2}] in [{x_lo}, {x_hi}]); enlarge the domain")]
    SupportAtBoundary {
        side: &'static str,
        y1: f64,
        y2: f64,
        x_lo: f64,
        x_hi: f64,
    },

    #[error("refusing to verify: {0}")]
    Unconverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
