use thiserror::Error;

/// Failure modes shared by every analysis in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced a non-finite state.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// QR reorthonormalization met a (numerically) singular tangent frame.
    #[error("degenerate R factor at t = {t}: |R_{index}{index}| = {value:e}")]
    DegenerateR { t: f64, index: usize, value: f64 },

    /// Not enough data to decide; distinct from a negative answer.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
