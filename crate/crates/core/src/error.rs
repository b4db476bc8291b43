use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fixed-point solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("optimizer bracket failure: {0}")]
    Bracket(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("at gamma = {gamma}: {source}")]
    AtGamma {
        gamma: f64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at_gamma(self, gamma: f64) -> Self {
        Error::AtGamma { gamma, source: alloc::boxed::Box::new(self) }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::InvalidInput(_) => false,
            Error::NonConvergence { .. } | Error::Bracket(_) | Error::Numeric(_) => true,
            Error::AtGamma { source, .. } | Error::Seed { source, .. } => source.is_numeric(),
        }
    }
}
