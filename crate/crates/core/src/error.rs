use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the interval where the model is defined.
    #[error("{what} = {value} is outside the admissible range {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{0} is singular at f = 0 Hz")]
    Singularity(&'static str),

    #[error("no crossover of |L| = 1 on [{f_lo} Hz, {f_hi} Hz]")]
    Bracket { f_lo: f64, f_hi: f64 },

    #[error("phase band infeasible: {0}")]
    Infeasible(String),

    /// The phase band is entered more than once on the search range.
    #[error("phase band ambiguous: {} disjoint intervals {:?}", .intervals.len(), .intervals)]
    AmbiguousBand { intervals: Vec<(f64, f64)> },

    #[error("ill-conditioned loop: |1 + L| = {0:e} at {1} Hz")]
    Conditioning(f64, f64),

    #[error("steady state not reached: period-to-period drift {0:e}")]
    Convergence(f64),

    #[error("simulation diverged at t = {0} s")]
    Divergence(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            range: range.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
