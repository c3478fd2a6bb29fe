use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("reputation value {0} outside [0, 1]")]
    ReputationOutOfRange(f64),

    #[error("unknown reputation engine `{0}` (expected one of timedecay, bayesbeta, pagerank, powertrust, peertrust, betapt, blind)")]
    UnknownEngine(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("min-max normalization needs at least two distinct values")]
    DegenerateNormalization,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
