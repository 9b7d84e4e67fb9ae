use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("functional `{name}`: {source}")]
    Functional {
        name: String,
        #[source]
        source: poisson_ou::dsl::ParseError,
    },

    #[error("check #{index} ({id}): {message}")]
    Check { index: usize, id: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Engine(#[from] poisson_ou::Error),

    #[error("cannot serialise config: {0}")]
    Serialize(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// `2` for anything the user wrote wrong, `3` for an exhausted state
    /// budget, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        use poisson_ou::Error as E;
        match self {
            CliError::Config { .. } | CliError::Functional { .. } | CliError::Check { .. } | CliError::Usage(_) => 2,
            CliError::Engine(E::BudgetExceeded { .. }) => 3,
            CliError::Engine(E::Parse(_) | E::InvalidParameter { .. } | E::InvalidSpace(_) | E::WrongMode(_)) => 2,
            CliError::Engine(_) | CliError::Serialize(_) | CliError::Io { .. } => 1,
        }
    }
}
