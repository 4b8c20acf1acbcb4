use thiserror::Error;

/// Errors produced by the precoding library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("channel vector of user {user} is zero")]
    DegenerateChannel { user: usize },

    #[error("channel matrix is singular for zero-forcing: {0}")]
    SingularChannel(String),

    #[error("precoder is zero, cannot be normalized")]
    DegenerateInput,

    #[error("no scaling in (0, {alpha_max:e}] reaches the power target {p_tot:e} W")]
    ProjectionInfeasible { p_tot: f64, alpha_max: f64 },

    #[error("user index {index} out of range for {users} users")]
    IndexOutOfRange { index: usize, users: usize },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(#[from] serde_json::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DegenerateChannel { .. } => "degenerate-channel",
            Error::SingularChannel(_) => "singular-channel",
            Error::DegenerateInput => "degenerate-input",
            Error::ProjectionInfeasible { .. } => "projection-infeasible",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::Config { .. } | Error::ConfigParse(_) => "config",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
