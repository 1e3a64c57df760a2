use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("infeasible design space: {0}")]
    Infeasible(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("singular master design: {0}")]
    SingularMaster(String),
    #[error("infeasible master design: every restart was singular")]
    InfeasibleMaster,
    #[error("start design does not conform to master design: {0}")]
    InvalidStart(String),
    #[error("no valid neighbor found after {0} retries")]
    StuckState(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 infeasible, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Infeasible(_) | Error::InfeasibleMaster | Error::InvalidStart(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
