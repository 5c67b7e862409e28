use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("joint is inconsistent with the source marginal (max deviation {0:.3e})")]
    Inconsistent(f64),
    #[error("enumeration needs {count} evaluations, budget is {budget}")]
    Budget { count: f64, budget: f64 },
    #[error("gradient undefined at a boundary cell: {0}")]
    Boundary(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 3,
            Error::Budget { .. } => 4,
            _ => 2,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
