use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration: bad indices, inconsistent dimensions, invalid parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// The profile does not cover the configuration space.
    #[error("profile is missing {} entr{}: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, .0.join(", "))]
    MissingProfileKeys(Vec<String>),

    /// No configuration on any allowed tier meets the accuracy requirement of a task.
    #[error("task {task} is infeasible: no configuration reaches accuracy {requirement}")]
    InfeasibleTask { task: u32, requirement: f64 },

    /// No first-stage decision satisfies the shared bandwidth cap.
    #[error("instance is infeasible: {0}")]
    Infeasible(String),

    /// Exact enumeration was requested beyond its configured size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the variants that mean "no solution exists" rather than "bad input".
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::InfeasibleTask { .. } | Error::Infeasible(_))
    }
}
