use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("linear solve broke down at row {row}")]
    SingularSystem { row: usize },

    #[error("hypotheses violated: {0}")]
    Hypothesis(String),

    #[error("probe ball escapes the mesh: {0}")]
    BallEscapesMesh(String),

    #[error("support exceeds the probe radius: rho = {rho}, r = {radius}")]
    SupportTooLarge { rho: f64, radius: f64 },

    #[error("precondition not met: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
