use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies behind the RIS plane")]
    BehindArray,

    #[error("zero distance between array elements")]
    ZeroDistance,

    #[error("amplitude profile is identically zero")]
    ZeroProfile,

    #[error("remez exchange did not converge after {iterations} iterations (last ripple {ripple:e})")]
    RemezNotConverged { iterations: usize, ripple: f64 },

    #[error("scatterer placement failed for cluster {cluster} after {attempts} attempts")]
    Placement { cluster: usize, attempts: usize },

    #[error("vMF hemisphere rejection exhausted after {0} draws")]
    HemisphereRejection(usize),

    #[error("duplicate codeword id {0}")]
    DuplicateCodeword(usize),

    #[error("codeword {child} references unknown parent {parent}")]
    UnknownParent { child: usize, parent: usize },

    #[error("all beam pools are empty")]
    EmptyPools,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
