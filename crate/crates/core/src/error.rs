use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid type profile: {0}")]
    InvalidProfile(String),

    #[error("deadline {0} is outside [0, 1]")]
    InvalidDeadline(f64),

    #[error("grouping has {grouping} labels but the profile has {agents} agents")]
    GroupingMismatch { grouping: usize, agents: usize },

    #[error("{agents} agents exceed the exact enumeration cap of {cap}; use Monte Carlo instead")]
    EnumerationCap { agents: usize, cap: usize },

    #[error("agent index {agent} out of range for {agents} agents")]
    AgentOutOfRange { agent: usize, agents: usize },

    #[error("alpha(k) requires k >= 1")]
    InvalidK,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{x} is outside the support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
