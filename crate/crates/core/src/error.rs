use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Input dimensions or values are inconsistent.
    #[error("malformed input: {0}")]
    Malformed(String),
    /// A precondition of a mathematical operation does not hold.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configurable state, node or guess limit was hit. Never a verdict.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    /// The instance admits no schedule at any objective value.
    #[error("no feasible schedule: {0}")]
    NoFeasibleSchedule(String),
    /// The brute-force oracle declined an instance outside its caps.
    #[error("oracle refused: {0}")]
    OracleRefused(String),
    /// A produced certificate failed verification. Indicates a solver bug.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
