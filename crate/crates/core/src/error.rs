use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside the domain the algorithm is defined on.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("address {address} out of bounds for store of capacity {capacity}")]
    OutOfBounds { address: usize, capacity: usize },

    #[error("graph has no vertices left")]
    EmptyGraph,

    /// Input data violates a structural assumption, e.g. sortedness.
    #[error("invalid data: {0}")]
    Data(String),

    #[error("store capacity {capacity} exceeded: {occupied} occupied, {requested} requested")]
    Capacity {
        capacity: usize,
        occupied: usize,
        requested: usize,
    },

    #[error("privacy budget exhausted: spent {spent}, requested {requested}, total {total}")]
    BudgetExhausted {
        spent: f64,
        requested: f64,
        total: f64,
    },

    /// Inputs handed to the adversary experiment are not neighbors.
    #[error("neighbor validation failed: {0}")]
    Validation(String),

    #[error("trace was not produced by {0}")]
    ForeignTrace(&'static str),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors caused by caller-supplied values rather than by a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_) | Error::Validation(_) | Error::EmptyGraph | Error::Data(_)
        )
    }
}
