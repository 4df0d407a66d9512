use thiserror::Error;

/// Errors raised by the filtering library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke a documented precondition (dimensions, ranges, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    /// No slaved reaction set with an invertible coefficient block exists.
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    /// The linear constraint on integrated intensities has no admissible solution.
    #[error("infeasible intensity constraint: {0}")]
    InfeasibleIntensity(String),

    /// Rejection sampling of the free counts never produced a feasible slaved vector.
    #[error("target unreachable after {attempts} rejections{}", interval.map(|i| format!(" (interval {i})")).unwrap_or_default())]
    TargetUnreachable {
        attempts: u64,
        interval: Option<usize>,
    },

    /// Every particle carries zero weight, so no estimate can be formed.
    #[error("all particles rejected (zero total weight)")]
    AllRejected,

    /// The observation has probability zero under the model.
    #[error("observation outside the support: {0}")]
    OutsideSupport(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
