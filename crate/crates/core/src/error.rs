use thiserror::Error;

/// Errors produced by estimators, models, and serialization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cohort")]
    EmptyCohort,
    #[error("invalid cohort: {0}")]
    InvalidCohort(String),
    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),
    #[error("not a cumulative hazard: negative values present")]
    NotCumulativeHazard,
    #[error("degenerate split: one group is empty")]
    DegenerateSplit,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("no events in input")]
    NoEvents,
    #[error("feature count mismatch: expected {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("missing baseline hazard for proportional-hazards prediction")]
    MissingBaseline,
    #[error("missing discrete time grid")]
    MissingGrid,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
