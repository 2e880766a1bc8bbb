use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("all observations are identical; the test has no information (p = 1)")]
    DegenerateSample,
    #[error("a proportion has a zero denominator")]
    ZeroDenominator,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("every difference from the location is zero")]
    AllZeroDifferences,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("pooled standard deviation is zero")]
    ZeroVariance,
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("complete or quasi-complete separation: coefficients diverge")]
    SeparationDetected,
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dataset incomplete: {0}")]
    DatasetIncomplete(String),
}
