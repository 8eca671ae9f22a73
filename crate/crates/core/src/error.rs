use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("CHAIN_VIOLATION: {0}")]
    ChainViolation(String),
    #[error("DERIVATIVE_UNAVAILABLE: order {requested} exceeds {available}")]
    DerivativeUnavailable { requested: usize, available: usize },
    #[error("THRESHOLD_VIOLATION: {0}")]
    ThresholdViolation(String),
    #[error("STEP_UNDERFLOW: step size {step:e} at t = {t}")]
    StepUnderflow { step: f64, t: f64 },
    #[error("HYPOTHESIS_VIOLATION: {0}")]
    HypothesisViolation(String),
    #[error("INTERFERENCE: bump {bump} touched at {time}")]
    Interference { bump: usize, time: String },
    #[error("RETRY_EXHAUSTED: {0}")]
    RetryExhausted(String),
    #[error("SHOOTING_DIVERGED: {0}")]
    ShootingDiverged(String),
    #[error("BUDGET_EXCEEDED: hypothesis fails by {margin}")]
    BudgetExceeded { margin: String },
    #[error("DOMAIN: {0}")]
    Domain(String),
    #[error("PRECISION_BUDGET: {0}")]
    PrecisionBudget(String),
    #[error("NOT_CERTIFIED: {0}")]
    NotCertified(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors that signal an exhausted computational budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::RetryExhausted(_)
                | Error::ShootingDiverged(_)
                | Error::BudgetExceeded { .. }
                | Error::PrecisionBudget(_)
        )
    }
}
