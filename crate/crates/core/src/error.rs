use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gimbal lock: |pitch| = {pitch} is within 1e-6 of pi/2")]
    GimbalLock { pitch: f64 },

    #[error("unsupported preset link count {0} (expected 3 or 7)")]
    UnsupportedPreset(usize),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("mass matrix solve failed (condition number {cond:e})")]
    SingularMass { cond: f64 },

    #[error("CoM transform is ill-conditioned (condition number {cond:e})")]
    IllConditionedTransform { cond: f64 },

    #[error("mover coupling block is ill-conditioned (condition number {cond:e})")]
    SingularCoupling { cond: f64 },

    #[error("Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state escaped at t = {t}: {reason}")]
    StateEscape { t: f64, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
