use thiserror::Error;

/// Errors raised anywhere in the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("no guided modes: {0}")]
    NoGuidedModes(String),

    #[error("window too small: {0}")]
    Window(String),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("integration diverged at step {step} (z = {z} um)")]
    Diverged { step: usize, z: f64 },

    #[error("refinement required: {0}")]
    Refinement(String),

    #[error("nonlinear iteration did not converge at z = {z} um (relative change {change:e})")]
    NonlinearConvergence { z: f64, change: f64 },

    #[error("calibration failed: {reason}; scan: {trace:?}")]
    Calibration { reason: String, trace: Vec<(f64, f64)> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("layout format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
