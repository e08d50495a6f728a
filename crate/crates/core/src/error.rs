use std::path::PathBuf;

/// Errors raised across the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid profile parameters: {0}")]
    InvalidProfile(String),

    #[error("point outside the admissible domain: {0}")]
    OutOfDomain(String),

    #[error("invalid frame or snapshot: {0}")]
    InvalidField(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("time step underflow: dt = {dt:.3e} < dt_min = {dt_min:.3e} at t = {t}")]
    DtUnderflow { dt: f64, dt_min: f64, t: f64 },

    #[error("Lyapunov functional increased by {increase:.3e} (tolerance {tol:.3e}) at s = {s}")]
    EnergyIncrease { s: f64, increase: f64, tol: f64 },

    #[error("no monotone growth window at x = {x}: {reason}")]
    NoGrowth { x: f64, reason: String },

    #[error("fit did not converge after {iterations} iterations (distance {distance:.3e})")]
    FitNotConverged { iterations: usize, distance: f64 },

    #[error("fitted distance {distance:.3e} exceeds trust threshold {threshold:.3e}")]
    OutsideTrustRegion { distance: f64, threshold: f64 },

    #[error("decay rate unresolvable: {0}")]
    Unresolvable(String),

    #[error("ill-conditioned stencil: {0}")]
    IllConditioned(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("malformed data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
