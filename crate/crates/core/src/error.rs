use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("M_kappa is not invertible: diagonal entry {index} is {value:e}")]
    NonInvertibleM { index: usize, value: f64 },
    #[error("time {t} outside protocol window [0, {tau}]")]
    OutOfRange { t: f64, tau: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("well classification failed: {0}")]
    WellClassificationFailed(String),
    #[error("grid too coarse: level {level} moved by {shift:.3e} (relative) under refinement")]
    GridTooCoarse { level: usize, shift: f64 },
    #[error("gauge ambiguity at column {column}: overlaps {first:.3e} and {second:.3e} too close")]
    GaugeAmbiguity { column: usize, first: f64, second: f64 },
    #[error("degenerate gap between levels {i} and {j}: |ΔE| = {gap:e} with coupling {coupling:e}")]
    DegenerateGap { i: usize, j: usize, gap: f64, coupling: f64 },
    #[error("step size underflow at t = {t}: required step {step:e} below minimum")]
    StepUnderflow { t: f64, step: f64 },
    #[error("positivity lost at t = {t}: smallest eigenvalue {min_eigenvalue:e}")]
    PositivityLoss { t: f64, min_eigenvalue: f64 },
    #[error("negative eigenvalue {0:e} in density matrix")]
    NegativeEigenvalue(f64),
    #[error("time samples are not strictly increasing at index {0}")]
    NonMonotoneTime(usize),
    #[error("endpoints indistinguishable: Bures angle {0:e}")]
    DegenerateEndpoints(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}
