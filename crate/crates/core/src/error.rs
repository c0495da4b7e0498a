use thiserror::Error;

/// Diagnostics attached to a failed saturation check in [`crate::maxeof`].
#[derive(Debug, Clone)]
pub struct GapReport {
    pub sof_in: f64,
    pub sof_out: f64,
    pub eof_out: f64,
    pub h0_sof: f64,
    pub gap: f64,
    pub dcc_residual: f64,
    pub restarts_used: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max |A - A^T| entry = {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix is not positive definite (min eigenvalue = {min_eig:e})")]
    NonPositiveDefinite { min_eig: f64 },

    #[error("state is unphysical (smallest symplectic eigenvalue = {nu_min})")]
    NotPhysical { nu_min: f64 },

    #[error("expected {expected}-mode input, got {got} modes")]
    WrongModeCount { expected: usize, got: usize },

    #[error("mode index {index} out of range for {n_modes} modes")]
    IndexOutOfRange { index: usize, n_modes: usize },

    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },

    #[error("parameter {name} out of range (value = {value})")]
    ParamOutOfRange { name: &'static str, value: f64 },

    #[error("matrix is not symplectic (||K Omega K^T - Omega||_max = {defect:e})")]
    NotSymplectic { defect: f64 },

    #[error("matrix is not passive (||K K^T - I||_max = {defect:e})")]
    NotPassive { defect: f64 },

    #[error("state is not pure (det = {det})")]
    NotPure { det: f64 },

    #[error("argument {name} outside function domain (value = {value})")]
    DomainError { name: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("separability window is empty (r_lo = {r_lo}, r_hi = {r_hi})")]
    EmptyWindow { r_lo: f64, r_hi: f64 },

    #[error("optimizer failed after {restarts} restarts (best infeasibility = {best_infeasibility:e})")]
    OptimizerFailed {
        restarts: usize,
        best_infeasibility: f64,
    },

    #[error("de-cross-correlation failed (residual = {residual:e})")]
    DccFailed { residual: f64 },

    #[error("saturation gap above tolerance: |E - h0[S]| = {}", .0.gap.abs())]
    ConjectureGap(Box<GapReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
