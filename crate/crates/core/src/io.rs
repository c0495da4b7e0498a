//! JSON serialization for states and pipeline traces.
//!
//! The state schema is {"n_modes": N, "matrix": [[...], ...]} with a
//! row-major 2N x 2N matrix; loading validates the covariance-matrix
//! invariants and reports which one failed.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cov::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::maxeof::{AlgorithmTrace, SaturationCheck};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateJson {
    n_modes: usize,
    matrix: Vec<Vec<f64>>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serializes a state to the JSON schema as a string.
pub fn state_to_string(sigma: &CovarianceMatrix<f64>) -> Result<String> {
    let s = StateJson {
        n_modes: sigma.n_modes(),
        matrix: matrix_rows(sigma.matrix()),
    };
    Ok(serde_json::to_string_pretty(&s)?)
}

/// Parses and validates a state from its JSON representation. The
/// validation errors name the violated invariant (symmetry, shape, or
/// physicality).
pub fn state_from_str(text: &str) -> Result<CovarianceMatrix<f64>> {
    let s: StateJson = serde_json::from_str(text)?;
    let dim = 2 * s.n_modes;
    if s.matrix.len() != dim || s.matrix.iter().any(|row| row.len() != dim) {
        return Err(Error::DimensionMismatch {
            a: dim,
            b: s.matrix.len(),
        });
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| s.matrix[i][j]);
    let sigma = CovarianceMatrix::new(m)?;
    let nu_min = sigma.nu_min()?;
    if !sigma.is_physical()? {
        return Err(Error::NotPhysical { nu_min });
    }
    Ok(sigma)
}

pub fn save_state<P: AsRef<Path>>(sigma: &CovarianceMatrix<f64>, path: P) -> Result<()> {
    fs::write(path, state_to_string(sigma)?)?;
    Ok(())
}

pub fn load_state<P: AsRef<Path>>(path: P) -> Result<CovarianceMatrix<f64>> {
    state_from_str(&fs::read_to_string(path)?)
}

/// Flat JSON image of one pipeline run: every intermediate state, the
/// search results, and the saturation numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub pi_opt: Vec<Vec<f64>>,
    pub pi_diag: Vec<Vec<f64>>,
    pub sigma_diag: Vec<Vec<f64>>,
    pub phi_diag: Vec<Vec<f64>>,
    pub phi_extra: Vec<Vec<f64>>,
    pub sigma_prime: Vec<Vec<f64>>,
    pub sigma_rot: Vec<Vec<f64>>,
    pub sigma_out: Vec<Vec<f64>>,
    pub k_bm: Vec<Vec<f64>>,
    pub theta_star: f64,
    pub i_star: usize,
    pub tau_star: f64,
    pub j_star: usize,
    pub dcc_residual: f64,
    pub skipped_noise_path: bool,
    pub sof_in: f64,
    pub sof_out: f64,
    pub eof_out: f64,
    pub h0_sof: f64,
    pub gap: f64,
}

impl TraceJson {
    pub fn new(trace: &AlgorithmTrace<f64>, check: &SaturationCheck) -> Self {
        TraceJson {
            pi_opt: matrix_rows(trace.pi_opt.matrix()),
            pi_diag: matrix_rows(trace.pi_diag.matrix()),
            sigma_diag: matrix_rows(trace.sigma_diag.matrix()),
            phi_diag: matrix_rows(&trace.phi_diag),
            phi_extra: matrix_rows(&trace.phi_extra),
            sigma_prime: matrix_rows(trace.sigma_prime.matrix()),
            sigma_rot: matrix_rows(trace.sigma_rot.matrix()),
            sigma_out: matrix_rows(trace.sigma_out.matrix()),
            k_bm: matrix_rows(trace.k_bm.matrix()),
            theta_star: trace.theta_star,
            i_star: trace.i_star,
            tau_star: trace.tau_star,
            j_star: trace.j_star,
            dcc_residual: trace.dcc_residual,
            skipped_noise_path: trace.skipped_noise_path,
            sof_in: check.sof_in,
            sof_out: check.sof_out,
            eof_out: check.eof_out,
            h0_sof: check.h0_sof,
            gap: check.gap,
        }
    }
}

pub fn save_trace<P: AsRef<Path>>(
    trace: &AlgorithmTrace<f64>,
    check: &SaturationCheck,
    path: P,
) -> Result<()> {
    let t = TraceJson::new(trace, check);
    fs::write(path, serde_json::to_string_pretty(&t)?)?;
    Ok(())
}
