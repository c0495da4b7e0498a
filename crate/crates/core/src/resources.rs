//! Resource measures: squeezing of formation (SOF) and Gaussian
//! entanglement of formation (EOF), with the auxiliary functions h and h0
//! connecting them.
//!
//! The mixed-state quantities minimize over pure decompositions sigma =
//! pi + phi with phi >= 0; the minimizations are delegated to the
//! internal constrained optimizer and are deterministic given a seed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cov::{two_mode_nu_min, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::optimize::{minimize_pure, Budget, Objective};
use crate::scalar::{num, to_f64, Scalar};
use crate::tol::Tolerances;

/// Plain value of h without domain checks, valid for x > 0. Symmetric
/// under x -> 1/x, zero at x = 1.
pub(crate) fn h_impl<T: Scalar>(x: T) -> T {
    let quarter_x = num::<T>(4.0) * x;
    let ap = T::one() + x;
    let am = T::one() - x;
    let a = ap * ap / quarter_x;
    let b = am * am / quarter_x;
    // b ln b -> 0 as x -> 1
    let bterm = if b > T::zero() { b * b.ln() } else { T::zero() };
    a * a.ln() - bterm
}

/// Entanglement entropy as a function of the smallest partial-transpose
/// symplectic eigenvalue x of a pure state.
pub fn h<T: Scalar>(x: T) -> Result<T> {
    let xf = to_f64(x);
    if !xf.is_finite() || xf <= 0.0 || xf > 1.0 + 1e-12 {
        return Err(Error::DomainError {
            name: "x",
            value: xf,
        });
    }
    Ok(h_impl(x.min(T::one())))
}

/// h0(s) = h(e^{-s}), strictly increasing in s >= 0.
pub fn h0<T: Scalar>(s: T) -> Result<T> {
    let sf = to_f64(s);
    if !sf.is_finite() || sf < -1e-12 {
        return Err(Error::DomainError {
            name: "s",
            value: sf,
        });
    }
    Ok(h_impl((-s.max(T::zero())).exp()))
}

/// A pure decomposition sigma = pi + phi with phi positive semidefinite.
#[derive(Debug, Clone)]
pub struct PureDecomposition<T: Scalar> {
    pub pi: CovarianceMatrix<T>,
    pub phi: DMatrix<T>,
}

impl<T: Scalar> PureDecomposition<T> {
    pub(crate) fn from_sigma_pi(sigma: &CovarianceMatrix<T>, pi: CovarianceMatrix<T>) -> Self {
        let phi = sigma.matrix() - pi.matrix();
        Self { pi, phi }
    }

    /// Minimum eigenvalue of the noise part; >= -1e-9 when feasible.
    pub fn noise_min_eig(&self) -> T {
        let eig = self.phi.clone().symmetric_eigen();
        let mut lo = eig.eigenvalues[0];
        for &l in eig.eigenvalues.iter().skip(1) {
            if l < lo {
                lo = l;
            }
        }
        lo
    }
}

/// Outcome of a mixed-state resource minimization.
#[derive(Debug, Clone)]
pub struct Minimized<T: Scalar> {
    pub value: T,
    pub witness: PureDecomposition<T>,
    pub iterations: usize,
    pub restarts: usize,
    pub achieved_tolerance: T,
}

fn require_two_modes<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<()> {
    if sigma.n_modes() != 2 {
        return Err(Error::WrongModeCount {
            expected: 2,
            got: sigma.n_modes(),
        });
    }
    Ok(())
}

fn require_pure<T: Scalar>(pi: &CovarianceMatrix<T>) -> Result<()> {
    let det = pi.det();
    if (det - T::one()).abs() > Tolerances::<T>::default().pure_det {
        return Err(Error::NotPure { det: to_f64(det) });
    }
    Ok(())
}

/// SOF of a pure state: half the log-product of the N largest
/// eigenvalues of pi.
pub fn sof_pure<T: Scalar>(pi: &CovarianceMatrix<T>) -> Result<T> {
    require_pure(pi)?;
    let n = pi.n_modes();
    let mut eigs: Vec<T> = pi
        .matrix()
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = T::zero();
    for &l in &eigs[n..] {
        acc += l.ln();
    }
    Ok((acc * num(0.5)).max(T::zero()))
}

/// Entanglement entropy of a pure two-mode state.
pub fn eof_pure<T: Scalar>(pi: &CovarianceMatrix<T>) -> Result<T> {
    require_two_modes(pi)?;
    require_pure(pi)?;
    let nu = two_mode_nu_min(pi.matrix(), true);
    if nu >= T::one() - Tolerances::<T>::default().sep {
        return Ok(T::zero());
    }
    Ok(h_impl(nu).max(T::zero()))
}

/// SOF of a mixed two-mode state, minimized over pure decompositions.
pub fn sof_mixed<T: Scalar>(sigma: &CovarianceMatrix<T>, seed: u64) -> Result<Minimized<T>> {
    sof_mixed_budget(sigma, seed, &Budget::FULL)
}

pub(crate) fn sof_mixed_budget<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    seed: u64,
    budget: &Budget,
) -> Result<Minimized<T>> {
    require_two_modes(sigma)?;
    if sigma.is_pure() {
        // the only feasible pure part of a pure state is the state itself
        return Ok(Minimized {
            value: sof_pure(sigma)?,
            witness: PureDecomposition::from_sigma_pi(sigma, sigma.clone()),
            iterations: 0,
            restarts: 0,
            achieved_tolerance: T::zero(),
        });
    }
    let opt = minimize_pure(sigma, Objective::Sof, seed, budget)?;
    debug_assert!(
        to_f64(opt.feasibility) > -1e-6,
        "optimizer accepted an infeasible witness"
    );
    let pi = CovarianceMatrix::from_parts_unchecked(2, DMatrix::from_fn(4, 4, |i, j| opt.pi[(i, j)]));
    Ok(Minimized {
        value: opt.value.max(T::zero()),
        witness: PureDecomposition::from_sigma_pi(sigma, pi),
        iterations: opt.iterations,
        restarts: opt.restarts_used,
        achieved_tolerance: opt.achieved_tol,
    })
}

/// Gaussian EOF of a two-mode state, minimized over pure decompositions.
/// Separable states short-circuit to zero by the PPT criterion.
pub fn gaussian_eof<T: Scalar>(sigma: &CovarianceMatrix<T>, seed: u64) -> Result<Minimized<T>> {
    gaussian_eof_budget(sigma, seed, &Budget::FULL)
}

pub(crate) fn gaussian_eof_budget<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    seed: u64,
    budget: &Budget,
) -> Result<Minimized<T>> {
    require_two_modes(sigma)?;
    if sigma.is_separable()? {
        let w = crate::decomp::williamson(sigma)?;
        return Ok(Minimized {
            value: T::zero(),
            witness: PureDecomposition::from_sigma_pi(sigma, w.pure_part()),
            iterations: 0,
            restarts: 0,
            achieved_tolerance: T::zero(),
        });
    }
    if sigma.is_pure() {
        return Ok(Minimized {
            value: eof_pure(sigma)?,
            witness: PureDecomposition::from_sigma_pi(sigma, sigma.clone()),
            iterations: 0,
            restarts: 0,
            achieved_tolerance: T::zero(),
        });
    }
    let opt = minimize_pure(sigma, Objective::Eof, seed, budget)?;
    debug_assert!(
        to_f64(opt.feasibility) > -1e-6,
        "optimizer accepted an infeasible witness"
    );
    let pi = CovarianceMatrix::from_parts_unchecked(2, DMatrix::from_fn(4, 4, |i, j| opt.pi[(i, j)]));
    Ok(Minimized {
        value: opt.value.max(T::zero()),
        witness: PureDecomposition::from_sigma_pi(sigma, pi),
        iterations: opt.iterations,
        restarts: opt.restarts_used,
        achieved_tolerance: opt.achieved_tol,
    })
}

/// Upper bound h0(SOF) on the Gaussian EOF and on the entanglement
/// potential.
pub fn eof_potential_bound<T: Scalar>(sigma: &CovarianceMatrix<T>, seed: u64) -> Result<T> {
    h0(sof_mixed(sigma, seed)?.value)
}

/// Optimizer diagnostics attached to a [`ResourceReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub iterations: usize,
    pub restarts: usize,
    pub achieved_tolerance: f64,
    /// Row-major entries of the optimal pure state from the EOF run.
    pub optimal_pure_state: Vec<Vec<f64>>,
}

/// Full resource evaluation of one state: SOF, EOF, and the bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceReport {
    pub sof: f64,
    pub eof: f64,
    pub h0_of_sof: f64,
    /// Slack of the bound, h0(SOF) - EOF; nonnegative up to tolerance.
    pub gap: f64,
    pub optimizer: OptimizerInfo,
}

/// Evaluates SOF, EOF and the h0(SOF) bound on one state.
pub fn resource_report(sigma: &CovarianceMatrix<f64>, seed: u64) -> Result<ResourceReport> {
    let sof = sof_mixed(sigma, seed)?;
    let eof = gaussian_eof(sigma, seed.wrapping_add(1))?;
    let h0_of_sof = h0(sof.value)?;
    let m = eof.witness.pi.matrix();
    let rows = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    Ok(ResourceReport {
        sof: sof.value,
        eof: eof.value,
        h0_of_sof,
        gap: h0_of_sof - eof.value,
        optimizer: OptimizerInfo {
            iterations: sof.iterations + eof.iterations,
            restarts: sof.restarts + eof.restarts,
            achieved_tolerance: sof.achieved_tolerance.max(eof.achieved_tolerance),
            optimal_pure_state: rows,
        },
    })
}
