//! Symplectic matrices and the symplectic form.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};
use crate::tol::Tolerances;

/// The symplectic form Omega, block diagonal with 2x2 blocks [[0,1],[-1,0]].
pub fn symplectic_form_matrix<T: Scalar>(n_modes: usize) -> DMatrix<T> {
    assert!(n_modes >= 1, "n_modes must be >= 1");
    let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        m[(2 * j, 2 * j + 1)] = T::one();
        m[(2 * j + 1, 2 * j)] = -T::one();
    }
    m
}

/// Omega as a [`SymplecticMatrix`] (it is itself symplectic).
pub fn symplectic_form<T: Scalar>(n_modes: usize) -> SymplecticMatrix<T> {
    SymplecticMatrix {
        n_modes,
        m: symplectic_form_matrix(n_modes),
    }
}

/// A real 2Nx2N matrix K with K Omega K^T = Omega, representing a Gaussian
/// transformation at covariance level via sigma -> K sigma K^T.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix<T: Scalar> {
    n_modes: usize,
    m: DMatrix<T>,
}

/// Max |A - B| entry.
pub(crate) fn max_abs_diff<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let d = (*x - *y).abs();
        if d > worst {
            worst = d;
        }
    }
    worst
}

impl<T: Scalar> SymplecticMatrix<T> {
    /// Validates the symplectic condition at the default tolerance.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        Self::with_tol(m, &Tolerances::default())
    }

    pub fn with_tol(m: DMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                a: m.nrows(),
                b: m.ncols(),
            });
        }
        let n_modes = m.nrows() / 2;
        let omega = symplectic_form_matrix::<T>(n_modes);
        let defect = max_abs_diff(&(&m * &omega * m.transpose()), &omega);
        if defect > tol.symplectic {
            return Err(Error::NotSymplectic {
                defect: to_f64(defect),
            });
        }
        Ok(Self { n_modes, m })
    }

    /// Skips the symplectic check; for internal constructors that are
    /// symplectic by construction.
    pub(crate) fn from_parts_unchecked(n_modes: usize, m: DMatrix<T>) -> Self {
        debug_assert_eq!(m.nrows(), 2 * n_modes);
        Self { n_modes, m }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            m: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.m
    }

    /// Defect of the symplectic condition, ||K Omega K^T - Omega||_max.
    pub fn symplectic_defect(&self) -> T {
        let omega = symplectic_form_matrix::<T>(self.n_modes);
        max_abs_diff(&(&self.m * &omega * self.m.transpose()), &omega)
    }

    /// Defect of orthogonality, ||K K^T - I||_max.
    pub fn passivity_defect(&self) -> T {
        let eye = DMatrix::identity(2 * self.n_modes, 2 * self.n_modes);
        max_abs_diff(&(&self.m * self.m.transpose()), &eye)
    }

    /// Passive (energy-preserving) iff additionally orthogonal.
    pub fn is_passive(&self) -> bool {
        self.passivity_defect() <= Tolerances::default().passive
    }

    /// Symplectic inverse, K^{-1} = Omega^T K^T Omega. Exact up to rounding,
    /// no linear solve involved.
    pub fn inverse(&self) -> Self {
        let omega = symplectic_form_matrix::<T>(self.n_modes);
        Self {
            n_modes: self.n_modes,
            m: omega.transpose() * self.m.transpose() * omega,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            n_modes: self.n_modes,
            m: self.m.transpose(),
        }
    }

    /// Congruence K A K^T on a raw matrix.
    pub(crate) fn sandwich(&self, a: &DMatrix<T>) -> DMatrix<T> {
        &self.m * a * self.m.transpose()
    }
}

impl<T: Scalar> std::ops::Mul for &SymplecticMatrix<T> {
    type Output = SymplecticMatrix<T>;

    fn mul(self, rhs: &SymplecticMatrix<T>) -> SymplecticMatrix<T> {
        assert_eq!(self.n_modes, rhs.n_modes, "mode count mismatch");
        SymplecticMatrix {
            n_modes: self.n_modes,
            m: &self.m * &rhs.m,
        }
    }
}

/// Check that a scalar is finite and within the given closed interval.
pub(crate) fn check_range<T: Scalar>(name: &'static str, v: T, lo: f64, hi: f64) -> Result<()> {
    let vf = to_f64(v);
    if !vf.is_finite() || vf < lo || vf > hi {
        return Err(Error::ParamOutOfRange { name, value: vf });
    }
    Ok(())
}

/// Check that a scalar is finite.
pub(crate) fn check_finite<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    let vf = to_f64(v);
    if !vf.is_finite() {
        return Err(Error::ParamOutOfRange { name, value: vf });
    }
    Ok(())
}
