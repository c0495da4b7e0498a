//! Covariance matrices, symplectic spectra and state predicates.
//!
//! Quadrature ordering is fixed as (x1, p1, x2, p2, ...) everywhere; the
//! vacuum state is the identity matrix, so the uncertainty bound reads
//! nu_1 >= 1.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{num, to_f64, Scalar};
use crate::symp::{max_abs_diff, symplectic_form_matrix};
use crate::tol::Tolerances;

/// Second-moment matrix of an N-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Scalar> {
    n_modes: usize,
    m: DMatrix<T>,
}

impl<T: Scalar> CovarianceMatrix<T> {
    /// Validates shape and symmetry, then stores the symmetrized matrix.
    /// Physicality is a separate predicate; see [`Self::is_physical`].
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
        let asym = max_abs_diff(&m, &m.transpose());
        if asym > tol.sym {
            return Err(Error::NotSymmetric {
                max_asym: to_f64(asym),
            });
        }
        let half: T = num(0.5);
        let sym = (&m + m.transpose()) * half;
        Ok(Self {
            n_modes: sym.nrows() / 2,
            m: sym,
        })
    }

    pub(crate) fn from_parts_unchecked(n_modes: usize, m: DMatrix<T>) -> Self {
        debug_assert_eq!(m.nrows(), 2 * n_modes);
        Self { n_modes, m }
    }

    /// Vacuum state: identity.
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            n_modes,
            m: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Thermal state Diag(nu_1, nu_1, ..., nu_N, nu_N).
    pub fn thermal(nus: &[T]) -> Result<Self> {
        for &nu in nus {
            if nu < T::one() {
                return Err(Error::NotPhysical { nu_min: to_f64(nu) });
            }
        }
        let n = nus.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (j, &nu) in nus.iter().enumerate() {
            m[(2 * j, 2 * j)] = nu;
            m[(2 * j + 1, 2 * j + 1)] = nu;
        }
        Ok(Self { n_modes: n, m })
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

    pub fn trace(&self) -> T {
        self.m.trace()
    }

    pub fn det(&self) -> T {
        self.m.clone().lu().determinant()
    }

    fn require_two_modes(&self) -> Result<()> {
        if self.n_modes != 2 {
            return Err(Error::WrongModeCount {
                expected: 2,
                got: self.n_modes,
            });
        }
        Ok(())
    }

    /// Symmetric square root via eigen-decomposition. Errors if any
    /// eigenvalue is at or below the positive-definiteness floor.
    pub(crate) fn sqrt_matrix(&self) -> Result<DMatrix<T>> {
        let tol = Tolerances::<T>::default();
        let eig = self.m.clone().symmetric_eigen();
        let mut min_eig = T::max_value().unwrap();
        for &l in eig.eigenvalues.iter() {
            if l < min_eig {
                min_eig = l;
            }
        }
        if min_eig <= tol.pos_def {
            return Err(Error::NonPositiveDefinite {
                min_eig: to_f64(min_eig),
            });
        }
        let sqrt_vals = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|l| l.sqrt()),
        );
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose())
    }

    /// Symplectic eigenvalues nu_1 <= ... <= nu_N, the positive eigenvalues
    /// of i Omega sigma. Computed through the skew-symmetric product
    /// A = sigma^{1/2} Omega sigma^{1/2}, whose squared spectrum is
    /// {-nu_j^2} with multiplicity two; conjugate pairs are matched by
    /// sorted adjacency.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<T>> {
        let root = self.sqrt_matrix()?;
        let omega = symplectic_form_matrix::<T>(self.n_modes);
        let a = &root * &omega * &root;
        // -A^2 is symmetric positive semidefinite with eigenvalues nu_j^2.
        let m = -(&a * &a);
        let mut sq: Vec<T> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        sq.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let nus = (0..self.n_modes)
            .map(|j| {
                let pair_avg = (sq[2 * j] + sq[2 * j + 1]) * num::<T>(0.5);
                pair_avg.max(T::zero()).sqrt()
            })
            .collect();
        Ok(nus)
    }

    /// Smallest symplectic eigenvalue. Two-mode states use the closed form
    /// from the block invariants; larger states fall back to the eigen route.
    pub fn nu_min(&self) -> Result<T> {
        if self.n_modes == 2 {
            return Ok(two_mode_nu_min(&self.m, false));
        }
        Ok(self.symplectic_eigenvalues()?[0])
    }

    /// Physical iff nu_1 >= 1 - tol.
    pub fn is_physical(&self) -> Result<bool> {
        let tol = Tolerances::<T>::default();
        Ok(self.nu_min()? >= T::one() - tol.phys)
    }

    /// Pure iff det sigma = 1 within tolerance.
    pub fn is_pure(&self) -> bool {
        let tol = Tolerances::<T>::default();
        (self.det() - T::one()).abs() <= tol.pure_det
    }

    /// Partial transpose of a two-mode state: sign flip of p2.
    pub fn partial_transpose(&self) -> Result<Self> {
        self.require_two_modes()?;
        let mut m = self.m.clone();
        for k in 0..4 {
            if k != 3 {
                let v = m[(3, k)];
                m[(3, k)] = -v;
                let v = m[(k, 3)];
                m[(k, 3)] = -v;
            }
        }
        Ok(Self { n_modes: 2, m })
    }

    /// PPT separability test: separable iff nu_1(sigma^Gamma) >= 1 - tol.
    pub fn is_separable(&self) -> Result<bool> {
        let tol = Tolerances::<T>::default();
        self.require_two_modes()?;
        let nu = two_mode_nu_min(&self.m, true);
        Ok(nu >= T::one() - tol.sep)
    }

    /// True iff all eight x-p cross entries are below tolerance.
    pub fn is_de_cross_correlated(&self) -> bool {
        let tol = Tolerances::<T>::default();
        self.cross_correlation_norm() <= tol.dcc
    }

    /// Max magnitude over the x-p cross entries of a two-mode state
    /// (positions (x1,p1), (x1,p2), (p1,x2), (x2,p2) and partners).
    pub fn cross_correlation_norm(&self) -> T {
        let mut worst = T::zero();
        for &(i, j) in &[(0usize, 1usize), (0, 3), (1, 2), (2, 3)] {
            let v = self.m[(i, j)].abs();
            if v > worst {
                worst = v;
            }
        }
        worst
    }

    /// Appends one vacuum mode: sigma -> sigma (+) I_2.
    pub fn add_vacuum_mode(&self) -> Self {
        let n = self.n_modes + 1;
        let mut m = DMatrix::identity(2 * n, 2 * n);
        m.view_mut((0, 0), (2 * self.n_modes, 2 * self.n_modes))
            .copy_from(&self.m);
        Self { n_modes: n, m }
    }

    /// Deletes the two rows/columns of the given mode (0-based index).
    pub fn trace_out_mode(&self, mode: usize) -> Result<Self> {
        if mode >= self.n_modes {
            return Err(Error::IndexOutOfRange {
                index: mode,
                n_modes: self.n_modes,
            });
        }
        if self.n_modes < 2 {
            return Err(Error::WrongModeCount {
                expected: 2,
                got: self.n_modes,
            });
        }
        let keep: Vec<usize> = (0..2 * self.n_modes)
            .filter(|&k| k / 2 != mode)
            .collect();
        let d = keep.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.m[(keep[i], keep[j])]);
        Ok(Self {
            n_modes: self.n_modes - 1,
            m,
        })
    }
}

/// Smallest symplectic eigenvalue of a two-mode covariance matrix via the
/// closed form nu^2 = (Delta - sqrt(Delta^2 - 4 det sigma)) / 2 with
/// Delta = det A + det B + 2 det C; `pt` flips the sign of det C, which is
/// the partial transpose.
pub(crate) fn two_mode_nu_min<T: Scalar>(m: &DMatrix<T>, pt: bool) -> T {
    let det2 = |a: T, b: T, c: T, d: T| a * d - b * c;
    let da = det2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let db = det2(m[(2, 2)], m[(2, 3)], m[(3, 2)], m[(3, 3)]);
    let dc = det2(m[(0, 2)], m[(0, 3)], m[(1, 2)], m[(1, 3)]);
    let two: T = num(2.0);
    let sign = if pt { -T::one() } else { T::one() };
    let delta = da + db + sign * two * dc;
    let det = m.clone().lu().determinant();
    let disc = (delta * delta - num::<T>(4.0) * det).max(T::zero());
    let nu_sq = ((delta - disc.sqrt()) / two).max(T::zero());
    nu_sq.sqrt()
}

/// Descending eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralData<T: Scalar> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<DVector<T>>,
}

impl<T: Scalar> SpectralData<T> {
    /// Max-entry error of sum_j lambda_j v_j v_j^T against `a`.
    pub fn reconstruction_error(&self, a: &DMatrix<T>) -> T {
        let d = a.nrows();
        let mut rec = DMatrix::zeros(d, d);
        for (l, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            rec += v * v.transpose() * *l;
        }
        max_abs_diff(&rec, a)
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
/// Each eigenvector has its first nonzero component forced positive; exact
/// ties in the eigenvalues are broken by lexicographic comparison of the
/// canonicalized eigenvectors.
pub fn spectrum<T: Scalar>(a: &DMatrix<T>) -> SpectralData<T> {
    let eig = a.clone().symmetric_eigen();
    let d = a.nrows();
    let mut pairs: Vec<(T, DVector<T>)> = (0..d)
        .map(|k| {
            let mut v: DVector<T> = eig.eigenvectors.column(k).into_owned();
            let thresh: T = num(1e-12);
            if let Some(first) = v.iter().position(|x| x.abs() > thresh) {
                if v[first] < T::zero() {
                    v = -v;
                }
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        lb.partial_cmp(la).unwrap().then_with(|| {
            for (x, y) in va.iter().zip(vb.iter()) {
                match x.partial_cmp(y).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    SpectralData {
        eigenvalues,
        eigenvectors,
    }
}
