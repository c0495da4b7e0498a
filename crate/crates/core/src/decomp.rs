//! Standard decompositions: Williamson, Bloch-Messiah (Euler), polar, and
//! the rectangular decomposition of passive transformations.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::cov::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::scalar::{num, to_f64, Scalar};
use crate::symp::{symplectic_form_matrix, SymplecticMatrix};
use crate::tol::Tolerances;
use crate::transforms::TransformSpec;

/// sigma = S D S^T with S symplectic and D the thermal diagonal
/// (nu_1, nu_1, ..., nu_N, nu_N), nu ascending.
#[derive(Debug, Clone)]
pub struct WilliamsonResult<T: Scalar> {
    pub s: SymplecticMatrix<T>,
    /// Symplectic eigenvalues, ascending; D repeats each twice.
    pub nus: Vec<T>,
}

impl<T: Scalar> WilliamsonResult<T> {
    pub fn d_matrix(&self) -> DMatrix<T> {
        let n = self.nus.len();
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        for (j, &nu) in self.nus.iter().enumerate() {
            d[(2 * j, 2 * j)] = nu;
            d[(2 * j + 1, 2 * j + 1)] = nu;
        }
        d
    }

    /// The pure part S S^T, i.e. the state with the thermal noise removed.
    /// Always a feasible pure decomposition of sigma.
    pub fn pure_part(&self) -> CovarianceMatrix<T> {
        let m = self.s.matrix() * self.s.matrix().transpose();
        let half: T = num(0.5);
        let sym = (&m + m.transpose()) * half;
        CovarianceMatrix::from_parts_unchecked(self.s.n_modes(), sym)
    }
}

/// S = K1 Z K2 with K1, K2 passive and Z = (+)_j Diag(e^{-r_j}, e^{r_j}).
#[derive(Debug, Clone)]
pub struct BlochMessiahResult<T: Scalar> {
    pub k1: SymplecticMatrix<T>,
    pub k2: SymplecticMatrix<T>,
    /// Squeezing parameters, ascending, r_j >= 0.
    pub rs: Vec<T>,
}

impl<T: Scalar> BlochMessiahResult<T> {
    pub fn z_matrix(&self) -> DMatrix<T> {
        squeeze_diag(&self.rs, T::one())
    }
}

/// (+)_j Diag(e^{-scale r_j}, e^{scale r_j}).
fn squeeze_diag<T: Scalar>(rs: &[T], scale: T) -> DMatrix<T> {
    let n = rs.len();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    for (j, &r) in rs.iter().enumerate() {
        z[(2 * j, 2 * j)] = (-scale * r).exp();
        z[(2 * j + 1, 2 * j + 1)] = (scale * r).exp();
    }
    z
}

/// Canonical form of a real skew-symmetric matrix: returns orthogonal O and
/// positive values nu (ascending) with O^T A O = (+)_j nu_j [[0,1],[-1,0]].
fn skew_canonical<T: Scalar>(a: &DMatrix<T>) -> Result<(DMatrix<T>, Vec<T>)> {
    let d = a.nrows();
    let n = d / 2;
    // -A^2 is symmetric PSD with eigenvalues nu_j^2, each twice.
    let m = -(a * a);
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut o = DMatrix::zeros(d, d);
    let mut nus = Vec::with_capacity(n);
    let mut mode = 0usize;
    let mut k = 0usize;
    while k < d {
        // cluster eigenvalues that agree to relative 1e-8
        let base = eig.eigenvalues[idx[k]];
        let mut hi = k + 1;
        let ctol = num::<T>(1e-8) * (T::one() + base.abs());
        while hi < d && (eig.eigenvalues[idx[hi]] - base).abs() <= ctol {
            hi += 1;
        }
        let cluster: Vec<usize> = idx[k..hi].to_vec();
        if cluster.len() % 2 != 0 {
            return Err(Error::NonPositiveDefinite {
                min_eig: to_f64(base),
            });
        }
        let mut avg = T::zero();
        for &i in &cluster {
            avg += eig.eigenvalues[i];
        }
        avg /= num(cluster.len() as f64);
        let nu = avg.max(T::zero()).sqrt();
        if nu <= num(1e-12) {
            return Err(Error::NonPositiveDefinite { min_eig: to_f64(nu) });
        }

        // symplectic Gram-Schmidt inside the cluster eigenspace
        let basis: Vec<DVector<T>> = cluster
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let mut used: Vec<DVector<T>> = Vec::new();
        while used.len() < cluster.len() {
            // next direction not yet spanned
            let mut u = None;
            for cand in &basis {
                let mut w = cand.clone();
                for q in &used {
                    let c = q.dot(&w);
                    w -= q * c;
                }
                if w.norm() > num(1e-6) {
                    u = Some(w.normalize());
                    break;
                }
            }
            let u = u.ok_or(Error::NonPositiveDefinite {
                min_eig: to_f64(nu),
            })?;
            let v = (a * &u).unscale(nu).normalize();
            o.set_column(2 * mode, &v);
            o.set_column(2 * mode + 1, &u);
            nus.push(nu);
            used.push(u);
            used.push(v);
            mode += 1;
        }
        k = hi;
    }
    Ok((o, nus))
}

/// Williamson decomposition sigma = S D S^T, computed through the
/// skew-symmetric canonical form of sigma^{1/2} Omega sigma^{1/2}.
pub fn williamson<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<WilliamsonResult<T>> {
    let n = sigma.n_modes();
    let root = sigma.sqrt_matrix()?;
    let omega = symplectic_form_matrix::<T>(n);
    let a = &root * &omega * &root;
    let (o, nus) = skew_canonical(&a)?;
    let mut d_inv_sqrt = DMatrix::zeros(2 * n, 2 * n);
    for (j, &nu) in nus.iter().enumerate() {
        let v = nu.sqrt().recip();
        d_inv_sqrt[(2 * j, 2 * j)] = v;
        d_inv_sqrt[(2 * j + 1, 2 * j + 1)] = v;
    }
    let s = SymplecticMatrix::from_parts_unchecked(n, root * o * d_inv_sqrt);
    Ok(WilliamsonResult { s, nus })
}

/// Eigen-decomposition of a symmetric positive definite symplectic matrix
/// with an orthogonal *symplectic* eigenbasis: O^T P O = (+)_j
/// Diag(e^{-rho_j}, e^{rho_j}), rho ascending and nonnegative.
fn symplectic_spd_eigenbasis<T: Scalar>(p: &DMatrix<T>) -> Result<(DMatrix<T>, Vec<T>)> {
    let d = p.nrows();
    let n = d / 2;
    let omega = symplectic_form_matrix::<T>(n);
    let eig = p.clone().symmetric_eigen();

    let mut logs: Vec<(T, usize)> = Vec::with_capacity(d);
    for i in 0..d {
        let l = eig.eigenvalues[i];
        if l <= num(1e-12) {
            return Err(Error::NonPositiveDefinite { min_eig: to_f64(l) });
        }
        logs.push((l.ln(), i));
    }
    let ztol: T = num(1e-10);

    let mut o = DMatrix::zeros(d, d);
    let mut rhos: Vec<T> = Vec::with_capacity(n);
    let mut mode = 0usize;

    // modes with rho ~ 0: the eigenspace is Omega-invariant, pair (u, -Omega u)
    let near_unit: Vec<usize> = logs
        .iter()
        .filter(|(l, _)| l.abs() <= ztol)
        .map(|&(_, i)| i)
        .collect();
    if near_unit.len() % 2 != 0 {
        return Err(Error::NotSymplectic { defect: f64::NAN });
    }
    {
        let mut used: Vec<DVector<T>> = Vec::new();
        for &i in &near_unit {
            if used.len() >= near_unit.len() {
                break;
            }
            let mut w: DVector<T> = eig.eigenvectors.column(i).into_owned();
            for q in &used {
                let c = q.dot(&w);
                w -= q * c;
            }
            if w.norm() <= num(1e-6) {
                continue;
            }
            let u = w.normalize();
            let b = -(&omega * &u);
            o.set_column(2 * mode, &u);
            o.set_column(2 * mode + 1, &b);
            rhos.push(T::zero());
            used.push(u);
            used.push(b);
            mode += 1;
        }
        if 2 * mode != near_unit.len() {
            return Err(Error::NotSymplectic { defect: f64::NAN });
        }
    }

    // positive side: each eigenvector b at e^{rho} pairs with Omega b at e^{-rho}
    let mut pos: Vec<(T, usize)> = logs.iter().filter(|(l, _)| *l > ztol).copied().collect();
    pos.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for (rho, i) in pos {
        let mut b: DVector<T> = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = b.iter().position(|x| x.abs() > num(1e-12)) {
            if b[first] < T::zero() {
                b = -b;
            }
        }
        let a_col = &omega * &b;
        o.set_column(2 * mode, &a_col);
        o.set_column(2 * mode + 1, &b);
        rhos.push(rho);
        mode += 1;
    }
    if mode != n {
        return Err(Error::NotSymplectic { defect: f64::NAN });
    }
    Ok((o, rhos))
}

/// Symmetric square root of an SPD matrix.
fn spd_sqrt<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = m.clone().symmetric_eigen();
    for &l in eig.eigenvalues.iter() {
        if l <= num(1e-12) {
            return Err(Error::NonPositiveDefinite { min_eig: to_f64(l) });
        }
    }
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| l.sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Polar decomposition S = K P with K passive and P = (S^T S)^{1/2}
/// symmetric positive definite symplectic. Unique.
pub fn polar<T: Scalar>(s: &SymplecticMatrix<T>) -> Result<(SymplecticMatrix<T>, SymplecticMatrix<T>)> {
    let n = s.n_modes();
    let p = spd_sqrt(&(s.matrix().transpose() * s.matrix()))?;
    let p_mat = SymplecticMatrix::from_parts_unchecked(n, p.clone());
    let k = SymplecticMatrix::from_parts_unchecked(n, s.matrix() * p_mat.inverse().matrix());
    Ok((k, p_mat))
}

/// Bloch-Messiah (Euler) decomposition S = K1 Z K2.
pub fn bloch_messiah<T: Scalar>(s: &SymplecticMatrix<T>) -> Result<BlochMessiahResult<T>> {
    let tol = Tolerances::<T>::default();
    let defect = s.symplectic_defect();
    if defect > num::<T>(10.0) * tol.symplectic {
        return Err(Error::NotSymplectic {
            defect: to_f64(defect),
        });
    }
    let n = s.n_modes();
    let (k, p) = polar(s)?;
    let (o, rhos) = symplectic_spd_eigenbasis(p.matrix())?;
    // P = O Z O^T, so S = K P = (K O) Z (O^T)
    let k1 = SymplecticMatrix::from_parts_unchecked(n, k.matrix() * &o);
    let k2 = SymplecticMatrix::from_parts_unchecked(n, o.transpose());
    Ok(BlochMessiahResult { k1, k2, rs: rhos })
}

/// Passively diagonalizes a pure state: returns (K, pi_diag) with
/// K pi K^T = pi_diag diagonal. For two modes the diagonal follows the
/// pi_d(r1, r2) orientation Diag(e^{-2 r1}, e^{2 r1}, e^{2 r2}, e^{-2 r2})
/// with r ascending, so a balanced beam splitter on pi_diag entangles the
/// modes rather than cancelling them.
pub fn diagonalize_pure<T: Scalar>(
    pi: &CovarianceMatrix<T>,
) -> Result<(SymplecticMatrix<T>, CovarianceMatrix<T>)> {
    let tol = Tolerances::<T>::default();
    let det = pi.det();
    if (det - T::one()).abs() > tol.pure_det {
        return Err(Error::NotPure { det: to_f64(det) });
    }
    let n = pi.n_modes();
    // a pure covariance matrix is itself SPD symplectic
    let (o, rhos) = symplectic_spd_eigenbasis(pi.matrix())?;
    let mut k = o.transpose();
    // flip the second mode's block so the two-mode pattern is pi_d
    if n == 2 {
        // rotation by pi/2 on mode 1 swaps its diagonal entries
        let mut flip = DMatrix::identity(2 * n, 2 * n);
        flip[(2, 2)] = T::zero();
        flip[(3, 3)] = T::zero();
        flip[(2, 3)] = T::one();
        flip[(3, 2)] = -T::one();
        k = flip * k;
    }
    let rs: Vec<T> = rhos.iter().map(|&r| r * num(0.5)).collect();
    let mut diag = DMatrix::zeros(2 * n, 2 * n);
    for (j, &r) in rs.iter().enumerate() {
        let (lo, hi) = ((-r * num::<T>(2.0)).exp(), (r * num::<T>(2.0)).exp());
        if n == 2 && j == 1 {
            diag[(2 * j, 2 * j)] = hi;
            diag[(2 * j + 1, 2 * j + 1)] = lo;
        } else {
            diag[(2 * j, 2 * j)] = lo;
            diag[(2 * j + 1, 2 * j + 1)] = hi;
        }
    }
    Ok((
        SymplecticMatrix::from_parts_unchecked(n, k),
        CovarianceMatrix::from_parts_unchecked(n, diag),
    ))
}

/// Squeezing parameters of the diagonal form of a pure state, ascending.
pub fn pure_squeezings<T: Scalar>(pi: &CovarianceMatrix<T>) -> Result<Vec<T>> {
    let (_, diag) = diagonalize_pure(pi)?;
    let n = pi.n_modes();
    Ok((0..n)
        .map(|j| {
            let a = diag.matrix()[(2 * j, 2 * j)];
            let b = diag.matrix()[(2 * j + 1, 2 * j + 1)];
            (a.max(b)).ln() * num(0.5)
        })
        .collect())
}

/// Complex N x N unitary corresponding to a passive transformation.
fn passive_to_unitary<T: Scalar>(k: &SymplecticMatrix<T>) -> DMatrix<Complex<T>> {
    let n = k.n_modes();
    let m = k.matrix();
    DMatrix::from_fn(n, n, |j, l| Complex::new(m[(2 * j, 2 * l)], -m[(2 * j, 2 * l + 1)]))
}

/// Decomposes a passive transformation into beam splitters and phase
/// rotations (Reck-style triangular elimination on the complex unitary).
/// The returned list composes right-to-left, first element applied first.
pub fn rectangular<T: Scalar>(k: &SymplecticMatrix<T>) -> Result<Vec<TransformSpec<T>>> {
    let tol = Tolerances::<T>::default();
    let pd = k.passivity_defect();
    if pd > num::<T>(10.0) * tol.passive {
        return Err(Error::NotPassive { defect: to_f64(pd) });
    }
    let sd = k.symplectic_defect();
    if sd > num::<T>(10.0) * tol.symplectic {
        return Err(Error::NotSymplectic { defect: to_f64(sd) });
    }

    let n = k.n_modes();
    let mut u = passive_to_unitary(k);
    let two_pi: T = num(std::f64::consts::TAU);
    let wrap = |mut a: T| {
        while a < T::zero() {
            a += two_pi;
        }
        while a >= two_pi {
            a -= two_pi;
        }
        a
    };
    let eps: T = num(1e-13);

    // eliminations, recorded as (phi on mode r-1, tau on (r-1, r))
    let mut elims: Vec<(usize, T, T)> = Vec::new();
    for c in 0..n {
        for r in (c + 1..n).rev() {
            let lower = u[(r, c)];
            if lower.modulus() <= eps {
                continue;
            }
            let upper = u[(r - 1, c)];
            let phi = upper.argument() - lower.argument();
            let omega = lower.modulus().atan2(upper.modulus());
            let (co, si) = (omega.cos(), omega.sin());
            let phase = Complex::new(phi.cos(), -phi.sin()); // e^{-i phi}
            // row r-1 *= e^{-i phi}; then mix rows (r-1, r)
            for col in 0..n {
                let a = u[(r - 1, col)] * phase;
                let b = u[(r, col)];
                u[(r - 1, col)] = a * Complex::from_real(co) + b * Complex::from_real(si);
                u[(r, col)] = -a * Complex::from_real(si) + b * Complex::from_real(co);
            }
            elims.push((r, phi, co * co));
        }
    }

    // remaining diagonal of phases e^{-i delta_m}
    let mut specs: Vec<TransformSpec<T>> = Vec::new();
    for m in 0..n {
        let delta = -u[(m, m)].argument();
        if wrap(delta).abs() > eps && (wrap(delta) - two_pi).abs() > eps {
            specs.push(TransformSpec::Rotation {
                theta: wrap(delta),
                mode: m,
            });
        }
    }
    // inverted eliminations in reverse order: BS with swapped mode pair,
    // then the phase undone
    for &(r, phi, tau) in elims.iter().rev() {
        if (tau - T::one()).abs() > eps {
            specs.push(TransformSpec::BeamSplitter {
                tau,
                modes: (r, r - 1),
            });
        }
        let back = wrap(-phi);
        if back.abs() > eps && (back - two_pi).abs() > eps {
            specs.push(TransformSpec::Rotation {
                theta: back,
                mode: r - 1,
            });
        }
    }
    Ok(specs)
}
