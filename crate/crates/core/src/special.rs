//! The six-parameter family of special states whose Gaussian EOF
//! saturates the h0[SOF] bound, the associated de-cross-correlated noisy
//! state, and the separability window of the squeezed version.

use nalgebra::{DMatrix, Vector4};
use rand::Rng;

use crate::cov::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::scalar::{num, to_f64, Scalar};
use crate::transforms::{balanced_beam_splitter, diagonal_squeezed_state, two_mode_squeezer};

/// Parameters (r1, r2, lambda1, lambda2, alpha, theta) of the special
/// family. Validated at construction: squeezings nonnegative, noise
/// strengths ordered 0 <= lambda1 <= lambda2, |alpha| <= e^{-r1-r2}
/// (equality allowed, the separability window then degenerates to a
/// point), theta in [0, 2 pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialStateParams<T: Scalar> {
    r1: T,
    r2: T,
    lambda1: T,
    lambda2: T,
    alpha: T,
    theta: T,
}

impl<T: Scalar> SpecialStateParams<T> {
    pub fn new(r1: T, r2: T, lambda1: T, lambda2: T, alpha: T, theta: T) -> Result<Self> {
        for (name, v) in [
            ("r1", r1),
            ("r2", r2),
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("alpha", alpha),
            ("theta", theta),
        ] {
            if !to_f64(v).is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if r1 < T::zero() || r2 < T::zero() {
            return Err(Error::InvalidParams(
                "squeezing parameters must be nonnegative".into(),
            ));
        }
        if lambda1 < T::zero() || lambda2 < lambda1 {
            return Err(Error::InvalidParams(
                "noise strengths must satisfy 0 <= lambda1 <= lambda2".into(),
            ));
        }
        let bound = (-r1 - r2).exp();
        if alpha.abs() > bound + num(1e-12) {
            return Err(Error::InvalidParams(format!(
                "|alpha| = {} exceeds e^(-r1-r2) = {}",
                to_f64(alpha.abs()),
                to_f64(bound)
            )));
        }
        if theta < T::zero() || theta >= num(std::f64::consts::TAU) {
            return Err(Error::InvalidParams(
                "theta must lie in [0, 2 pi)".into(),
            ));
        }
        Ok(Self {
            r1,
            r2,
            lambda1,
            lambda2,
            alpha,
            theta,
        })
    }

    pub fn r1(&self) -> T {
        self.r1
    }

    pub fn r2(&self) -> T {
        self.r2
    }

    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Total squeezing r1 + r2, which is also the SOF of the state.
    pub fn total_squeezing(&self) -> T {
        self.r1 + self.r2
    }

    /// Random valid parameters, drawn strictly inside the alpha bound.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let r1: f64 = rng.random_range(0.05..1.0);
        let r2: f64 = rng.random_range(0.05..1.0);
        let l1 = rng.random_range(0.0..1.0);
        let l2 = l1 + rng.random_range(0.0..1.0);
        let alpha = rng.random_range(-1.0..1.0) * (-r1 - r2).exp() * 0.999;
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        Self {
            r1: num(r1),
            r2: num(r2),
            lambda1: num(l1),
            lambda2: num(l2),
            alpha: num(alpha),
            theta: num(theta),
        }
    }
}

/// The two orthogonal noise vectors; both have squared norm 1 + alpha^2.
pub fn phi_vectors<T: Scalar>(alpha: T, theta: T) -> (Vector4<T>, Vector4<T>) {
    let (s, c) = theta.sin_cos();
    let v1 = Vector4::new(alpha * c, s, c, alpha * s);
    let v2 = Vector4::new(alpha * s, -c, s, -alpha * c);
    (v1, v2)
}

fn inner_pi_d<T: Scalar>(p: &SpecialStateParams<T>) -> DMatrix<T> {
    diagonal_squeezed_state(p.r1, p.r2)
        .expect("validated parameters")
        .into_matrix()
}

fn sandwich_bs<T: Scalar>(inner: DMatrix<T>) -> CovarianceMatrix<T> {
    let kbs = balanced_beam_splitter::<T>();
    let m = kbs.matrix() * inner * kbs.matrix().transpose();
    let half: T = num(0.5);
    CovarianceMatrix::from_parts_unchecked(2, (&m + m.transpose()) * half)
}

/// The special state K_bs (pi_d + lambda1 phi1 + lambda2 phi2) K_bs^T.
pub fn make_special<T: Scalar>(p: &SpecialStateParams<T>) -> CovarianceMatrix<T> {
    let (v1, v2) = phi_vectors(p.alpha, p.theta);
    let mut inner = inner_pi_d(p);
    let o1 = v1 * v1.transpose() * p.lambda1;
    let o2 = v2 * v2.transpose() * p.lambda2;
    for i in 0..4 {
        for j in 0..4 {
            inner[(i, j)] += o1[(i, j)] + o2[(i, j)];
        }
    }
    sandwich_bs(inner)
}

/// The de-cross-correlated companion K_bs (pi_d + lambda2 (phi1 + phi2))
/// K_bs^T, obtained from the special state by topping up the weaker noise
/// direction.
pub fn make_dcc<T: Scalar>(p: &SpecialStateParams<T>) -> CovarianceMatrix<T> {
    let mut inner = inner_pi_d(p);
    let a = p.alpha;
    let l = p.lambda2;
    // phi1 + phi2 collapses to a theta-independent pattern
    inner[(0, 0)] += l * a * a;
    inner[(1, 1)] += l;
    inner[(2, 2)] += l;
    inner[(3, 3)] += l * a * a;
    inner[(0, 2)] += l * a;
    inner[(2, 0)] += l * a;
    inner[(1, 3)] += l * a;
    inner[(3, 1)] += l * a;
    sandwich_bs(inner)
}

/// The interval of two-mode squeezing strengths r for which
/// S2(r) sigma_dcc S2(r)^T is separable.
pub fn separability_window<T: Scalar>(p: &SpecialStateParams<T>) -> Result<(T, T)> {
    let r_lo = p.total_squeezing() * num(0.5);
    let l = p.lambda2;
    let a2 = p.alpha * p.alpha;
    let mut acc = T::zero();
    for r in [p.r1, p.r2] {
        let e = (r + r).exp();
        acc += ((l + e) / (T::one() + l * a2 * e)).ln();
    }
    let r_hi = acc * num(0.25);
    if r_hi < r_lo - num(1e-12) {
        return Err(Error::EmptyWindow {
            r_lo: to_f64(r_lo),
            r_hi: to_f64(r_hi),
        });
    }
    Ok((r_lo, r_hi))
}

/// Cross-checks the window against the PPT criterion on a grid over
/// [0, r_hi + 1/2]. Grid points within 1e-6 of a boundary are skipped.
pub fn verify_window_by_ppt<T: Scalar>(
    p: &SpecialStateParams<T>,
    grid_points: usize,
) -> Result<bool> {
    if grid_points < 3 {
        return Err(Error::InvalidParams(
            "grid_points must be at least 3".into(),
        ));
    }
    let (r_lo, r_hi) = separability_window(p)?;
    let sigma = make_dcc(p);
    let margin: T = num(1e-6);
    let top = r_hi + num(0.5);
    for i in 0..grid_points {
        let r = top * num::<T>(i as f64) / num(grid_points as f64 - 1.0);
        if (r - r_lo).abs() <= margin || (r - r_hi).abs() <= margin {
            continue;
        }
        let s2 = two_mode_squeezer(r)?;
        let squeezed = crate::transforms::apply(&s2, &sigma)?;
        let inside = r > r_lo && r < r_hi;
        if squeezed.is_separable()? != inside {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{gaussian_eof, h0, sof_mixed};
    use crate::transforms::apply;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(
        r1: f64,
        r2: f64,
        l1: f64,
        l2: f64,
        alpha: f64,
        theta: f64,
    ) -> SpecialStateParams<f64> {
        SpecialStateParams::new(r1, r2, l1, l2, alpha, theta).unwrap()
    }

    #[test]
    fn phi_vectors_at_origin() {
        let (v1, v2) = phi_vectors(0.0f64, 0.0);
        assert_eq!(v1, Vector4::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(v2, Vector4::new(0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn phi_vectors_orthogonal_with_common_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let alpha = rng.random_range(-1.0..1.0);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (v1, v2) = phi_vectors(alpha, theta);
            assert_abs_diff_eq!(v1.dot(&v2), 0.0, epsilon = 1e-12);
            let want = 1.0 + alpha * alpha;
            assert_abs_diff_eq!(v1.norm_squared(), want, epsilon = 1e-12);
            assert_abs_diff_eq!(v2.norm_squared(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(SpecialStateParams::new(-0.1f64, 0.3, 0.0, 0.5, 0.0, 0.0).is_err());
        assert!(SpecialStateParams::new(0.4f64, 0.3, 0.6, 0.5, 0.0, 0.0).is_err());
        assert!(SpecialStateParams::new(0.4f64, 0.3, 0.2, 0.5, 0.6, 0.0).is_err());
        assert!(SpecialStateParams::new(0.4f64, 0.3, 0.2, 0.5, 0.0, 7.0).is_err());
        // alpha exactly at the bound is allowed
        let bound = (-0.7f64).exp();
        assert!(SpecialStateParams::new(0.4f64, 0.3, 0.2, 0.5, bound, 0.0).is_ok());
    }

    #[test]
    fn noiseless_case_is_pure() {
        let p = params(0.4, 0.3, 0.0, 0.0, 0.3, 1.0);
        let sigma = make_special(&p);
        assert_abs_diff_eq!(sigma.det(), 1.0, epsilon = 1e-10);
        let pi = diagonal_squeezed_state(0.4f64, 0.3).unwrap();
        let want = apply(&balanced_beam_splitter(), &pi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    sigma.matrix()[(i, j)],
                    want.matrix()[(i, j)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn special_states_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = SpecialStateParams::<f64>::sample(&mut rng);
            assert!(make_special(&p).is_physical().unwrap());
            assert!(make_dcc(&p).is_physical().unwrap());
        }
    }

    #[test]
    fn dcc_equals_special_when_noise_balanced() {
        let p = params(0.4, 0.3, 0.5, 0.5, 0.2, 0.9);
        let a = make_special(&p);
        let b = make_dcc(&p);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(a.matrix()[(i, j)], b.matrix()[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dcc_inner_matrix_pattern() {
        let p = params(0.4, 0.3, 0.2, 0.5, 0.3, 1.0);
        let sigma = make_dcc(&p);
        let kbs = balanced_beam_splitter::<f64>();
        let inner = kbs.inverse().sandwich(sigma.matrix());
        let pi_d = diagonal_squeezed_state(0.4f64, 0.3).unwrap();
        let (l, a) = (0.5, 0.3);
        let mut want = pi_d.into_matrix();
        want[(0, 0)] += l * a * a;
        want[(1, 1)] += l;
        want[(2, 2)] += l;
        want[(3, 3)] += l * a * a;
        for (i, j) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
            want[(i, j)] += l * a;
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(inner[(i, j)], want[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn window_worked_example() {
        let p = params(0.4, 0.3, 0.2, 0.5, 0.3, 1.0);
        let (r_lo, r_hi) = separability_window(&p).unwrap();
        assert_abs_diff_eq!(r_lo, 0.35, epsilon = 1e-15);
        let want = 0.25
            * (((0.5 + (0.8f64).exp()) / (1.0 + 0.5 * 0.09 * (0.8f64).exp())).ln()
                + ((0.5 + (0.6f64).exp()) / (1.0 + 0.5 * 0.09 * (0.6f64).exp())).ln());
        assert_abs_diff_eq!(r_hi, want, epsilon = 1e-14);
        assert!(r_hi > r_lo);
    }

    #[test]
    fn window_collapses_without_noise_or_at_alpha_bound() {
        let p = params(0.4, 0.3, 0.0, 0.0, 0.3, 1.0);
        let (r_lo, r_hi) = separability_window(&p).unwrap();
        assert_abs_diff_eq!(r_hi, r_lo, epsilon = 1e-12);

        let bound = (-0.7f64).exp();
        let p = params(0.4, 0.3, 0.2, 0.5, bound, 1.0);
        let (r_lo, r_hi) = separability_window(&p).unwrap();
        assert_abs_diff_eq!(r_hi, r_lo, epsilon = 1e-9);
    }

    #[test]
    fn ppt_confirms_window() {
        let p = params(0.3, 0.3, 0.5, 0.5, 0.2, 0.7);
        assert!(verify_window_by_ppt(&p, 101).unwrap());
    }

    #[test]
    fn ppt_degenerate_window_pure_case() {
        let p = params(0.4, 0.3, 0.0, 0.0, 0.2, 0.7);
        assert!(verify_window_by_ppt(&p, 101).unwrap());
        // separable exactly at the collapse point
        let (r_lo, _) = separability_window(&p).unwrap();
        let s2 = two_mode_squeezer(r_lo).unwrap();
        let squeezed = apply(&s2, &make_dcc(&p)).unwrap();
        assert!(squeezed.is_separable().unwrap());
    }

    #[test]
    fn saturation_on_worked_example() {
        let p = params(0.4, 0.3, 0.2, 0.5, 0.3, 1.0);
        let sigma = make_special(&p);
        let sof = sof_mixed(&sigma, 3).unwrap();
        assert_abs_diff_eq!(sof.value, 0.7, epsilon = 1e-6);
        let eof = gaussian_eof(&sigma, 4).unwrap();
        assert_abs_diff_eq!(eof.value, h0(0.7f64).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn eof_chain_under_added_noise() {
        let p = params(0.5, 0.2, 0.1, 0.6, 0.25, 2.0);
        let e_sp = gaussian_eof(&make_special(&p), 5).unwrap().value;
        let e_dcc = gaussian_eof(&make_dcc(&p), 6).unwrap().value;
        let base = h0(p.total_squeezing()).unwrap();
        assert!(base <= e_dcc + 1e-6);
        assert!(e_dcc <= e_sp + 1e-6);
    }
}
