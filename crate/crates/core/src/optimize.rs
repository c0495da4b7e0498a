//! Internal constrained optimizer for the pure-state minimizations.
//!
//! Both resource optimizations minimize a function of a pure two-mode
//! state pi subject to sigma - pi >= 0. Pure states are parametrized so
//! that det pi = 1 holds by construction: pi = K1 Z^2 K1^T with K1 an
//! arbitrary passive transformation (two local phases, a beam-splitter
//! angle, two more local phases) and Z the local squeezing diagonal.
//! Squeezing magnitudes enter as r_j = a_j^2, which keeps them
//! nonnegative without bound constraints and makes the SOF objective the
//! smooth polynomial a_1^2 + a_2^2.
//!
//! The PSD constraint is handled by an augmented Lagrangian on the
//! minimum eigenvalue of sigma - pi, with the penalty weight scaled by 10
//! per stage; each stage runs a BFGS inner solve with central-difference
//! gradients. Multi-start from the Williamson pure part plus perturbed
//! and random seeds; deterministic given the input seed.

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::cov::CovarianceMatrix;
use crate::decomp::{diagonalize_pure, williamson};
use crate::error::{Error, Result};
use crate::scalar::{num, to_f64, Scalar};
use crate::symp::SymplecticMatrix;
use crate::transforms::rotation;

pub(crate) type Params<T> = SVector<T, 7>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    /// Total squeezing r1 + r2 of the pure state.
    Sof,
    /// Entanglement entropy of the pure state.
    Eof,
}

/// Effort knobs for one minimization.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    pub restarts: usize,
    pub stages: usize,
    pub inner_iters: usize,
    /// Stop after this many consecutive restarts without improvement
    /// (once a feasible optimum exists and a minimum of 6 restarts ran).
    pub early_stop: usize,
}

impl Budget {
    pub const FULL: Budget = Budget {
        restarts: 16,
        stages: 9,
        inner_iters: 120,
        early_stop: 8,
    };
    /// Escalation setting used before declaring a conjecture gap.
    pub const RETRY: Budget = Budget {
        restarts: 64,
        stages: 10,
        inner_iters: 150,
        early_stop: 64,
    };
}

#[derive(Debug, Clone)]
pub(crate) struct PureOpt<T: Scalar> {
    pub pi: Matrix4<T>,
    pub value: T,
    /// Minimum eigenvalue of sigma - pi at the optimum.
    pub feasibility: T,
    pub iterations: usize,
    pub restarts_used: usize,
    /// Agreement between the best and runner-up feasible restarts.
    pub achieved_tol: T,
}

fn rot2<T: Scalar>(theta: T) -> Matrix2<T> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn local_pair<T: Scalar>(a: T, b: T) -> Matrix4<T> {
    let ra = rot2(a);
    let rb = rot2(b);
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&ra);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&rb);
    m
}

fn mixer4<T: Scalar>(omega: T) -> Matrix4<T> {
    let (s, c) = omega.sin_cos();
    let mut m = Matrix4::zeros();
    for q in 0..2 {
        m[(q, q)] = c;
        m[(q, 2 + q)] = s;
        m[(2 + q, q)] = -s;
        m[(2 + q, 2 + q)] = c;
    }
    m
}

/// Pure covariance matrix from the 7 parameters
/// (phi_a, phi_b, omega, phi_c, phi_d, a1, a2).
pub(crate) fn pure_from_params<T: Scalar>(p: &Params<T>) -> Matrix4<T> {
    let k1 = local_pair(p[0], p[1]) * mixer4(p[2]) * local_pair(p[3], p[4]);
    let two: T = num(2.0);
    let r1 = p[5] * p[5];
    let r2 = p[6] * p[6];
    let z2 = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        (-two * r1).exp(),
        (two * r1).exp(),
        (-two * r2).exp(),
        (two * r2).exp(),
    ));
    let pi = k1 * z2 * k1.transpose();
    let half: T = num(0.5);
    (pi + pi.transpose()) * half
}

/// Smallest symplectic eigenvalue of the partial transpose, closed form.
pub(crate) fn pt_nu_min4<T: Scalar>(m: &Matrix4<T>) -> T {
    let det_a = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let det_b = m[(2, 2)] * m[(3, 3)] - m[(2, 3)] * m[(3, 2)];
    let det_c = m[(0, 2)] * m[(1, 3)] - m[(0, 3)] * m[(1, 2)];
    let two: T = num(2.0);
    let delta = det_a + det_b - two * det_c;
    let det = m.determinant();
    let disc = (delta * delta - num::<T>(4.0) * det).max(T::zero());
    let nu2 = ((delta - disc.sqrt()) / two).max(T::zero());
    nu2.sqrt()
}

struct Problem<T: Scalar> {
    sigma: Matrix4<T>,
    obj: Objective,
}

impl<T: Scalar> Problem<T> {
    fn f(&self, p: &Params<T>) -> T {
        match self.obj {
            Objective::Sof => p[5] * p[5] + p[6] * p[6],
            Objective::Eof => {
                let pi = pure_from_params(p);
                let nu = pt_nu_min4(&pi);
                if nu >= T::one() - num(1e-12) {
                    T::zero()
                } else {
                    crate::resources::h_impl(nu.max(num(1e-12)))
                }
            }
        }
    }

    /// Constraint value, min eigenvalue of sigma - pi; feasible iff >= 0.
    fn g(&self, p: &Params<T>) -> T {
        let d = self.sigma - pure_from_params(p);
        let eig = d.symmetric_eigen();
        let mut lo = eig.eigenvalues[0];
        for &l in eig.eigenvalues.iter().skip(1) {
            if l < lo {
                lo = l;
            }
        }
        lo
    }

    /// Semidefinite augmented Lagrangian with a PSD matrix multiplier;
    /// smooth in p even when the contact eigenvalue is degenerate.
    fn augmented(&self, p: &Params<T>, lam: &Matrix4<T>, mu: T) -> T {
        let a = lam - (self.sigma - pure_from_params(p)) * mu;
        let eig = a.symmetric_eigen();
        let mut pos2 = T::zero();
        for &l in eig.eigenvalues.iter() {
            if l > T::zero() {
                pos2 += l * l;
            }
        }
        let half: T = num(0.5);
        self.f(p) + (pos2 - lam.norm_squared()) / mu * half
    }

    /// Multiplier update: projection of lam - mu (sigma - pi) onto the
    /// PSD cone.
    fn next_multiplier(&self, p: &Params<T>, lam: &Matrix4<T>, mu: T) -> Matrix4<T> {
        let a = lam - (self.sigma - pure_from_params(p)) * mu;
        let eig = a.symmetric_eigen();
        let mut out = Matrix4::zeros();
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > T::zero() {
                let v = eig.eigenvectors.column(i);
                out += (v * v.transpose()) * l;
            }
        }
        out
    }
}

fn gradient<T: Scalar, F: Fn(&Params<T>) -> T>(f: &F, x: &Params<T>) -> Params<T> {
    let mut g = Params::zeros();
    let base: T = num(1e-6);
    for i in 0..7 {
        let h = base * (T::one() + x[i].abs());
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (h + h);
    }
    g
}

/// BFGS with backtracking Armijo line search on the inverse Hessian form.
fn bfgs<T: Scalar, F: Fn(&Params<T>) -> T>(
    f: &F,
    x0: Params<T>,
    max_iter: usize,
    gtol: T,
) -> (Params<T>, T, usize) {
    let eye = SMatrix::<T, 7, 7>::identity();
    let mut h = eye;
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = gradient(f, &x);
    let c1: T = num(1e-4);
    let mut it = 0usize;
    while it < max_iter {
        it += 1;
        if g.amax() <= gtol {
            break;
        }
        let mut d = -(h * g);
        let mut gd = g.dot(&d);
        if gd >= -num::<T>(1e-16) {
            h = eye;
            d = -g;
            gd = -g.norm_squared();
            if gd >= -num::<T>(1e-18) {
                break;
            }
        }
        let mut t = T::one();
        let mut fx_new = fx;
        let mut ok = false;
        for _ in 0..40 {
            fx_new = f(&(x + d * t));
            if fx_new <= fx + c1 * t * gd {
                ok = true;
                break;
            }
            t *= num(0.5);
        }
        if !ok {
            break;
        }
        let x_new = x + d * t;
        let g_new = gradient(f, &x_new);
        let s = x_new - x;
        let y = g_new - g;
        let sy = s.dot(&y);
        if sy > num::<T>(1e-12) * s.norm() * y.norm() {
            let rho = sy.recip();
            let a = eye - (s * y.transpose()) * rho;
            h = a * h * a.transpose() + (s * s.transpose()) * rho;
        } else {
            h = eye;
        }
        let step = (s.amax()).abs();
        x = x_new;
        fx = fx_new;
        g = g_new;
        if step < num(1e-13) {
            break;
        }
    }
    (x, fx, it)
}

/// One augmented Lagrangian solve from a single start point.
fn solve_from<T: Scalar>(
    prob: &Problem<T>,
    p0: Params<T>,
    budget: &Budget,
) -> (Params<T>, T, T, usize) {
    let mut p = p0;
    let mut lam = Matrix4::<T>::zeros();
    // the penalty weight is capped well below the point where it would
    // swamp the central-difference gradients; past the cap the multiplier
    // updates alone drive the infeasibility to zero
    let mut mu: T = num(10.0);
    let mu_cap: T = num(1e5);
    let mut iters = 0usize;
    for stage in 0..budget.stages {
        let gtol: T = num((1e-6 * 0.1f64.powi(stage as i32)).max(1e-9));
        let al = |q: &Params<T>| prob.augmented(q, &lam, mu);
        let (pn, _, it) = bfgs(&al, p, budget.inner_iters, gtol);
        p = pn;
        iters += it;
        let g = prob.g(&p);
        let new_lam = prob.next_multiplier(&p, &lam, mu);
        let settled = (new_lam - lam).amax() <= num::<T>(1e-9) * (T::one() + lam.amax());
        lam = new_lam;
        mu = (mu * num(10.0)).min(mu_cap);
        if g >= -num::<T>(1e-11) && settled {
            break;
        }
    }
    // feasibility restoration: the AL iterate can stall a hair on the
    // infeasible side; walk it back onto the feasible set, which costs
    // only the objective increase the overshoot bought
    if prob.g(&p) < -num::<T>(1e-10) {
        let delta: T = num(1e-11);
        let restore = |q: &Params<T>| {
            let r = (delta - prob.g(q)).max(T::zero());
            r * r
        };
        let (pp, _, it) = bfgs(&restore, p, 80, num(1e-15));
        iters += it;
        if prob.g(&pp) > prob.g(&p) {
            p = pp;
        }
    }
    let fv = prob.f(&p);
    let gv = prob.g(&p);
    (p, fv, gv, iters)
}

/// Angles (phi_a, phi_b, omega, phi_c, phi_d = 0) reproducing a two-mode
/// passive transformation in the K1 factorization used by
/// [`pure_from_params`].
pub(crate) fn passive_to_angles<T: Scalar>(k: &SymplecticMatrix<T>) -> [T; 5] {
    let m = k.matrix();
    let re = |j: usize, l: usize| m[(2 * j, 2 * l)];
    let im = |j: usize, l: usize| -m[(2 * j, 2 * l + 1)];
    let arg = |j: usize, l: usize| im(j, l).atan2(re(j, l));
    let mag = |j: usize, l: usize| (re(j, l) * re(j, l) + im(j, l) * im(j, l)).sqrt();
    let eps: T = num(1e-9);
    let omega = mag(0, 1).atan2(mag(0, 0));
    let (s, c) = omega.sin_cos();
    let phi_a;
    let phi_b;
    let phi_c;
    if s <= eps {
        phi_a = -arg(0, 0);
        phi_c = T::zero();
        phi_b = -arg(1, 1);
    } else if c <= eps {
        phi_a = -arg(0, 1);
        phi_c = T::zero();
        phi_b = num::<T>(std::f64::consts::PI) - arg(1, 0);
    } else {
        phi_a = -arg(0, 1);
        phi_c = -arg(0, 0) - phi_a;
        phi_b = -arg(1, 1);
    }
    [phi_a, phi_b, omega, phi_c, T::zero()]
}

/// Smallest eigenvalue of sigma - pi(p); the witness is feasible iff
/// this is nonnegative.
pub(crate) fn witness_feasibility<T: Scalar>(sigma4: &Matrix4<T>, p: &Params<T>) -> T {
    let d = sigma4 - pure_from_params(p);
    let eig = d.symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    for &l in eig.eigenvalues.iter().skip(1) {
        if l < lo {
            lo = l;
        }
    }
    lo
}

/// Derivative-free Nelder-Mead simplex descent; suited to objectives
/// with kinks (like a max of absolute values) where BFGS stalls.
pub(crate) fn nelder_mead<T: Scalar, F: FnMut(&Params<T>) -> T>(
    mut f: F,
    x0: Params<T>,
    scale: T,
    max_iter: usize,
    ftol: T,
) -> (Params<T>, T) {
    let n = 7usize;
    let mut simplex: Vec<(T, Params<T>)> = Vec::with_capacity(n + 1);
    simplex.push((f(&x0), x0));
    for i in 0..n {
        let mut x = x0;
        x[i] += scale;
        simplex.push((f(&x), x));
    }
    let half: T = num(0.5);
    let two: T = num(2.0);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if (simplex[n].0 - simplex[0].0).abs() <= ftol {
            break;
        }
        let mut centroid = Params::zeros();
        for s in simplex.iter().take(n) {
            centroid += s.1;
        }
        centroid /= num::<T>(n as f64);
        let worst = simplex[n];
        let xr = centroid + (centroid - worst.1);
        let fr = f(&xr);
        if fr < simplex[0].0 {
            let xe = centroid + (centroid - worst.1) * two;
            let fe = f(&xe);
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            let xc = centroid + (worst.1 - centroid) * half;
            let fc = f(&xc);
            if fc < worst.0 {
                simplex[n] = (fc, xc);
            } else {
                let best = simplex[0].1;
                for s in simplex.iter_mut().skip(1) {
                    let x = best + (s.1 - best) * half;
                    *s = (f(&x), x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (fx, x) = simplex[0];
    (x, fx)
}

/// Start point derived from the Williamson pure part of sigma. For a
/// pure input this recovers parameters that reproduce it exactly, so it
/// doubles as a parameter extractor for witness states.
pub(crate) fn williamson_seed<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<Params<T>> {
    let w = williamson(sigma)?;
    let pure0 = w.pure_part();
    let (kd, diag) = diagonalize_pure(&pure0)?;
    // diag follows the pi_d orientation; one quarter rotation on mode 1
    // turns it into the aligned Z^2 pattern of pure_from_params
    let quarter = rotation(num::<T>(std::f64::consts::FRAC_PI_2), 1, 2)?;
    let k1 = &kd.inverse() * &quarter.inverse();
    let ang = passive_to_angles(&k1);
    let r1 = diag.matrix()[(1, 1)].ln() * num::<T>(0.5);
    let r2 = diag.matrix()[(2, 2)].ln() * num::<T>(0.5);
    Ok(Params::from_column_slice(&[
        ang[0],
        ang[1],
        ang[2],
        ang[3],
        ang[4],
        r1.max(T::zero()).sqrt(),
        r2.max(T::zero()).sqrt(),
    ]))
}

/// Coarse deterministic scan over the witness parametrization. Random
/// multistart reliably funnels into a dominant attractor on states whose
/// optimal witness has a doubly degenerate contact with sigma (rank-2
/// residual noise); a grid over the passive angles and squeezings always
/// lands at least one start inside the narrow global basin, which the
/// local solver then finishes.
fn grid_starts<T: Scalar>(prob: &Problem<T>, keep: usize) -> Vec<Params<T>> {
    if keep == 0 {
        return Vec::new();
    }
    let eig = prob.sigma.symmetric_eigen();
    let mut lmax = eig.eigenvalues[0];
    for &l in eig.eigenvalues.iter().skip(1) {
        if l > lmax {
            lmax = l;
        }
    }
    let half: T = num(0.5);
    // no feasible witness can squeeze harder than sigma's widest axis
    let r_cap = (lmax.ln() * half).max(num(0.1)) + num(0.1);
    let n_ang = 6usize;
    let n_sq = 7usize;
    let step: T = num(std::f64::consts::PI / n_ang as f64);
    let mut cands: Vec<(T, Params<T>)> = Vec::with_capacity(n_ang.pow(4) * n_sq * n_sq);
    let mut angles = [T::zero(); 4];
    for ia in 0..n_ang {
        angles[0] = step * num(ia as f64);
        for ib in 0..n_ang {
            angles[1] = step * num(ib as f64);
            for iw in 0..n_ang {
                angles[2] = step * num(iw as f64);
                for ic in 0..n_ang {
                    angles[3] = step * num(ic as f64);
                    let k1 = local_pair(angles[0], angles[1])
                        * mixer4(angles[2])
                        * local_pair(angles[3], T::zero());
                    for j1 in 0..n_sq {
                        let r1 = r_cap * num(j1 as f64) / num((n_sq - 1) as f64);
                        for j2 in 0..n_sq {
                            let r2 = r_cap * num(j2 as f64) / num((n_sq - 1) as f64);
                            let two: T = num(2.0);
                            let z2 = Matrix4::from_diagonal(&nalgebra::Vector4::new(
                                (-two * r1).exp(),
                                (two * r1).exp(),
                                (-two * r2).exp(),
                                (two * r2).exp(),
                            ));
                            let pi = k1 * z2 * k1.transpose();
                            let f = match prob.obj {
                                Objective::Sof => r1 + r2,
                                Objective::Eof => {
                                    let nu = pt_nu_min4(&pi);
                                    if nu >= T::one() - num(1e-12) {
                                        T::zero()
                                    } else {
                                        crate::resources::h_impl(nu.max(num(1e-12)))
                                    }
                                }
                            };
                            let d = prob.sigma - pi;
                            let deig = d.symmetric_eigen();
                            let mut g = deig.eigenvalues[0];
                            for &l in deig.eigenvalues.iter().skip(1) {
                                if l < g {
                                    g = l;
                                }
                            }
                            let val = f + num::<T>(1e4) * (-g).max(T::zero());
                            let p = Params::from_column_slice(&[
                                angles[0],
                                angles[1],
                                angles[2],
                                angles[3],
                                T::zero(),
                                r1.sqrt(),
                                r2.sqrt(),
                            ]);
                            cands.push((val, p));
                        }
                    }
                }
            }
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // greedy spacing keeps the retained starts in distinct basins instead
    // of clustering around the single best grid node
    let min_sep: T = num(0.3);
    let mut out: Vec<Params<T>> = Vec::with_capacity(keep);
    for (_, p) in cands {
        let far = out.iter().all(|q| (p - q).amax() >= min_sep);
        if far {
            out.push(p);
            if out.len() == keep {
                break;
            }
        }
    }
    out
}

/// Minimizes the objective over pure pi with sigma - pi >= 0.
pub(crate) fn minimize_pure<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    obj: Objective,
    seed: u64,
    budget: &Budget,
) -> Result<PureOpt<T>> {
    if sigma.n_modes() != 2 {
        return Err(Error::WrongModeCount {
            expected: 2,
            got: sigma.n_modes(),
        });
    }
    let sigma4 = Matrix4::from_fn(|i, j| sigma.matrix()[(i, j)]);
    let prob = Problem { sigma: sigma4, obj };
    let p0 = williamson_seed(sigma)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let feas_tol: T = num(1e-9);
    let mut best: Option<(T, Params<T>)> = None;
    let mut runner_up: Option<T> = None;
    let mut best_infeas = f64::INFINITY;
    let mut iterations = 0usize;
    let mut restarts_used = 0usize;
    let mut since_improve = 0usize;

    let grid = grid_starts(&prob, 6.min(budget.restarts.saturating_sub(1)));
    for i in 0..budget.restarts {
        let start = if i == 0 {
            p0
        } else if i <= grid.len() {
            grid[i - 1]
        } else if i % 4 == 3 {
            let tau = std::f64::consts::TAU;
            Params::from_fn(|k, _| {
                if k < 5 {
                    num(rng.random_range(0.0..tau))
                } else {
                    num(rng.random_range(0.0..1.5))
                }
            })
        } else {
            let scale = 0.1 + 0.5 * (i as f64) / (budget.restarts as f64);
            p0 + Params::from_fn(|_, _| num(rng.random_range(-scale..scale)))
        };
        let (p, fv, gv, it) = solve_from(&prob, start, budget);
        iterations += it;
        restarts_used = i + 1;
        // a feasible start point is itself a candidate; for (near-)pure
        // sigma the Williamson seed is already the optimum
        let start_g = prob.g(&start);
        let start_f = prob.f(&start);
        let (p, fv, gv) = if start_g >= -feas_tol && (gv < -feas_tol || start_f < fv) {
            (start, start_f, start_g)
        } else {
            (p, fv, gv)
        };
        if gv >= -feas_tol {
            match best {
                Some((bv, _)) if fv >= bv - num(1e-12) => {
                    let gap = (fv - bv).abs();
                    if runner_up.map_or(true, |r| gap < r) {
                        runner_up = Some(gap);
                    }
                    since_improve += 1;
                }
                _ => {
                    if let Some((bv, _)) = best {
                        runner_up = Some((bv - fv).abs());
                    }
                    best = Some((fv, p));
                    since_improve = 0;
                }
            }
        } else {
            best_infeas = best_infeas.min(to_f64(-gv));
            since_improve += 1;
        }
        if best.is_some() && restarts_used >= 6.min(budget.restarts) && since_improve >= budget.early_stop
        {
            break;
        }
    }

    match best {
        Some((value, p)) => Ok(PureOpt {
            pi: pure_from_params(&p),
            value,
            feasibility: prob.g(&p),
            iterations,
            restarts_used,
            achieved_tol: runner_up.unwrap_or_else(T::zero),
        }),
        None => Err(Error::OptimizerFailed {
            restarts: restarts_used,
            best_infeasibility: best_infeas,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{
        balanced_beam_splitter, beam_splitter, compose, diagonal_squeezed_state, rotation, tmsv,
    };
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    #[ignore]
    fn probe_attractor() {
        use crate::harness::{random_passive, random_state, GeneratorConfig};
        let cfg = GeneratorConfig::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        let mut sigma = None;
        for i in 0..=76u64 {
            let s = random_state(&cfg, &mut rng).unwrap();
            let _k = random_passive(2, &mut rng).unwrap();
            if i == 76 {
                sigma = Some(s);
            }
        }
        let sigma = sigma.unwrap();
        let mut good: Option<Params<f64>> = None;
        for seed in 0..12u64 {
            let opt = minimize_pure(&sigma, Objective::Sof, seed, &Budget::FULL).unwrap();
            println!("seed {seed}: value {:.9} feas {:.3e}", opt.value, opt.feasibility);
            if opt.value < 0.5 && good.is_none() {
                let pi = crate::cov::CovarianceMatrix::from_parts_unchecked(
                    2,
                    nalgebra::DMatrix::from_fn(4, 4, |i, j| opt.pi[(i, j)]),
                );
                good = Some(williamson_seed(&pi).unwrap());
            }
        }
        let p_good = good.expect("at least one run found the low value");
        let sigma4 = Matrix4::from_fn(|i, j| sigma.matrix()[(i, j)]);
        let prob = Problem { sigma: sigma4, obj: Objective::Sof };
        println!(
            "good start: f {:.9} g {:.3e}",
            prob.f(&p_good),
            prob.g(&p_good)
        );
        let (p, fv, gv, _) = solve_from(&prob, p_good, &Budget::FULL);
        println!("after solve_from: f {fv:.9} g {gv:.3e}");
        let d = sigma4 - pure_from_params(&p);
        let eig = d.symmetric_eigen();
        let mut evs: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("contact eigenvalues: {evs:?}");
        // where do the grid starts sit?
        let grid = grid_starts(&prob, 6);
        for (k, s) in grid.iter().enumerate() {
            let (_, fv, gv, _) = solve_from(&prob, *s, &Budget::FULL);
            println!(
                "grid {k}: start f {:.6} g {:.3e} -> f {fv:.9} g {gv:.3e}",
                prob.f(s),
                prob.g(s)
            );
        }
    }

    #[test]
    fn params_reproduce_tmsv() {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        let r: f64 = 0.6;
        let p = Params::from_column_slice(&[
            0.0,
            0.0,
            FRAC_PI_4,
            FRAC_PI_2,
            0.0,
            r.sqrt(),
            r.sqrt(),
        ]);
        let pi = pure_from_params(&p);
        let want = tmsv(r).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(pi[(i, j)], want.matrix()[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn params_always_give_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Params::<f64>::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let pi = pure_from_params(&p);
            assert_abs_diff_eq!(pi.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pt_nu_closed_form_matches_general_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = Params::<f64>::from_fn(|_, _| rng.random_range(-1.5..1.5));
            let pi4 = pure_from_params(&p);
            let pi = crate::cov::CovarianceMatrix::new(nalgebra::DMatrix::from_fn(4, 4, |i, j| {
                pi4[(i, j)]
            }))
            .unwrap();
            let via_cov = pi
                .partial_transpose()
                .unwrap()
                .symplectic_eigenvalues()
                .unwrap()[0];
            assert_abs_diff_eq!(pt_nu_min4(&pi4), via_cov, epsilon = 1e-8);
        }
    }

    #[test]
    fn passive_angle_round_trip() {
        use std::f64::consts::TAU;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = compose(
                2,
                &[
                    rotation(rng.random_range(0.0..TAU), 0, 2).unwrap(),
                    rotation(rng.random_range(0.0..TAU), 1, 2).unwrap(),
                    beam_splitter(rng.random_range(0.0..1.0), (0, 1), 2).unwrap(),
                    rotation(rng.random_range(0.0..TAU), 0, 2).unwrap(),
                    rotation(rng.random_range(0.0..TAU), 1, 2).unwrap(),
                ],
            )
            .unwrap();
            let ang = passive_to_angles(&k);
            let rebuilt = local_pair(ang[0], ang[1]) * mixer4(ang[2]) * local_pair(ang[3], ang[4]);
            for i in 0..4 {
                for j in 0..4 {
                    assert_abs_diff_eq!(rebuilt[(i, j)], k.matrix()[(i, j)], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn passive_angle_round_trip_edge_cases() {
        for k in [
            rotation(0.7f64, 0, 2).unwrap(),
            rotation(5.1f64, 1, 2).unwrap(),
            balanced_beam_splitter(),
            beam_splitter(0.0f64, (0, 1), 2).unwrap(),
            SymplecticMatrix::identity(2),
        ] {
            let ang = passive_to_angles(&k);
            let rebuilt = local_pair(ang[0], ang[1]) * mixer4(ang[2]) * local_pair(ang[3], ang[4]);
            for i in 0..4 {
                for j in 0..4 {
                    assert_abs_diff_eq!(rebuilt[(i, j)], k.matrix()[(i, j)], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn sof_on_pure_state_recovers_itself() {
        // for pure sigma the only feasible pi is sigma; r1 + r2 must come out
        let sigma = diagonal_squeezed_state(0.4f64, 0.3).unwrap();
        let opt = minimize_pure(&sigma, Objective::Sof, 7, &Budget::FULL).unwrap();
        assert_abs_diff_eq!(opt.value, 0.7, epsilon = 1e-6);
        assert!(opt.feasibility > -1e-9);
    }

    #[test]
    fn sof_on_noisy_state_is_below_pure_value() {
        let pi = diagonal_squeezed_state(0.5f64, 0.3).unwrap();
        let m = pi.matrix() + nalgebra::DMatrix::from_diagonal_element(4, 4, 0.4);
        let sigma = crate::cov::CovarianceMatrix::new(m).unwrap();
        let opt = minimize_pure(&sigma, Objective::Sof, 11, &Budget::FULL).unwrap();
        assert!(opt.value <= 0.8 + 1e-9);
        assert!(opt.value >= 0.0);
        assert!(opt.feasibility > -1e-9);
    }

    #[test]
    fn eof_on_tmsv_matches_closed_form() {
        let sigma = tmsv(0.5f64).unwrap();
        let opt = minimize_pure(&sigma, Objective::Eof, 13, &Budget::FULL).unwrap();
        let want = crate::resources::h_impl((-2.0f64 * 0.5).exp());
        assert_abs_diff_eq!(opt.value, want, epsilon = 1e-7);
    }

    #[test]
    fn deterministic_given_seed() {
        let pi = diagonal_squeezed_state(0.5f64, 0.3).unwrap();
        let m = pi.matrix() + nalgebra::DMatrix::from_diagonal_element(4, 4, 0.2);
        let sigma = crate::cov::CovarianceMatrix::new(m).unwrap();
        let cheap = Budget {
            restarts: 4,
            stages: 7,
            inner_iters: 70,
            early_stop: 2,
        };
        let a = minimize_pure(&sigma, Objective::Sof, 42, &cheap).unwrap();
        let b = minimize_pure(&sigma, Objective::Sof, 42, &cheap).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.pi, b.pi);
    }
}
