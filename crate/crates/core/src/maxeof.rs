//! The EOF-maximizing pipeline: passive operations plus noise addition
//! that drive an arbitrary two-mode state into the potential-saturating
//! family while preserving its SOF.
//!
//! The pipeline is a conjecture-evidence engine. Its output contract,
//! E(sigma_out) = h0[S(sigma_in)] and S(sigma_out) = S(sigma_in) within
//! 1e-6, is checked on every call; a failure is first retried with an
//! escalated optimizer budget and only then reported as a
//! [`Error::ConjectureGap`], never silently dropped.

use nalgebra::DMatrix;

use crate::cov::{spectrum, CovarianceMatrix};
use crate::decomp::diagonalize_pure;
use crate::error::{Error, GapReport, Result};
use crate::optimize::Budget;
use crate::resources::{gaussian_eof_budget, h0, sof_mixed_budget, sof_pure};
use crate::scalar::{num, to_f64, Scalar};
use crate::symp::SymplecticMatrix;
use crate::tol::Tolerances;
use crate::transforms::{apply, balanced_beam_splitter, beam_splitter, rotation};

/// Snapshots and search results of one pipeline run. Mode indices are
/// 0-based.
#[derive(Debug, Clone)]
pub struct AlgorithmTrace<T: Scalar> {
    pub pi_opt: CovarianceMatrix<T>,
    pub pi_diag: CovarianceMatrix<T>,
    pub sigma_diag: CovarianceMatrix<T>,
    pub phi_diag: DMatrix<T>,
    pub phi_extra: DMatrix<T>,
    pub sigma_prime: CovarianceMatrix<T>,
    pub sigma_rot: CovarianceMatrix<T>,
    pub sigma_out: CovarianceMatrix<T>,
    pub k_bm: SymplecticMatrix<T>,
    pub theta_star: T,
    pub i_star: usize,
    pub tau_star: T,
    pub j_star: usize,
    pub dcc_residual: T,
    pub skipped_noise_path: bool,
}

/// Numbers backing the saturation contract of one run.
#[derive(Debug, Clone, Copy)]
pub struct SaturationCheck {
    pub sof_in: f64,
    pub sof_out: f64,
    pub eof_out: f64,
    pub h0_sof: f64,
    /// eof_out - h0_sof.
    pub gap: f64,
}

/// The pure state with minimal SOF among feasible decompositions of the
/// input; same SOF as the input by construction.
pub fn opt_sof_state<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    seed: u64,
) -> Result<CovarianceMatrix<T>> {
    Ok(sof_mixed_budget(sigma_in, seed, &Budget::FULL)?.witness.pi)
}

/// Passively diagonalizes pi_opt and carries sigma_in along: returns
/// (K_BM, pi_diag, sigma_diag, phi_diag).
pub fn bm_step<T: Scalar>(
    pi_opt: &CovarianceMatrix<T>,
    sigma_in: &CovarianceMatrix<T>,
) -> Result<(
    SymplecticMatrix<T>,
    CovarianceMatrix<T>,
    CovarianceMatrix<T>,
    DMatrix<T>,
)> {
    let (k_bm, pi_diag) = diagonalize_pure(pi_opt)?;
    let sigma_diag = apply(&k_bm, sigma_in)?;
    let phi_diag = sigma_diag.matrix() - pi_diag.matrix();
    Ok((k_bm, pi_diag, sigma_diag, phi_diag))
}

/// The rank-one noise term (lambda1 - lambda2) v2 v2^T from the
/// descending spectrum of phi_diag.
pub fn extra_noise<T: Scalar>(phi_diag: &DMatrix<T>) -> DMatrix<T> {
    let spec = spectrum(phi_diag);
    let gap = (spec.eigenvalues[0] - spec.eigenvalues[1]).max(T::zero());
    let v = &spec.eigenvectors[1];
    v * v.transpose() * gap
}

/// Golden-section search for the minimum of f on [a, b].
fn golden_min<T: Scalar, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> T {
    let phi: T = num((5.0f64.sqrt() - 1.0) / 2.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) * num(0.5)
}

/// Finds the single-mode rotation making the state de-cross-correlated:
/// 360-point grid on [0, pi) per mode, then golden-section refinement.
/// Ties between modes go to mode 0.
pub fn de_cross_correlate<T: Scalar>(
    sigma_prime: &CovarianceMatrix<T>,
) -> Result<(T, usize, T)> {
    let (theta, mode, r) = best_dcc_rotation(sigma_prime);
    if r > Tolerances::<T>::default().dcc {
        return Err(Error::DccFailed {
            residual: to_f64(r),
        });
    }
    Ok((theta, mode, r))
}

/// Smooth companion of [`rotation_residual`]: the sum of squares of the
/// same four entries. Simplex descent handles this far better than the
/// kinked max-abs form.
fn rotation_residual_sq<T: Scalar>(sigma: &CovarianceMatrix<T>, theta: T, mode: usize) -> T {
    let k = rotation(theta, mode, 2).expect("mode in range");
    let m = k.sandwich(sigma.matrix());
    let mut acc = T::zero();
    for &(i, j) in &[(0usize, 1usize), (0, 3), (1, 2), (2, 3)] {
        acc += m[(i, j)] * m[(i, j)];
    }
    acc
}

fn rotation_residual<T: Scalar>(sigma: &CovarianceMatrix<T>, theta: T, mode: usize) -> T {
    let k = rotation(theta, mode, 2).expect("mode in range");
    let m = k.sandwich(sigma.matrix());
    let mut worst = T::zero();
    for &(i, j) in &[(0usize, 1usize), (0, 3), (1, 2), (2, 3)] {
        let v = m[(i, j)].abs();
        if v > worst {
            worst = v;
        }
    }
    worst
}

/// The best single-mode rotation found, with its residual; never errors.
fn best_dcc_rotation<T: Scalar>(sigma_prime: &CovarianceMatrix<T>) -> (T, usize, T) {
    let pi_t: T = num(std::f64::consts::PI);
    let n_grid = 360usize;
    let step = pi_t / num(n_grid as f64);
    let mut best: Option<(T, T, usize)> = None;
    for mode in 0..2usize {
        let mut grid_best = (rotation_residual(sigma_prime, T::zero(), mode), T::zero());
        for i in 1..n_grid {
            let theta = step * num(i as f64);
            let r = rotation_residual(sigma_prime, theta, mode);
            if r < grid_best.0 {
                grid_best = (r, theta);
            }
        }
        let theta = golden_min(
            |t| rotation_residual(sigma_prime, t, mode),
            grid_best.1 - step,
            grid_best.1 + step,
            num(1e-10),
        );
        let theta = if theta < T::zero() { theta + pi_t } else { theta };
        let r = rotation_residual(sigma_prime, theta, mode);
        let better = match best {
            None => true,
            Some((rb, _, _)) => r < rb,
        };
        if better {
            best = Some((r, theta, mode));
        }
    }
    let (r, theta, mode) = best.expect("two candidates evaluated");
    (theta, mode, r)
}

fn eof_of<T: Scalar>(sigma: &CovarianceMatrix<T>, seed: u64, budget: &Budget) -> Result<T> {
    // the EOF optimizer's error is one-sided (a missed decomposition
    // reads too high), and a transmissivity search maximizing over such
    // estimates gravitates to exactly the points where the optimizer
    // failed; the minimum over two independent seeds suppresses that
    let a = gaussian_eof_budget(sigma, seed, budget)?.value;
    let b = gaussian_eof_budget(sigma, seed ^ 0x0abc_def1_2345_6789, budget)?.value;
    Ok(a.min(b))
}

/// Symmetrized sigma_diag + phi_extra pair for the general path.
fn noise_and_prime<T: Scalar>(
    sigma_diag: &CovarianceMatrix<T>,
    phi_diag: &DMatrix<T>,
) -> (DMatrix<T>, CovarianceMatrix<T>) {
    let phi_extra = extra_noise(phi_diag);
    let half: T = num(0.5);
    let sp = sigma_diag.matrix() + &phi_extra;
    let prime = CovarianceMatrix::from_parts_unchecked(2, (&sp + sp.transpose()) * half);
    (phi_extra, prime)
}

/// Refines a near-optimal witness by descending the de-cross-correlation
/// residual directly. The residual vanishes at the exact optimum, so it
/// is a sharper convergence signal there than the witness optimizer's
/// own gradient tolerance; feasibility and the witness squeezing total
/// are held in place by penalties.
fn polish_witness<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    pi_opt: &CovarianceMatrix<T>,
    theta0: T,
    mode0: usize,
) -> Result<CovarianceMatrix<T>> {
    let p0 = crate::optimize::williamson_seed(pi_opt)?;
    let s_star = p0[5] * p0[5] + p0[6] * p0[6];
    let sigma4 = nalgebra::Matrix4::from_fn(|i, j| sigma_in.matrix()[(i, j)]);
    let window: T = num(0.3);
    let n_scan = 60usize;
    let make_eval = |smooth: bool| {
        move |p: &crate::optimize::Params<T>| -> T {
            let resid = |sp: &CovarianceMatrix<T>, t: T| -> T {
                if smooth {
                    rotation_residual_sq(sp, t, mode0)
                } else {
                    rotation_residual(sp, t, mode0)
                }
            };
            let pi4 = crate::optimize::pure_from_params(p);
            let g = crate::optimize::witness_feasibility(&sigma4, p);
            let pi =
                CovarianceMatrix::from_parts_unchecked(2, DMatrix::from_fn(4, 4, |i, j| pi4[(i, j)]));
            let (sd, phd) = match bm_step(&pi, sigma_in) {
                Ok((_, _, sd, phd)) => (sd, phd),
                Err(_) => return num(1e6),
            };
            let (_, sp) = noise_and_prime(&sd, &phd);
            let mut best = (resid(&sp, theta0), theta0);
            for i in 0..=n_scan {
                let t = theta0 - window
                    + (window + window) * num::<T>(i as f64) / num::<T>(n_scan as f64);
                let r = resid(&sp, t);
                if r < best.0 {
                    best = (r, t);
                }
            }
            let step = (window + window) / num::<T>(n_scan as f64);
            let t = golden_min(|t| resid(&sp, t), best.1 - step, best.1 + step, num(1e-11));
            let res = resid(&sp, t).min(best.0);
            let s = p[5] * p[5] + p[6] * p[6];
            // the optimal witness sits exactly on the feasibility boundary,
            // so penalizing every negative eigenvalue walls off the optimum;
            // a slack matching the noise_min_eig tolerance keeps it reachable.
            // the witness value anchor is one sided: drifting above the
            // optimizer's value caps the reachable EOF, while drifting below
            // is blocked by feasibility anyway; a symmetric anchor would let
            // the simplex trade residual descent for tiny value decreases
            res + num::<T>(1e4) * (-g - num::<T>(1e-9)).max(T::zero())
                + num::<T>(1e2) * (s - s_star).max(T::zero())
        }
    };
    // two descent stages: the smooth sum-of-squares residual converges
    // the final decades where the max-abs form leaves the simplex
    // degenerate, while the max-abs form escapes shallow basins that
    // flatten out under squaring; restarting with a shrunken simplex
    // around the incumbent recovers progress when a stage stagnates
    let eval_sq = make_eval(true);
    let mut p = p0;
    let mut value = eval_sq(&p);
    for scale in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 3e-8] {
        let (pn, vn) = crate::optimize::nelder_mead(&eval_sq, p, num(scale), 2000, num(1e-22));
        if vn < value {
            p = pn;
            value = vn;
        }
        if value <= num(1e-20) {
            break;
        }
    }
    let p_sq = p;
    let eval_abs = make_eval(false);
    let mut value = eval_abs(&p);
    for scale in [1e-4, 1e-6, 3e-8] {
        let (pn, vn) = crate::optimize::nelder_mead(&eval_abs, p, num(scale), 1500, num(1e-15));
        if vn < value {
            p = pn;
            value = vn;
        }
        if value <= num(1e-10) {
            break;
        }
    }
    // each stage optimizes a penalized surrogate restricted to the seed
    // rotation, so neither stage's own value is trustworthy across
    // stages; pick the candidate by the measured residual instead
    let to_pi = |p: &crate::optimize::Params<T>| -> CovarianceMatrix<T> {
        let pi4 = crate::optimize::pure_from_params(p);
        CovarianceMatrix::from_parts_unchecked(2, DMatrix::from_fn(4, 4, |i, j| pi4[(i, j)]))
    };
    let measure = |pi: &CovarianceMatrix<T>| -> T {
        match bm_step(pi, sigma_in) {
            Ok((_, _, sd, phd)) => {
                let (_, sp) = noise_and_prime(&sd, &phd);
                best_dcc_rotation(&sp).2
            }
            Err(_) => num(f64::INFINITY),
        }
    };
    let mut best = (measure(pi_opt), pi_opt.clone(), p0);
    for cand in [p0, p_sq, p] {
        let pi = to_pi(&cand);
        let r = measure(&pi);
        if r < best.0 {
            best = (r, pi, cand);
        }
    }
    // last resort for frames whose de-cross-correlating rotation sits
    // outside the seeded window or on the other mode: the surrogate
    // searches the full rotation range on both modes (much slower per
    // evaluation, so only run once the cheap stages have failed)
    if best.0 > Tolerances::<T>::default().dcc {
        let full_eval = |p: &crate::optimize::Params<T>| -> T {
            let pi4 = crate::optimize::pure_from_params(p);
            let g = crate::optimize::witness_feasibility(&sigma4, p);
            let pi = CovarianceMatrix::from_parts_unchecked(
                2,
                DMatrix::from_fn(4, 4, |i, j| pi4[(i, j)]),
            );
            let (sd, phd) = match bm_step(&pi, sigma_in) {
                Ok((_, _, sd, phd)) => (sd, phd),
                Err(_) => return num(1e6),
            };
            let (_, sp) = noise_and_prime(&sd, &phd);
            let pi_t: T = num(std::f64::consts::PI);
            let n_full = 120usize;
            let step = pi_t / num(n_full as f64);
            let mut res: T = num(f64::INFINITY);
            for mode in 0..2usize {
                let mut gb = (rotation_residual_sq(&sp, T::zero(), mode), T::zero());
                for i in 1..n_full {
                    let t = step * num(i as f64);
                    let r = rotation_residual_sq(&sp, t, mode);
                    if r < gb.0 {
                        gb = (r, t);
                    }
                }
                let t = golden_min(
                    |t| rotation_residual_sq(&sp, t, mode),
                    gb.1 - step,
                    gb.1 + step,
                    num(1e-11),
                );
                res = res.min(rotation_residual_sq(&sp, t, mode)).min(gb.0);
            }
            let s = p[5] * p[5] + p[6] * p[6];
            res + num::<T>(1e4) * (-g - num::<T>(1e-9)).max(T::zero())
                + num::<T>(1e2) * (s - s_star).max(T::zero())
        };
        let mut p = best.2;
        let mut value = full_eval(&p);
        for scale in [1e-3, 1e-5, 1e-7] {
            let (pn, vn) = crate::optimize::nelder_mead(&full_eval, p, num(scale), 1200, num(1e-22));
            if vn < value {
                p = pn;
                value = vn;
            }
            if value <= num(1e-20) {
                break;
            }
        }
        let pi = to_pi(&p);
        let r = measure(&pi);
        if r < best.0 {
            best = (r, pi, p);
        }
    }
    Ok(best.1)
}

/// Mixes one mode with an ancillary vacuum to strip removable noise,
/// then sends the result through the balanced beam splitter that turns
/// the decoupled-squeezing frame into the saturating family. The
/// transmissivity search maximizes the EOF of that final state (in the
/// pre-mix frame the two modes are separable for every transmissivity,
/// so the objective would be identically zero there). Grid plus
/// golden-section over the transmissivity, both modes tried. Returns
/// (tau_star, j_star, sigma_out).
pub fn final_beam_splitter<T: Scalar>(
    sigma_rot: &CovarianceMatrix<T>,
    seed: u64,
    target: Option<T>,
) -> Result<(T, usize, CovarianceMatrix<T>)> {
    let sigma3 = sigma_rot.add_vacuum_mode();
    let eval_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mixed = |tau: T, j: usize| -> Result<CovarianceMatrix<T>> {
        let k = beam_splitter(tau, (j, 2), 3)?;
        let traced = apply(&k, &sigma3)?.trace_out_mode(2)?;
        apply(&balanced_beam_splitter(), &traced)
    };
    let mut best: Option<(T, T, usize)> = None;
    if let Some(tgt) = target {
        // the boundary transmissivities are optimal whenever the noise
        // ends up on a single mode, which covers almost every input;
        // check them first and skip the grid when one already meets the
        // ceiling within the contract tolerance (the no-op comes first
        // so it wins ties)
        for (tau, j) in [(T::one(), 0usize), (T::zero(), 0), (T::zero(), 1)] {
            let e = eof_of(&mixed(tau, j)?, eval_seed, &Budget::FULL)?;
            if e >= tgt - num(5e-7) {
                return Ok((tau, j, mixed(tau, j)?));
            }
            let better = best.map_or(true, |(eb, _, _)| e > eb);
            if better {
                best = Some((e, tau, j));
            }
        }
    }
    for j in 0..2usize {
        // each evaluation runs the full-budget EOF optimizer: a cheaper
        // budget is noisy enough (its error is one-sided, toward values
        // that are too large) to plant spurious grid maxima, so a coarse
        // accurate grid beats a fine noisy one here
        let n_grid = 20usize;
        // walk the grid from tau = 1 down so that doing nothing wins ties
        let mut grid_best = (T::zero() - T::one(), T::one());
        for i in (0..=n_grid).rev() {
            let tau = num::<T>(i as f64 / n_grid as f64);
            let e = eof_of(&mixed(tau, j)?, eval_seed, &Budget::FULL)?;
            if e > grid_best.0 {
                grid_best = (e, tau);
            }
        }
        let step: T = num(1.0 / n_grid as f64);
        let lo = (grid_best.1 - step).max(T::zero());
        let hi = (grid_best.1 + step).min(T::one());
        let mut err: Option<Error> = None;
        let tau = golden_min(
            |t| match eof_of(&mixed(t, j).unwrap(), eval_seed, &Budget::FULL) {
                Ok(e) => -e,
                Err(e) => {
                    err = Some(e);
                    T::zero()
                }
            },
            lo,
            hi,
            num(1e-4),
        );
        if let Some(e) = err {
            return Err(e);
        }
        let tau = if (T::one() - tau) < num(1e-4) { T::one() } else { tau };
        let tau = if tau < num(1e-4) { T::zero() } else { tau };
        let e = eof_of(&mixed(tau, j)?, eval_seed, &Budget::FULL)?;
        let e_grid = grid_best.0;
        // keep the grid incumbent if refinement drifted downhill
        let (e, tau) = if e_grid > e { (e_grid, grid_best.1) } else { (e, tau) };
        let better = match best {
            None => true,
            Some((eb, _, _)) => e > eb,
        };
        if better {
            best = Some((e, tau, j));
        }
    }
    let (_, tau, j) = best.expect("two candidates evaluated");
    Ok((tau, j, mixed(tau, j)?))
}

struct Frame<T: Scalar> {
    pi: CovarianceMatrix<T>,
    k_bm: SymplecticMatrix<T>,
    pi_diag: CovarianceMatrix<T>,
    sigma_diag: CovarianceMatrix<T>,
    phi_diag: DMatrix<T>,
    phi_extra: DMatrix<T>,
    sigma_prime: CovarianceMatrix<T>,
    theta: T,
    mode: usize,
    residual: T,
}

fn run_pipeline<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    seed: u64,
    budget: &Budget,
) -> Result<(CovarianceMatrix<T>, AlgorithmTrace<T>)> {
    let m = sof_mixed_budget(sigma_in, seed, budget)?;
    let s_opt = m.value;
    let pi_opt = m.witness.pi;
    let (k_bm, pi_diag, sigma_diag, phi_diag) = bm_step(&pi_opt, sigma_in)?;
    let rs = crate::decomp::pure_squeezings(&pi_diag)?;
    let squeeze_floor: T = num(1e-9);

    if rs[0] + rs[1] <= num(1e-8) {
        // no squeezing to redistribute: the input sits above an (almost)
        // vacuum witness, so it is classical up to working precision and
        // already saturates the bound; pass it through untouched
        // (h0 of the residual squeezing is far below the contract tolerance)
        let sigma_out = sigma_in.clone();
        let trace = AlgorithmTrace {
            pi_opt,
            pi_diag,
            sigma_diag: sigma_in.clone(),
            phi_diag,
            phi_extra: DMatrix::zeros(4, 4),
            sigma_prime: sigma_in.clone(),
            sigma_rot: sigma_in.clone(),
            sigma_out: sigma_out.clone(),
            k_bm: SymplecticMatrix::identity(2),
            theta_star: T::zero(),
            i_star: 0,
            tau_star: T::one(),
            j_star: 0,
            dcc_residual: T::zero(),
            skipped_noise_path: true,
        };
        return Ok((sigma_out, trace));
    }

    if rs.iter().all(|&r| r > squeeze_floor) {
        // both modes squeezed: a balanced beam splitter lands in the
        // saturating family directly
        let sigma_out = apply(&balanced_beam_splitter(), &sigma_diag)?;
        let trace = AlgorithmTrace {
            pi_opt,
            pi_diag: pi_diag.clone(),
            sigma_diag: sigma_diag.clone(),
            phi_diag,
            phi_extra: DMatrix::zeros(4, 4),
            sigma_prime: sigma_diag.clone(),
            sigma_rot: sigma_diag,
            sigma_out: sigma_out.clone(),
            k_bm,
            theta_star: T::zero(),
            i_star: 0,
            tau_star: T::one(),
            j_star: 0,
            dcc_residual: T::zero(),
            skipped_noise_path: true,
        };
        return Ok((sigma_out, trace));
    }

    // the de-cross-correlation step is only as accurate as the witness
    // position; gather a second optimizer run and keep the better frame
    let m2 = sof_mixed_budget(sigma_in, seed ^ 0xa1, budget)?;
    let frame_of = |pi: CovarianceMatrix<T>| -> Result<Frame<T>> {
        let (k_bm, pi_diag, sigma_diag, phi_diag) = bm_step(&pi, sigma_in)?;
        let (phi_extra, sigma_prime) = noise_and_prime(&sigma_diag, &phi_diag);
        let (theta, mode, residual) = best_dcc_rotation(&sigma_prime);
        Ok(Frame {
            pi,
            k_bm,
            pi_diag,
            sigma_diag,
            phi_diag,
            phi_extra,
            sigma_prime,
            theta,
            mode,
            residual,
        })
    };
    let f1 = frame_of(pi_opt)?;
    let f2 = frame_of(m2.witness.pi)?;
    // a worse witness value can zero the residual while capping the
    // reachable EOF, so the value comparison comes first
    let (mut frame, alt) = if (s_opt - m2.value).abs() > num(1e-7) {
        if s_opt < m2.value {
            (f1, f2)
        } else {
            (f2, f1)
        }
    } else if f1.residual <= f2.residual {
        (f1, f2)
    } else {
        (f2, f1)
    };
    let tol_dcc = Tolerances::<T>::default().dcc;
    if frame.residual > tol_dcc {
        // the residual floor tracks the witness position accuracy;
        // polish the witness against the residual itself and retry,
        // keeping the unpolished frame when the descent does not help
        let polished = polish_witness(sigma_in, &frame.pi, frame.theta, frame.mode)?;
        let fp = frame_of(polished)?;
        if fp.residual < frame.residual {
            frame = fp;
        }
        if frame.residual > tol_dcc {
            // the rejected optimizer run can sit in a different basin of
            // the residual landscape; polishing it is the last resort
            let polished = polish_witness(sigma_in, &alt.pi, alt.theta, alt.mode)?;
            let fa = frame_of(polished)?;
            if fa.residual < frame.residual {
                frame = fa;
            }
        }
        if frame.residual > tol_dcc {
            return Err(Error::DccFailed {
                residual: to_f64(frame.residual),
            });
        }
    }
    let Frame {
        pi: pi_opt,
        k_bm,
        pi_diag,
        sigma_diag,
        phi_diag,
        phi_extra,
        sigma_prime,
        theta: theta_star,
        mode: i_star,
        residual: dcc_residual,
    } = frame;
    let sigma_rot = apply(&rotation(theta_star, i_star, 2)?, &sigma_prime)?;
    let rs = crate::decomp::pure_squeezings(&pi_diag)?;
    let ceiling = h0(rs[0] + rs[1])?;
    let (tau_star, j_star, sigma_out) = final_beam_splitter(&sigma_rot, seed, Some(ceiling))?;
    let trace = AlgorithmTrace {
        pi_opt,
        pi_diag,
        sigma_diag,
        phi_diag,
        phi_extra,
        sigma_prime,
        sigma_rot,
        sigma_out: sigma_out.clone(),
        k_bm,
        theta_star,
        i_star,
        tau_star,
        j_star,
        dcc_residual,
        skipped_noise_path: false,
    };
    Ok((sigma_out, trace))
}

fn check_contract<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    sigma_out: &CovarianceMatrix<T>,
    seed: u64,
    budget: &Budget,
    sof_hint: Option<f64>,
) -> Result<SaturationCheck> {
    // the pipeline witness value is itself a feasible upper bound on
    // the SOF, so the better of the two estimates is the tighter one
    let sof_ind = to_f64(sof_mixed_budget(sigma_in, seed ^ 0x5151, budget)?.value);
    let sof_in = sof_hint.map_or(sof_ind, |h| h.min(sof_ind));
    let sof_out = to_f64(sof_mixed_budget(sigma_out, seed ^ 0x5252, budget)?.value);
    let eof_out = to_f64(gaussian_eof_budget(sigma_out, seed ^ 0x5353, budget)?.value);
    let h0_sof = to_f64(h0(num::<T>(sof_in))?);
    Ok(SaturationCheck {
        sof_in,
        sof_out,
        eof_out,
        h0_sof,
        gap: eof_out - h0_sof,
    })
}

/// Full pipeline with the saturation contract enforced; returns the
/// output state, the trace, and the checked numbers.
pub fn maximize_eof_checked<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    seed: u64,
) -> Result<(CovarianceMatrix<T>, AlgorithmTrace<T>, SaturationCheck)> {
    let budgets = [(&Budget::FULL, 16usize), (&Budget::RETRY, 64usize)];
    let mut last: Option<(CovarianceMatrix<T>, AlgorithmTrace<T>, SaturationCheck, usize)> = None;
    let n_budgets = budgets.len();
    for (attempt, (budget, restarts)) in budgets.into_iter().enumerate() {
        let (sigma_out, trace) = match run_pipeline(sigma_in, seed, budget) {
            Ok(ok) => ok,
            // a dcc residual just above tolerance usually reflects the
            // accuracy of the pure-state witness; a bigger budget on the
            // next attempt sharpens the witness, so only give up when
            // the last attempt still fails
            Err(Error::DccFailed { .. }) if attempt + 1 < n_budgets => continue,
            Err(e) => return Err(e),
        };
        let sof_hint = sof_pure(&trace.pi_diag).ok().map(to_f64);
        let check = check_contract(sigma_in, &sigma_out, seed, budget, sof_hint)?;
        if check.gap.abs() <= 1e-6 && (check.sof_out - check.sof_in).abs() <= 1e-6 {
            return Ok((sigma_out, trace, check));
        }
        last = Some((sigma_out, trace, check, restarts));
    }
    let (_, trace, check, restarts) = last.expect("at least one attempt ran");
    Err(Error::ConjectureGap(Box::new(GapReport {
        sof_in: check.sof_in,
        sof_out: check.sof_out,
        eof_out: check.eof_out,
        h0_sof: check.h0_sof,
        gap: check.gap,
        dcc_residual: to_f64(trace.dcc_residual),
        restarts_used: restarts,
    })))
}

/// Transforms the input into a potential-saturating state with the same
/// SOF; deterministic given the seed.
pub fn maximize_eof<T: Scalar>(
    sigma_in: &CovarianceMatrix<T>,
    seed: u64,
) -> Result<(CovarianceMatrix<T>, AlgorithmTrace<T>)> {
    let (sigma_out, trace, _) = maximize_eof_checked(sigma_in, seed)?;
    Ok((sigma_out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{make_special, SpecialStateParams};
    use crate::transforms::{diagonal_squeezed_state, local_squeezers};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn noisy_one_mode_squeezed() -> CovarianceMatrix<f64> {
        // only the first mode squeezed, anisotropic thermal noise
        let s = local_squeezers(0.6f64, 0.0).unwrap();
        let d = CovarianceMatrix::thermal(&[1.2f64, 1.05]).unwrap();
        apply(&s, &d).unwrap()
    }

    #[test]
    fn opt_sof_state_fixes_pure_input() {
        let pi = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let out = opt_sof_state(&pi, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    out.matrix()[(i, j)],
                    pi.matrix()[(i, j)],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn opt_sof_state_of_thermal_is_vacuum() {
        let sigma = CovarianceMatrix::thermal(&[3.0f64, 3.0]).unwrap();
        let out = opt_sof_state(&sigma, 2).unwrap();
        assert_abs_diff_eq!(sof_pure(&out).unwrap(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn bm_step_pure_input_has_zero_noise() {
        let pi = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let (k_bm, pi_diag, _, phi_diag) = bm_step(&pi, &pi).unwrap();
        assert!(k_bm.is_passive());
        assert!(phi_diag.amax() < 1e-8);
        let rec = apply(&k_bm, &pi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    rec.matrix()[(i, j)],
                    pi_diag.matrix()[(i, j)],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn bm_step_isotropic_noise_keeps_spectrum() {
        let pi = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let m = pi.matrix() + DMatrix::from_diagonal_element(4, 4, 0.1);
        let sigma = CovarianceMatrix::new(m).unwrap();
        let pi_opt = opt_sof_state(&sigma, 3).unwrap();
        let (_, _, _, phi_diag) = bm_step(&pi_opt, &sigma).unwrap();
        let spec = spectrum(&phi_diag);
        assert!(*spec.eigenvalues.last().unwrap() > -1e-9);
    }

    #[test]
    fn extra_noise_examples() {
        let phi = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0f64, 1.0, 0.0, 0.0]));
        let extra = extra_noise(&phi);
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0f64, 1.0, 0.0, 0.0]));
        assert!((extra.clone() - want).amax() < 1e-12);
        assert_abs_diff_eq!(extra.trace(), 1.0, epsilon = 1e-12);

        let phi = DMatrix::from_diagonal_element(4, 4, 0.7);
        assert!(extra_noise(&phi).amax() < 1e-12);
    }

    #[test]
    fn dcc_noop_on_clean_state() {
        let sigma = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let (theta, _, residual) = de_cross_correlate(&sigma).unwrap();
        assert!(residual < 1e-10);
        let wrapped = theta.min((theta - std::f64::consts::PI).abs());
        assert!(wrapped < 1e-6 || (theta - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn dcc_inverts_a_known_rotation() {
        let clean = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let spoiled = apply(&rotation(0.3f64, 1, 2).unwrap(), &clean).unwrap();
        assert!(!spoiled.is_de_cross_correlated());
        let (theta, mode, residual) = de_cross_correlate(&spoiled).unwrap();
        assert!(residual <= 1e-10);
        assert_eq!(mode, 1);
        // a diagonal state is invariant under quarter turns, so undoing
        // the spoiler means theta = -0.3 mod pi/2
        let q = std::f64::consts::FRAC_PI_2;
        let diff = ((theta + 0.3) / q - ((theta + 0.3) / q).round()).abs() * q;
        assert!(diff < 1e-6, "theta = {theta}");
    }

    #[test]
    fn final_bs_keeps_noiseless_state() {
        let pi = diagonal_squeezed_state(0.4f64, 0.2).unwrap();
        let (tau, _, sigma_out) = final_beam_splitter(&pi, 5, None).unwrap();
        // mixing vacuum into a noiseless state only dilutes squeezing,
        // so the best transmissivity is full passthrough
        assert!(tau > 1.0 - 1e-4, "tau = {tau}");
        let expected = apply(&balanced_beam_splitter(), &pi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    sigma_out.matrix()[(i, j)],
                    expected.matrix()[(i, j)],
                    epsilon = 1e-4
                );
            }
        }
    }

    #[test]
    fn fast_path_on_special_state() {
        let p = SpecialStateParams::new(0.4f64, 0.3, 0.2, 0.5, 0.3, 1.0).unwrap();
        let sigma = make_special(&p);
        let (sigma_out, trace, check) = maximize_eof_checked(&sigma, 11).unwrap();
        assert!(trace.skipped_noise_path);
        assert!(check.gap.abs() <= 1e-6);
        assert!((check.sof_out - check.sof_in).abs() <= 1e-6);
        assert!(sigma_out.is_physical().unwrap());
    }

    #[test]
    fn vacuum_round_trips() {
        let sigma = CovarianceMatrix::<f64>::vacuum(2);
        let (sigma_out, _, check) = maximize_eof_checked(&sigma, 13).unwrap();
        assert_abs_diff_eq!(check.eof_out, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(check.sof_out, 0.0, epsilon = 1e-9);
        assert!(sigma_out.is_physical().unwrap());
    }

    #[test]
    fn general_path_saturates_one_mode_squeezed_input() {
        let sigma = noisy_one_mode_squeezed();
        let (sigma_out, trace, check) = maximize_eof_checked(&sigma, 17).unwrap();
        assert!(!trace.skipped_noise_path);
        assert!(trace.dcc_residual <= 1e-8);
        assert!(check.gap.abs() <= 1e-6, "gap = {}", check.gap);
        assert!((check.sof_out - check.sof_in).abs() <= 1e-6);
        assert!(sigma_out.is_physical().unwrap());
    }
}
