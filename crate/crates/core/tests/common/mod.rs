//! Brute-force reference minimizer used to cross-check the library
//! optimizer. It parametrizes pure two-mode witnesses with six numbers
//! (four passive angles and two squeezings), scans a coarse grid, and
//! polishes the best grid points with its own simplex descent. Nothing
//! here shares code with the library's optimizer.

use nalgebra::Matrix4;

pub type P6 = [f64; 6];

fn rot2(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

fn local_phases(a: f64, b: f64) -> Matrix4<f64> {
    let ra = rot2(a);
    let rb = rot2(b);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = ra[i][j];
            m[(2 + i, 2 + j)] = rb[i][j];
        }
    }
    m
}

fn mixer(omega: f64) -> Matrix4<f64> {
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

/// Pure witness from [a, b, omega, c, r1, r2].
pub fn witness(p: &P6) -> Matrix4<f64> {
    let k = local_phases(p[0], p[1]) * mixer(p[2]) * local_phases(p[3], 0.0);
    let z2 = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        (-2.0 * p[4]).exp(),
        (2.0 * p[4]).exp(),
        (-2.0 * p[5]).exp(),
        (2.0 * p[5]).exp(),
    ));
    let pi = k * z2 * k.transpose();
    (pi + pi.transpose()) * 0.5
}

fn min_eig(m: &Matrix4<f64>) -> f64 {
    let eig = m.symmetric_eigen();
    eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

fn sof_value(p: &P6) -> f64 {
    p[4].abs() + p[5].abs()
}

fn eof_value(p: &P6) -> f64 {
    let pi = witness(p);
    let det_a = pi[(0, 0)] * pi[(1, 1)] - pi[(0, 1)] * pi[(1, 0)];
    let det_b = pi[(2, 2)] * pi[(3, 3)] - pi[(2, 3)] * pi[(3, 2)];
    let det_c = pi[(0, 2)] * pi[(1, 3)] - pi[(0, 3)] * pi[(1, 2)];
    // partial transpose flips the sign of det C; the pure determinant is 1
    let delta = det_a + det_b - 2.0 * det_c;
    let disc = (delta * delta - 4.0).max(0.0);
    let nu2 = 0.5 * (delta - disc.sqrt());
    let nu = nu2.max(1e-300).sqrt();
    if nu >= 1.0 {
        return 0.0;
    }
    // entanglement entropy of a pure state with partial-transpose
    // symplectic eigenvalue nu = e^{-2r}
    let ch = 0.5 * (nu.sqrt() + 1.0 / nu.sqrt());
    let a = ch * ch;
    let b = a - 1.0;
    let bterm = if b > 0.0 { b * b.ln() } else { 0.0 };
    a * a.ln() - bterm
}

fn penalized(sigma: &Matrix4<f64>, p: &P6, value: fn(&P6) -> f64) -> f64 {
    let g = min_eig(&(sigma - witness(p)));
    value(p) + 1e4 * (-g - 1e-9).max(0.0)
}

fn nelder_mead(
    f: &dyn Fn(&P6) -> f64,
    x0: P6,
    scale: f64,
    max_iter: usize,
) -> (P6, f64) {
    let n = 6usize;
    let mut simplex: Vec<(f64, P6)> = Vec::with_capacity(n + 1);
    simplex.push((f(&x0), x0));
    for i in 0..n {
        let mut x = x0;
        x[i] += scale;
        simplex.push((f(&x), x));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if (simplex[n].0 - simplex[0].0).abs() <= 1e-15 {
            break;
        }
        let mut centroid = [0.0; 6];
        for s in simplex.iter().take(n) {
            for k in 0..n {
                centroid[k] += s.1[k] / n as f64;
            }
        }
        let worst = simplex[n];
        let lerp = |t: f64| -> P6 {
            let mut x = [0.0; 6];
            for k in 0..n {
                x[k] = centroid[k] + t * (worst.1[k] - centroid[k]);
            }
            x
        };
        let xr = lerp(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].0 {
            let xe = lerp(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            let xc = lerp(0.5);
            let fc = f(&xc);
            if fc < worst.0 {
                simplex[n] = (fc, xc);
            } else {
                let best = simplex[0].1;
                for s in simplex.iter_mut().skip(1) {
                    let mut x = [0.0; 6];
                    for k in 0..n {
                        x[k] = best[k] + 0.5 * (s.1[k] - best[k]);
                    }
                    *s = (f(&x), x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (simplex[0].1, simplex[0].0)
}

fn minimize(sigma: &Matrix4<f64>, value: fn(&P6) -> f64) -> f64 {
    let max_eig = -min_eig(&(-sigma));
    let r_cap = 0.5 * max_eig.ln() + 0.1;
    let pi = std::f64::consts::PI;
    let n_ang = 6usize;
    let n_r = 7usize;
    let f = |p: &P6| penalized(sigma, p, value);

    let mut ranked: Vec<(f64, P6)> = Vec::new();
    for ia in 0..n_ang {
        for ib in 0..n_ang {
            for iw in 0..n_ang {
                for ic in 0..n_ang {
                    for i1 in 0..n_r {
                        for i2 in 0..n_r {
                            let p = [
                                pi * ia as f64 / n_ang as f64,
                                pi * ib as f64 / n_ang as f64,
                                pi * iw as f64 / n_ang as f64,
                                pi * ic as f64 / n_ang as f64,
                                r_cap * i1 as f64 / (n_r - 1) as f64,
                                r_cap * i2 as f64 / (n_r - 1) as f64,
                            ];
                            ranked.push((f(&p), p));
                        }
                    }
                }
            }
        }
    }
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut best = f64::INFINITY;
    for (_, start) in ranked.iter().take(20) {
        let mut x = *start;
        for scale in [0.2, 0.02, 2e-3, 2e-4, 2e-5, 2e-6, 2e-7] {
            let (xn, _) = nelder_mead(&f, x, scale, 2500);
            x = xn;
        }
        let g = min_eig(&(sigma - witness(&x)));
        if g >= -1e-6 {
            best = best.min(value(&x));
        }
    }
    best
}

/// Reference SOF of a two-mode state by brute force.
pub fn oracle_sof(sigma: &Matrix4<f64>) -> f64 {
    minimize(sigma, sof_value)
}

/// Reference Gaussian EOF of a two-mode state by brute force.
pub fn oracle_eof(sigma: &Matrix4<f64>) -> f64 {
    minimize(sigma, eof_value)
}
