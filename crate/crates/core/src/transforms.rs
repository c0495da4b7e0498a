//! Constructors for Gaussian transformations and their application.
//!
//! Sign conventions:
//! - beam splitter: [[sqrt(tau) I2, sqrt(1-tau) I2], [-sqrt(1-tau) I2, sqrt(tau) I2]]
//! - rotation:      [[cos, sin], [-sin, cos]]
//! - squeezer:      S(r) = Diag(e^{-r}, e^{r})
//! - local pair:    S1(r1, r2) = S(r1) (+) S(-r2)
//! - two-mode:      S2(r) = K_bs S1(-r, r) K_bs^T
//!
//! Each convention is pinned entrywise by a test below so drift is caught.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cov::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::scalar::{num, to_f64, Scalar};
use crate::symp::{check_finite, check_range, SymplecticMatrix};

/// Beam splitter of transmissivity `tau` on modes `(i, j)` of an N-mode
/// system. Swapping the mode pair transposes (inverts) the matrix.
pub fn beam_splitter<T: Scalar>(
    tau: T,
    modes: (usize, usize),
    total_modes: usize,
) -> Result<SymplecticMatrix<T>> {
    check_range("tau", tau, 0.0, 1.0)?;
    let (i, j) = modes;
    if i == j {
        return Err(Error::ParamOutOfRange {
            name: "modes",
            value: i as f64,
        });
    }
    for &m in &[i, j] {
        if m >= total_modes {
            return Err(Error::IndexOutOfRange {
                index: m,
                n_modes: total_modes,
            });
        }
    }
    let c = tau.sqrt();
    let s = (T::one() - tau).sqrt();
    Ok(embedded_mixer(c, s, (i, j), total_modes))
}

fn embedded_mixer<T: Scalar>(
    c: T,
    s: T,
    (i, j): (usize, usize),
    total_modes: usize,
) -> SymplecticMatrix<T> {
    let mut m = DMatrix::identity(2 * total_modes, 2 * total_modes);
    for q in 0..2 {
        m[(2 * i + q, 2 * i + q)] = c;
        m[(2 * i + q, 2 * j + q)] = s;
        m[(2 * j + q, 2 * i + q)] = -s;
        m[(2 * j + q, 2 * j + q)] = c;
    }
    SymplecticMatrix::from_parts_unchecked(total_modes, m)
}

/// Phase rotation by `theta` on one mode.
pub fn rotation<T: Scalar>(theta: T, mode: usize, total_modes: usize) -> Result<SymplecticMatrix<T>> {
    check_finite("theta", theta)?;
    if mode >= total_modes {
        return Err(Error::IndexOutOfRange {
            index: mode,
            n_modes: total_modes,
        });
    }
    let mut m = DMatrix::identity(2 * total_modes, 2 * total_modes);
    let (c, s) = (theta.cos(), theta.sin());
    m[(2 * mode, 2 * mode)] = c;
    m[(2 * mode, 2 * mode + 1)] = s;
    m[(2 * mode + 1, 2 * mode)] = -s;
    m[(2 * mode + 1, 2 * mode + 1)] = c;
    Ok(SymplecticMatrix::from_parts_unchecked(total_modes, m))
}

/// Single-mode squeezer S(r) = Diag(e^{-r}, e^{r}) on one mode.
pub fn squeezer<T: Scalar>(r: T, mode: usize, total_modes: usize) -> Result<SymplecticMatrix<T>> {
    check_finite("r", r)?;
    if mode >= total_modes {
        return Err(Error::IndexOutOfRange {
            index: mode,
            n_modes: total_modes,
        });
    }
    let mut m = DMatrix::identity(2 * total_modes, 2 * total_modes);
    m[(2 * mode, 2 * mode)] = (-r).exp();
    m[(2 * mode + 1, 2 * mode + 1)] = r.exp();
    Ok(SymplecticMatrix::from_parts_unchecked(total_modes, m))
}

/// Local squeezer pair S1(r1, r2) = S(r1) (+) S(-r2), a 4x4 diagonal.
pub fn local_squeezers<T: Scalar>(r1: T, r2: T) -> Result<SymplecticMatrix<T>> {
    check_finite("r1", r1)?;
    check_finite("r2", r2)?;
    let mut m = DMatrix::identity(4, 4);
    m[(0, 0)] = (-r1).exp();
    m[(1, 1)] = r1.exp();
    m[(2, 2)] = r2.exp();
    m[(3, 3)] = (-r2).exp();
    Ok(SymplecticMatrix::from_parts_unchecked(2, m))
}

/// Balanced beam splitter (tau = 1/2) on modes (0, 1) of a two-mode system.
pub fn balanced_beam_splitter<T: Scalar>() -> SymplecticMatrix<T> {
    beam_splitter(num(0.5), (0, 1), 2).expect("tau = 1/2 is in range")
}

/// Non-local two-mode squeezer S2(r) = K_bs Diag(e^r, e^-r, e^-r, e^r) K_bs^T.
pub fn two_mode_squeezer<T: Scalar>(r: T) -> Result<SymplecticMatrix<T>> {
    let inner = local_squeezers(-r, -r)?;
    let kbs = balanced_beam_splitter::<T>();
    Ok(&(&kbs * &inner) * &kbs.transpose())
}

/// The locally-squeezed diagonal pure state
/// pi_d(r1, r2) = Diag(e^{-2 r1}, e^{2 r1}, e^{2 r2}, e^{-2 r2}).
pub fn diagonal_squeezed_state<T: Scalar>(r1: T, r2: T) -> Result<CovarianceMatrix<T>> {
    let s1 = local_squeezers(r1, r2)?;
    Ok(apply(&s1, &CovarianceMatrix::vacuum(2))?)
}

/// Two-mode squeezed vacuum S2(r) I S2(r)^T.
pub fn tmsv<T: Scalar>(r: T) -> Result<CovarianceMatrix<T>> {
    let s2 = two_mode_squeezer(r)?;
    apply(&s2, &CovarianceMatrix::vacuum(2))
}

/// Congruence transform sigma -> K sigma K^T.
pub fn apply<T: Scalar>(
    k: &SymplecticMatrix<T>,
    sigma: &CovarianceMatrix<T>,
) -> Result<CovarianceMatrix<T>> {
    if k.n_modes() != sigma.n_modes() {
        return Err(Error::DimensionMismatch {
            a: 2 * k.n_modes(),
            b: 2 * sigma.n_modes(),
        });
    }
    let m = k.sandwich(sigma.matrix());
    // re-symmetrize to shed rounding skew
    let half: T = num(0.5);
    let sym = (&m + m.transpose()) * half;
    Ok(CovarianceMatrix::from_parts_unchecked(sigma.n_modes(), sym))
}

/// Right-to-left product of an ordered list: the first element is applied
/// first. The raw product is returned unmodified (no re-orthogonalization).
pub fn compose<T: Scalar>(
    n_modes: usize,
    ks: &[SymplecticMatrix<T>],
) -> Result<SymplecticMatrix<T>> {
    let mut acc = SymplecticMatrix::identity(n_modes);
    for k in ks {
        if k.n_modes() != n_modes {
            return Err(Error::DimensionMismatch {
                a: 2 * n_modes,
                b: 2 * k.n_modes(),
            });
        }
        acc = k * &acc;
    }
    Ok(acc)
}

/// Serializable description of one Gaussian transformation, so a harness
/// can log the exact circuit it applied.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec<T: Scalar> {
    BeamSplitter { tau: T, modes: (usize, usize) },
    Rotation { theta: T, mode: usize },
    Squeezer { r: T, mode: usize },
    LocalSqueezers { r1: T, r2: T },
    TwoModeSqueezer { r: T },
}

impl<T: Scalar> TransformSpec<T> {
    /// Compile to the symplectic matrix on an N-mode system.
    pub fn compile(&self, total_modes: usize) -> Result<SymplecticMatrix<T>> {
        match *self {
            TransformSpec::BeamSplitter { tau, modes } => beam_splitter(tau, modes, total_modes),
            TransformSpec::Rotation { theta, mode } => rotation(theta, mode, total_modes),
            TransformSpec::Squeezer { r, mode } => squeezer(r, mode, total_modes),
            TransformSpec::LocalSqueezers { r1, r2 } => {
                if total_modes != 2 {
                    return Err(Error::WrongModeCount {
                        expected: 2,
                        got: total_modes,
                    });
                }
                local_squeezers(r1, r2)
            }
            TransformSpec::TwoModeSqueezer { r } => {
                if total_modes != 2 {
                    return Err(Error::WrongModeCount {
                        expected: 2,
                        got: total_modes,
                    });
                }
                two_mode_squeezer(r)
            }
        }
    }

    /// True for kinds that always compile to orthogonal matrices.
    pub fn is_passive_kind(&self) -> bool {
        matches!(
            self,
            TransformSpec::BeamSplitter { .. } | TransformSpec::Rotation { .. }
        )
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: String,
    params: BTreeMap<String, f64>,
    modes: Vec<usize>,
}

impl<T: Scalar> Serialize for TransformSpec<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut params = BTreeMap::new();
        let (kind, modes) = match *self {
            TransformSpec::BeamSplitter { tau, modes } => {
                params.insert("tau".into(), to_f64(tau));
                ("beam_splitter", vec![modes.0, modes.1])
            }
            TransformSpec::Rotation { theta, mode } => {
                params.insert("theta".into(), to_f64(theta));
                ("rotation", vec![mode])
            }
            TransformSpec::Squeezer { r, mode } => {
                params.insert("r".into(), to_f64(r));
                ("squeezer", vec![mode])
            }
            TransformSpec::LocalSqueezers { r1, r2 } => {
                params.insert("r1".into(), to_f64(r1));
                params.insert("r2".into(), to_f64(r2));
                ("local_squeezers", vec![0, 1])
            }
            TransformSpec::TwoModeSqueezer { r } => {
                params.insert("r".into(), to_f64(r));
                ("two_mode_squeezer", vec![0, 1])
            }
        };
        RawSpec {
            kind: kind.into(),
            params,
            modes,
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for TransformSpec<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpec::deserialize(deserializer)?;
        let get = |key: &str| -> std::result::Result<T, D::Error> {
            raw.params
                .get(key)
                .map(|&v| num(v))
                .ok_or_else(|| D::Error::custom(format!("missing param {key}")))
        };
        match raw.kind.as_str() {
            "beam_splitter" => {
                if raw.modes.len() != 2 {
                    return Err(D::Error::custom("beam_splitter needs two modes"));
                }
                Ok(TransformSpec::BeamSplitter {
                    tau: get("tau")?,
                    modes: (raw.modes[0], raw.modes[1]),
                })
            }
            "rotation" => Ok(TransformSpec::Rotation {
                theta: get("theta")?,
                mode: *raw.modes.first().ok_or_else(|| D::Error::custom("rotation needs a mode"))?,
            }),
            "squeezer" => Ok(TransformSpec::Squeezer {
                r: get("r")?,
                mode: *raw.modes.first().ok_or_else(|| D::Error::custom("squeezer needs a mode"))?,
            }),
            "local_squeezers" => Ok(TransformSpec::LocalSqueezers {
                r1: get("r1")?,
                r2: get("r2")?,
            }),
            "two_mode_squeezer" => Ok(TransformSpec::TwoModeSqueezer { r: get("r")? }),
            other => Err(D::Error::custom(format!("unknown transform kind {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symp::max_abs_diff;
    use approx::assert_abs_diff_eq;

    #[test]
    fn beam_splitter_tau_one_is_identity() {
        let k = beam_splitter(1.0f64, (0, 1), 2).unwrap();
        assert!(max_abs_diff(k.matrix(), &DMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn balanced_beam_splitter_is_orthogonal() {
        let k = balanced_beam_splitter::<f64>();
        assert!(k.is_passive());
        assert!(k.symplectic_defect() < 1e-12);
        // entrywise pin of the convention
        let c = 0.5f64.sqrt();
        assert_abs_diff_eq!(k.matrix()[(0, 0)], c, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix()[(0, 2)], c, epsilon = 1e-15);
        assert_abs_diff_eq!(k.matrix()[(2, 0)], -c, epsilon = 1e-15);
    }

    #[test]
    fn passive_leaves_vacuum_invariant() {
        let k = beam_splitter(0.37f64, (0, 1), 2).unwrap();
        let out = apply(&k, &CovarianceMatrix::vacuum(2)).unwrap();
        assert!(max_abs_diff(out.matrix(), &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn beam_splitter_rejects_bad_params() {
        assert!(beam_splitter(1.5f64, (0, 1), 2).is_err());
        assert!(beam_splitter(0.5f64, (1, 1), 2).is_err());
        assert!(beam_splitter(0.5f64, (0, 3), 2).is_err());
    }

    #[test]
    fn rotation_conventions() {
        let k = rotation(0.0f64, 0, 1).unwrap();
        assert!(max_abs_diff(k.matrix(), &DMatrix::identity(2, 2)) < 1e-15);

        // theta = pi/2 swaps x and p up to sign: Diag(a, b) -> Diag(b, a)
        let k = rotation(std::f64::consts::FRAC_PI_2, 0, 1).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0f64, 7.0]));
        let out = k.sandwich(&d);
        assert_abs_diff_eq!(out[(0, 0)], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[(1, 1)], 3.0, epsilon = 1e-12);

        let fwd = rotation(0.3f64, 0, 2).unwrap();
        let bwd = rotation(-0.3f64, 0, 2).unwrap();
        assert!(max_abs_diff((&fwd * &bwd).matrix(), &DMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn local_squeezers_convention() {
        let s = local_squeezers(0.0f64, 0.0).unwrap();
        assert!(max_abs_diff(s.matrix(), &DMatrix::identity(4, 4)) < 1e-15);

        let (r1, r2) = (0.3f64, 0.2);
        let s = local_squeezers(r1, r2).unwrap();
        // entrywise: Diag(e^{-r1}, e^{r1}, e^{r2}, e^{-r2}) from S(r1) (+) S(-r2)
        assert_abs_diff_eq!(s.matrix()[(0, 0)], (-r1).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix()[(1, 1)], r1.exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix()[(2, 2)], r2.exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix()[(3, 3)], (-r2).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix().determinant(), 1.0, epsilon = 1e-12);

        let pi_d = diagonal_squeezed_state(r1, r2).unwrap();
        assert_abs_diff_eq!(pi_d.matrix()[(0, 0)], (-2.0 * r1).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(pi_d.matrix()[(1, 1)], (2.0 * r1).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(pi_d.matrix()[(2, 2)], (2.0 * r2).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(pi_d.matrix()[(3, 3)], (-2.0 * r2).exp(), epsilon = 1e-15);
    }

    #[test]
    fn two_mode_squeezer_identities() {
        let s = two_mode_squeezer(0.0f64).unwrap();
        assert!(max_abs_diff(s.matrix(), &DMatrix::identity(4, 4)) < 1e-14);

        let fwd = two_mode_squeezer(0.5f64).unwrap();
        let bwd = two_mode_squeezer(-0.5f64).unwrap();
        assert!(max_abs_diff((&fwd * &bwd).matrix(), &DMatrix::identity(4, 4)) < 1e-13);

        // explicit congruence form of the definition, entrywise
        let kbs = balanced_beam_splitter::<f64>();
        let inner = local_squeezers(-0.5f64, -0.5).unwrap();
        let explicit = &(&kbs * &inner) * &kbs.transpose();
        assert!(max_abs_diff(fwd.matrix(), explicit.matrix()) < 1e-12);
    }

    #[test]
    fn tmsv_is_pure_and_entangled() {
        let sigma = tmsv(0.5f64).unwrap();
        assert!(sigma.is_pure());
        let nus = sigma.symplectic_eigenvalues().unwrap();
        assert_abs_diff_eq!(nus[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(nus[1], 1.0, epsilon = 1e-9);
        assert!(!sigma.is_separable().unwrap());
        // analytic partial-transpose spectrum
        let nu_pt = sigma.partial_transpose().unwrap().nu_min().unwrap();
        assert_abs_diff_eq!(nu_pt, (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn apply_round_trip_and_trace_preservation() {
        let sigma = CovarianceMatrix::thermal(&[2.0f64, 3.0]).unwrap();
        let s1 = local_squeezers(0.4f64, -0.2).unwrap();
        let there = apply(&s1, &sigma).unwrap();
        let back = apply(&s1.inverse(), &there).unwrap();
        assert!(max_abs_diff(back.matrix(), sigma.matrix()) < 1e-10);

        let k = beam_splitter(0.3f64, (0, 1), 2).unwrap();
        let mixed = apply(&k, &sigma).unwrap();
        assert_abs_diff_eq!(mixed.trace(), sigma.trace(), epsilon = 1e-12);
    }

    #[test]
    fn compose_empty_and_inverse_pair() {
        let id = compose::<f64>(2, &[]).unwrap();
        assert!(max_abs_diff(id.matrix(), &DMatrix::identity(4, 4)) < 1e-15);

        let k = rotation(1.1f64, 1, 2).unwrap();
        let prod = compose(2, &[k.clone(), k.inverse()]).unwrap();
        assert!(max_abs_diff(prod.matrix(), &DMatrix::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn swapped_mode_pair_inverts_beam_splitter() {
        let k = beam_splitter(0.3f64, (0, 1), 3).unwrap();
        let k_rev = beam_splitter(0.3f64, (1, 0), 3).unwrap();
        assert!(max_abs_diff((&k * &k_rev).matrix(), &DMatrix::identity(6, 6)) < 1e-14);
    }

    #[test]
    fn spec_serde_round_trip() {
        let specs: Vec<TransformSpec<f64>> = vec![
            TransformSpec::BeamSplitter {
                tau: 0.25,
                modes: (0, 2),
            },
            TransformSpec::Rotation {
                theta: 1.25,
                mode: 1,
            },
            TransformSpec::LocalSqueezers { r1: 0.3, r2: -0.4 },
        ];
        let text = serde_json::to_string(&specs).unwrap();
        let back: Vec<TransformSpec<f64>> = serde_json::from_str(&text).unwrap();
        assert_eq!(specs, back);
    }
}
