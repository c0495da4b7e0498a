//! Seeded Monte-Carlo verification of the saturation property.
//!
//! Generates random two-mode states through their Williamson form,
//! pushes each through the maximization pipeline, and records how well
//! the output entanglement matches the h0[SOF] bound. Batches are
//! deterministic for a given master seed: every sample derives its own
//! seed by a counter-based split, so the parallel schedule cannot
//! change any record and any single sample can be reproduced alone.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::maxeof::maximize_eof_checked;
use crate::symp::SymplecticMatrix;
use crate::transforms::{apply, beam_splitter, compose, local_squeezers, rotation};

/// Sampling regime for the random-state generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratification {
    /// Thermal occupations and squeezings uniform over their full ranges.
    Uniform,
    /// Thermal occupations squeezed into [1, 1.05] to stress the
    /// near-pure regime where the noise term nearly vanishes.
    NearPure,
    /// Squeezings confined to the top quarter of their range.
    HighSqueeze,
}

impl fmt::Display for Stratification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stratification::Uniform => "uniform",
            Stratification::NearPure => "near-pure",
            Stratification::HighSqueeze => "high-squeeze",
        };
        f.write_str(s)
    }
}

impl FromStr for Stratification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Stratification::Uniform),
            "near-pure" | "near_pure" => Ok(Stratification::NearPure),
            "high-squeeze" | "high_squeeze" => Ok(Stratification::HighSqueeze),
            other => Err(Error::InvalidParams(format!(
                "unknown stratification {other:?} (expected uniform, near-pure, or high-squeeze)"
            ))),
        }
    }
}

/// Configuration for a verification batch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Thermal-occupation ceiling; occupations are drawn from [1, nu_max].
    pub nu_max: f64,
    /// Squeezing ceiling; squeezings are drawn from [0, r_max].
    pub r_max: f64,
    pub n_samples: usize,
    pub stratification: Stratification,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            nu_max: 5.0,
            r_max: 2.0,
            n_samples: 10_000,
            stratification: Stratification::Uniform,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_max >= 1.0 && self.nu_max.is_finite()) {
            return Err(Error::ParamOutOfRange {
                name: "nu_max",
                value: self.nu_max,
            });
        }
        if !(self.r_max >= 0.0 && self.r_max.is_finite()) {
            return Err(Error::ParamOutOfRange {
                name: "r_max",
                value: self.r_max,
            });
        }
        if self.n_samples == 0 {
            return Err(Error::ParamOutOfRange {
                name: "n_samples",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Outcome of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// Saturation and SOF-preservation contracts both held.
    Ok,
    /// The pipeline ran but the contract check stayed above tolerance.
    Unresolved,
    /// De-cross-correlation left a residual above tolerance.
    DccFailed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Ok => "OK",
            Status::Unresolved => "UNRESOLVED",
            Status::DccFailed => "DCC_FAILED",
        };
        f.write_str(s)
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "OK" => Ok(Status::Ok),
            "UNRESOLVED" => Ok(Status::Unresolved),
            "DCC_FAILED" => Ok(Status::DccFailed),
            other => Err(Error::InvalidParams(format!("unknown status {other:?}"))),
        }
    }
}

/// One harness sample. `error` is eof_out - h0_sof; a status of
/// [`Status::Ok`] certifies |error| <= 1e-6 and |sof_out - sof_in| <= 1e-6.
/// Fields that a failure mode leaves undefined are NaN.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_id: u64,
    pub seed: u64,
    pub sof_in: f64,
    pub sof_out: f64,
    pub eof_out: f64,
    pub h0_sof: f64,
    pub error: f64,
    pub dcc_residual: f64,
    pub status: Status,
    pub wall_time_ms: f64,
}

impl RunRecord {
    /// Field-wise equality ignoring wall time, with NaN equal to NaN.
    /// Wall time is the one record field that varies between reruns.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        fn eq(a: f64, b: f64) -> bool {
            a.to_bits() == b.to_bits()
        }
        self.sample_id == other.sample_id
            && self.seed == other.seed
            && eq(self.sof_in, other.sof_in)
            && eq(self.sof_out, other.sof_out)
            && eq(self.eof_out, other.eof_out)
            && eq(self.h0_sof, other.h0_sof)
            && eq(self.error, other.error)
            && eq(self.dcc_residual, other.dcc_residual)
            && self.status == other.status
    }
}

/// Batch statistics. Error moments are taken over samples whose error
/// is defined (finite); failures are visible through the status counts.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub n_samples: usize,
    pub ok: usize,
    pub unresolved: usize,
    pub dcc_failed: usize,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

impl Summary {
    pub fn all_ok(&self) -> bool {
        self.ok == self.n_samples
    }
}

/// Counter-based per-sample seed split (splitmix64 finalizer over the
/// master seed xored with a golden-ratio multiple of the sample id).
pub fn sample_seed(master: u64, sample_id: u64) -> u64 {
    let mut z = master ^ sample_id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random orthogonal symplectic built from random rectangular-mesh
/// angles: a triangular sweep of phase-plus-beam-splitter cells followed
/// by one rotation per mode, every angle uniform over [0, 2pi).
pub fn random_passive<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Result<SymplecticMatrix<f64>> {
    let tau = std::f64::consts::TAU;
    let mut ops: Vec<SymplecticMatrix<f64>> = Vec::new();
    for c in 0..n_modes.saturating_sub(1) {
        for r in ((c + 1)..n_modes).rev() {
            let phi: f64 = rng.random_range(0.0..tau);
            let omega: f64 = rng.random_range(0.0..tau);
            ops.push(rotation(phi, r - 1, n_modes)?);
            ops.push(beam_splitter(omega.cos().powi(2), (r - 1, r), n_modes)?);
        }
    }
    for m in 0..n_modes {
        let delta: f64 = rng.random_range(0.0..tau);
        ops.push(rotation(delta, m, n_modes)?);
    }
    compose(n_modes, &ops)
}

/// Random two-mode state through its Williamson form: thermal
/// occupations uniform in [1, nu_max], sandwiched by passive-squeezer-
/// passive with squeezings uniform in [0, r_max]. Physical by
/// construction. Stratification presets narrow the occupation range to
/// [1, 1.05] (near-pure) or the squeezing range to its top quarter
/// (high-squeeze).
pub fn random_state<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<CovarianceMatrix<f64>> {
    cfg.validate()?;
    let (nu_lo, nu_hi) = match cfg.stratification {
        Stratification::NearPure => (1.0, 1.0 + 0.05f64.min(cfg.nu_max - 1.0)),
        _ => (1.0, cfg.nu_max),
    };
    let (r_lo, r_hi) = match cfg.stratification {
        Stratification::HighSqueeze => (0.75 * cfg.r_max, cfg.r_max),
        _ => (0.0, cfg.r_max),
    };
    let range = |lo: f64, hi: f64, rng: &mut R| -> f64 {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    let nu1 = range(nu_lo, nu_hi, rng);
    let nu2 = range(nu_lo, nu_hi, rng);
    let r1 = range(r_lo, r_hi, rng);
    let r2 = range(r_lo, r_hi, rng);
    let k1 = random_passive(2, rng)?;
    let k2 = random_passive(2, rng)?;
    let s = compose(2, &[k2, local_squeezers(r1, r2)?, k1])?;
    apply(&s, &CovarianceMatrix::thermal(&[nu1, nu2])?)
}

fn nan_record(sample_id: u64, seed: u64, status: Status, elapsed_ms: f64) -> RunRecord {
    RunRecord {
        sample_id,
        seed,
        sof_in: f64::NAN,
        sof_out: f64::NAN,
        eof_out: f64::NAN,
        h0_sof: f64::NAN,
        error: f64::NAN,
        dcc_residual: f64::NAN,
        status,
        wall_time_ms: elapsed_ms,
    }
}

/// Runs one sample end to end. Failures never abort the batch; they
/// are folded into the record's status.
pub fn run_sample(cfg: &GeneratorConfig, sample_id: u64) -> RunRecord {
    let seed = sample_seed(cfg.seed, sample_id);
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = match random_state(cfg, &mut rng) {
        Ok(s) => s,
        Err(_) => {
            return nan_record(
                sample_id,
                seed,
                Status::Unresolved,
                start.elapsed().as_secs_f64() * 1e3,
            )
        }
    };
    let outcome = maximize_eof_checked(&sigma, seed);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((_, trace, check)) => RunRecord {
            sample_id,
            seed,
            sof_in: check.sof_in,
            sof_out: check.sof_out,
            eof_out: check.eof_out,
            h0_sof: check.h0_sof,
            error: check.gap,
            dcc_residual: trace.dcc_residual,
            status: Status::Ok,
            wall_time_ms: elapsed_ms,
        },
        Err(Error::ConjectureGap(report)) => RunRecord {
            sample_id,
            seed,
            sof_in: report.sof_in,
            sof_out: report.sof_out,
            eof_out: report.eof_out,
            h0_sof: report.h0_sof,
            error: report.gap,
            dcc_residual: report.dcc_residual,
            status: Status::Unresolved,
            wall_time_ms: elapsed_ms,
        },
        Err(Error::DccFailed { residual }) => {
            let mut rec = nan_record(sample_id, seed, Status::DccFailed, elapsed_ms);
            rec.dcc_residual = residual;
            rec
        }
        Err(_) => nan_record(sample_id, seed, Status::Unresolved, elapsed_ms),
    }
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    let mut summary = Summary {
        n_samples: records.len(),
        ok: 0,
        unresolved: 0,
        dcc_failed: 0,
        mean_abs_error: 0.0,
        max_abs_error: 0.0,
    };
    let mut defined = 0usize;
    let mut sum = 0.0f64;
    for r in records {
        match r.status {
            Status::Ok => summary.ok += 1,
            Status::Unresolved => summary.unresolved += 1,
            Status::DccFailed => summary.dcc_failed += 1,
        }
        if r.error.is_finite() {
            defined += 1;
            sum += r.error.abs();
            summary.max_abs_error = summary.max_abs_error.max(r.error.abs());
        }
    }
    if defined > 0 {
        summary.mean_abs_error = sum / defined as f64;
    }
    summary
}

/// Runs the whole batch with a work-stealing parallel map over samples.
/// Records come back ordered by sample id and are identical for a given
/// config no matter the degree of parallelism.
pub fn run_batch(cfg: &GeneratorConfig) -> Result<(Vec<RunRecord>, Summary)> {
    cfg.validate()?;
    let records: Vec<RunRecord> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|id| run_sample(cfg, id))
        .collect();
    let summary = summarize(&records);
    Ok((records, summary))
}

pub const CSV_HEADER: [&str; 10] = [
    "sample_id",
    "seed",
    "sof_in",
    "sof_out",
    "eof_out",
    "h0_sof",
    "error",
    "dcc_residual",
    "status",
    "wall_time_ms",
];

fn fmt_float(x: f64) -> String {
    // 17 significant digits round-trip f64 exactly
    format!("{x:.16e}")
}

/// Writes records as CSV; floats carry 17 significant digits so the
/// file round-trips bit for bit.
pub fn write_results<P: AsRef<Path>>(records: &[RunRecord], path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.sample_id.to_string(),
            r.seed.to_string(),
            fmt_float(r.sof_in),
            fmt_float(r.sof_out),
            fmt_float(r.eof_out),
            fmt_float(r.h0_sof),
            fmt_float(r.error),
            fmt_float(r.dcc_residual),
            r.status.to_string(),
            fmt_float(r.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV written by [`write_results`].
pub fn read_results<P: AsRef<Path>>(path: P) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let parse = |s: &str, name: &'static str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| {
            Error::InvalidParams(format!("bad float in column {name}: {s:?}"))
        })
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != CSV_HEADER.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} columns, got {}",
                CSV_HEADER.len(),
                row.len()
            )));
        }
        let int = |s: &str, name: &'static str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| {
                Error::InvalidParams(format!("bad integer in column {name}: {s:?}"))
            })
        };
        out.push(RunRecord {
            sample_id: int(&row[0], "sample_id")?,
            seed: int(&row[1], "seed")?,
            sof_in: parse(&row[2], "sof_in")?,
            sof_out: parse(&row[3], "sof_out")?,
            eof_out: parse(&row[4], "eof_out")?,
            h0_sof: parse(&row[5], "h0_sof")?,
            error: parse(&row[6], "error")?,
            dcc_residual: parse(&row[7], "dcc_residual")?,
            status: row[8].parse()?,
            wall_time_ms: parse(&row[9], "wall_time_ms")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::williamson;
    use approx::assert_abs_diff_eq;

    #[test]
    fn random_passive_is_orthogonal_symplectic() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for n in 1..=3usize {
            for _ in 0..20 {
                let k = random_passive(n, &mut rng).unwrap();
                assert!(k.symplectic_defect() <= 1e-10);
                assert!(k.passivity_defect() <= 1e-10);
            }
        }
    }

    #[test]
    fn random_passive_preserves_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let cfg = GeneratorConfig::default();
        for _ in 0..20 {
            let sigma = random_state(&cfg, &mut rng).unwrap();
            let k = random_passive(2, &mut rng).unwrap();
            let moved = apply(&k, &sigma).unwrap();
            assert_abs_diff_eq!(moved.trace(), sigma.trace(), epsilon = 1e-9);
        }
    }

    #[test]
    fn single_mode_passive_angles_cover_the_circle() {
        // Kolmogorov-Smirnov sanity check on the rotation angle of
        // random one-mode passives against the uniform law on [0, 2pi).
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n = 10_000usize;
        let mut angles: Vec<f64> = (0..n)
            .map(|_| {
                let k = random_passive(1, &mut rng).unwrap();
                let m = k.matrix();
                let theta = (-m[(0, 1)]).atan2(m[(0, 0)]);
                theta.rem_euclid(std::f64::consts::TAU)
            })
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d = 0.0f64;
        for (i, a) in angles.iter().enumerate() {
            let cdf = a / std::f64::consts::TAU;
            d = d.max((cdf - i as f64 / n as f64).abs());
            d = d.max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        // p > 0.01 corresponds to sqrt(n) D < 1.63
        assert!((n as f64).sqrt() * d < 1.63, "KS statistic {d}");
    }

    #[test]
    fn degenerate_config_yields_vacuum() {
        let cfg = GeneratorConfig {
            nu_max: 1.0,
            r_max: 0.0,
            ..GeneratorConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let sigma = random_state(&cfg, &mut rng).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(sigma.matrix()[(i, j)], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn random_states_are_physical_and_round_trip_williamson() {
        let cfg = GeneratorConfig::default();
        for s in 0..30u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(sample_seed(99, s));
            let sigma = random_state(&cfg, &mut rng).unwrap();
            assert!(sigma.is_physical().unwrap());
            let nus = williamson(&sigma).unwrap().nus;
            for nu in nus {
                assert!(nu >= 1.0 - 1e-9);
                assert!(nu <= cfg.nu_max + 1e-6);
            }
        }
    }

    #[test]
    fn stratification_presets_respect_ranges() {
        let near = GeneratorConfig {
            stratification: Stratification::NearPure,
            ..GeneratorConfig::default()
        };
        for s in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(s);
            let sigma = random_state(&near, &mut rng).unwrap();
            for nu in williamson(&sigma).unwrap().nus {
                assert!(nu <= 1.05 + 1e-8, "nu = {nu}");
            }
        }
    }

    #[test]
    fn small_batch_all_ok_and_deterministic() {
        let cfg = GeneratorConfig {
            seed: 21,
            n_samples: 6,
            ..GeneratorConfig::default()
        };
        let (records, summary) = run_batch(&cfg).unwrap();
        assert_eq!(summary.n_samples, 6);
        assert!(summary.all_ok(), "{summary:?}");
        assert!(summary.mean_abs_error <= 1e-6);
        let (again, _) = run_batch(&cfg).unwrap();
        for (a, b) in records.iter().zip(again.iter()) {
            assert!(a.same_outcome(b));
        }
    }

    #[test]
    fn csv_round_trip() {
        let cfg = GeneratorConfig {
            seed: 5,
            n_samples: 3,
            ..GeneratorConfig::default()
        };
        let (records, _) = run_batch(&cfg).unwrap();
        let dir = std::env::temp_dir().join("entpot-harness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("batch.csv");
        write_results(&records, &path).unwrap();
        let loaded = read_results(&path).unwrap();
        assert_eq!(loaded.len(), records.len());
        for (a, b) in records.iter().zip(loaded.iter()) {
            assert!(a.same_outcome(b));
            assert_eq!(a.wall_time_ms.to_bits(), b.wall_time_ms.to_bits());
        }
        let empty_path = dir.join("empty.csv");
        write_results(&[], &empty_path).unwrap();
        let text = std::fs::read_to_string(&empty_path).unwrap();
        assert_eq!(text.trim(), CSV_HEADER.join(","));
        assert!(read_results(&empty_path).unwrap().is_empty());
    }
}
