//! Monte Carlo experiments and their comparison against state evolution.
//!
//! Every trial draws its channel, symbols and noise from
//! [`trial_seed`]`(base_seed, snr_index, trial)`, so results do not depend on
//! the order or number of worker threads. Trials run in parallel and are
//! reduced sequentially in trial order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{gamp_run_observed, hard_decision, DetectorKind, GampConfig, OutputChannel, PqnVariance};
use crate::error::{Error, Result};
use crate::model::{received_signal, sample_channel, sample_symbols, trial_seed, Constellation, SystemConfig};
use crate::quantizer::{quantize_vector, AdcBank};
use crate::state_evolution::{se_fixed_point, se_trajectory, MixedProfile, SeConfig, SeProblem};

/// Detector under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    #[serde(default)]
    pub pqn: PqnVariance,
}

/// A Monte Carlo experiment over an SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Dimensions and input distribution; the noise variance is taken from `snr_grid_db`.
    pub system: SystemConfig,
    pub bank: AdcBank,
    pub detector: DetectorSpec,
    pub gamp: GampConfig,
    pub trials: usize,
    pub base_seed: u64,
    pub snr_grid_db: Vec<f64>,
    /// Record the per-iteration MSE of every trial.
    pub record_trajectory: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.gamp.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.bank.len() != self.system.num_antennas {
            return Err(Error::DimensionMismatch {
                expected: self.system.num_antennas,
                actual: self.bank.len(),
                context: "ADC bank length",
            });
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("SNR {s} dB is not finite")));
        }
        self.detector.kind.denoiser(&self.system.constellation).validate()
    }

    /// Stable 64-bit fingerprint (FNV-1a of the debug representation).
    pub fn fingerprint(&self) -> u64 {
        let text = format!("{self:?}");
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    }
}

/// Aggregate of all trials at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRecord {
    pub snr_db: f64,
    pub noise_variance: f64,
    /// `bit_errors / bits_total`; `None` when the input has no bit mapping.
    pub ber: Option<f64>,
    pub ber_stderr: Option<f64>,
    pub mse: f64,
    pub mse_stderr: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub trials_run: usize,
    pub nonconverged: usize,
    /// Mean `||x^t - x||^2 / K` per iteration (empty unless recorded).
    pub mse_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<SnrRecord>,
    pub spec_fingerprint: u64,
    pub base_seed: u64,
}

struct TrialOutcome {
    bit_errors: u64,
    bits: u64,
    sq_error: f64,
    trajectory: Vec<f64>,
}

/// Runs the experiment on the global thread pool.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let records = spec
        .snr_grid_db
        .iter()
        .enumerate()
        .map(|(idx, &snr_db)| run_snr(spec, idx as u64, snr_db))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { records, spec_fingerprint: spec.fingerprint(), base_seed: spec.base_seed })
}

/// Runs the experiment on a dedicated pool of `threads` workers.
pub fn run_monte_carlo_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_monte_carlo(spec))
}

fn run_snr(spec: &ExperimentSpec, snr_index: u64, snr_db: f64) -> Result<SnrRecord> {
    let noise_variance = crate::noise_variance_from_db(snr_db);
    let system = SystemConfig { noise_variance, ..spec.system.clone() };
    let output = OutputChannel::build(spec.detector.kind.output_kind(spec.detector.pqn), &spec.bank, noise_variance)?;
    let outcomes: Vec<Result<TrialOutcome>> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, &system, &output, trial_seed(spec.base_seed, snr_index, t)))
        .collect();

    let k = system.num_users as f64;
    let with_bits = system.constellation == Constellation::Qpsk;
    let mut bit_errors = 0u64;
    let mut bits_total = 0u64;
    let mut mse_sum = 0.0;
    let mut mse_sq_sum = 0.0;
    let mut trials_run = 0usize;
    let mut nonconverged = 0usize;
    let mut trajectory = vec![0.0; if spec.record_trajectory { spec.gamp.max_iterations } else { 0 }];
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                trials_run += 1;
                bit_errors += o.bit_errors;
                bits_total += o.bits;
                let m = o.sq_error / k;
                mse_sum += m;
                mse_sq_sum += m * m;
                for (acc, v) in trajectory.iter_mut().zip(&o.trajectory) {
                    *acc += v;
                }
            }
            Err(Error::InvalidConfig(msg)) => return Err(Error::InvalidConfig(msg)),
            Err(_) => nonconverged += 1,
        }
    }
    let n = trials_run as f64;
    let (mse, mse_stderr) = if trials_run > 0 {
        let mean = mse_sum / n;
        let var = if trials_run > 1 { ((mse_sq_sum - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        (mean, (var / n).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let (ber, ber_stderr) = if with_bits && bits_total > 0 {
        let p = bit_errors as f64 / bits_total as f64;
        (Some(p), Some((p * (1.0 - p) / bits_total as f64).sqrt()))
    } else {
        (None, None)
    };
    for v in trajectory.iter_mut() {
        *v /= n;
    }
    Ok(SnrRecord {
        snr_db,
        noise_variance,
        ber,
        ber_stderr,
        mse,
        mse_stderr,
        bit_errors,
        bits_total,
        trials_run,
        nonconverged,
        mse_trajectory: trajectory,
    })
}

fn run_trial(spec: &ExperimentSpec, system: &SystemConfig, output: &OutputChannel, seed: u64) -> Result<TrialOutcome> {
    let channel = sample_channel(system, seed);
    let x = sample_symbols(&system.constellation, system.num_users, seed)?;
    let y = received_signal(&channel, &x, system.noise_variance, seed)?;
    let r = quantize_vector(&y, &spec.bank)?;
    let denoiser = spec.detector.kind.denoiser(&system.constellation);

    let mut trajectory = Vec::new();
    let result = gamp_run_observed(&channel, &r, output, &denoiser, &spec.gamp, |st| {
        if spec.record_trajectory {
            trajectory.push(sq_error(&st.x, &x) / system.num_users as f64);
        }
    })?;
    if spec.record_trajectory {
        let last = *trajectory.last().expect("at least one iteration");
        trajectory.resize(spec.gamp.max_iterations, last);
    }

    let (bit_errors, bits) = if system.constellation == Constellation::Qpsk {
        let decided = hard_decision(&result.estimate, &system.constellation)?;
        let errors = decided
            .iter()
            .zip(&x)
            .map(|(d, t)| ((d.re < 0.0) != (t.re < 0.0)) as u64 + ((d.im < 0.0) != (t.im < 0.0)) as u64)
            .sum();
        (errors, 2 * system.num_users as u64)
    } else {
        (0, 0)
    };
    Ok(TrialOutcome { bit_errors, bits, sq_error: sq_error(&result.estimate, &x), trajectory })
}

fn sq_error(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum()
}

/// SE and Monte Carlo side by side at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub snr_db: f64,
    /// SE BER after as many iterations as the detector runs.
    pub se_ber: Option<f64>,
    /// SE BER at the fixed point.
    pub se_ber_fixed_point: Option<f64>,
    pub mc_ber: Option<f64>,
    pub mc_ber_stderr: Option<f64>,
    pub se_mse: f64,
    pub mc_mse: f64,
    /// `|mc - se| / se`.
    pub ber_rel_gap: Option<f64>,
    pub mse_rel_gap: f64,
    pub se_mse_trajectory: Vec<f64>,
    pub mc_mse_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// Runs the experiment (with trajectories) and the matching SE recursion.
pub fn compare_se_vs_mc(spec: &ExperimentSpec, cfg: &SeConfig) -> Result<ComparisonReport> {
    let spec = ExperimentSpec { record_trajectory: true, ..spec.clone() };
    let mc = run_monte_carlo(&spec)?;
    let profile = MixedProfile::from_bank(&spec.bank, spec.system.num_users)?;
    let qpsk = spec.system.constellation == Constellation::Qpsk;
    let rows = mc
        .records
        .into_iter()
        .map(|rec| {
            let problem = SeProblem::for_detector(
                spec.detector.kind,
                spec.system.constellation.clone(),
                profile.clone(),
                rec.noise_variance,
                spec.detector.pqn,
            );
            let traj = se_trajectory(&problem, cfg, spec.gamp.max_iterations)?;
            let last = traj.last().expect("at least one iteration");
            let fp = se_fixed_point(&problem, cfg)?;
            let se_ber = if qpsk { Some(last.ber()?) } else { None };
            let se_mse = last.mse()?;
            let ber_rel_gap = match (se_ber, rec.ber) {
                (Some(s), Some(m)) if s > 0.0 => Some((m - s).abs() / s),
                _ => None,
            };
            Ok(ComparisonRow {
                snr_db: rec.snr_db,
                se_ber,
                se_ber_fixed_point: if qpsk { Some(fp.ber()?) } else { None },
                mc_ber: rec.ber,
                mc_ber_stderr: rec.ber_stderr,
                se_mse,
                mc_mse: rec.mse,
                ber_rel_gap,
                mse_rel_gap: (rec.mse - se_mse).abs() / se_mse,
                se_mse_trajectory: traj.iter().map(|it| it.mse()).collect::<Result<Vec<_>>>()?,
                mc_mse_trajectory: rec.mse_trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { rows })
}
