//! Design optimization on SE predictions: quantizer step sizes, the PQN
//! variance, and the share of full-precision antennas.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, PqnVariance};
use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::quantizer::AdcSpec;
use crate::state_evolution::{se_fixed_point, MixedProfile, SeConfig, SeProblem};

/// Figure of merit minimized by the tuning routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ber,
    Mse,
}

/// Setting in which a step size is optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneObjective {
    pub metric: Metric,
    pub detector: DetectorKind,
    pub constellation: Constellation,
    pub lambda: f64,
    pub noise_variance: f64,
    pub bits: u32,
    pub pqn: PqnVariance,
}

impl TuneObjective {
    pub fn validate(&self) -> Result<()> {
        if self.metric == Metric::Ber && self.constellation != Constellation::Qpsk {
            return Err(Error::InvalidConfig("the BER metric is defined for QPSK only".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        AdcSpec::finite(self.bits, 1.0)?;
        Ok(())
    }

    /// The step size has no effect: 1-bit cells are half-lines under the exact likelihood.
    pub fn step_irrelevant(&self) -> bool {
        self.detector == DetectorKind::DqOptimal && self.bits == 1
    }
}

/// SE-predicted metric of a detector on a mixed profile.
pub fn profile_metric(
    metric: Metric,
    detector: DetectorKind,
    constellation: &Constellation,
    profile: MixedProfile,
    noise_variance: f64,
    pqn: PqnVariance,
    cfg: &SeConfig,
) -> Result<f64> {
    let problem = SeProblem::for_detector(detector, constellation.clone(), profile, noise_variance, pqn);
    let fp = se_fixed_point(&problem, cfg)?;
    match metric {
        Metric::Ber => fp.ber(),
        Metric::Mse => fp.mse(),
    }
}

/// SE-predicted metric at step size `step`.
pub fn step_metric(objective: &TuneObjective, step: f64, cfg: &SeConfig) -> Result<f64> {
    let profile = MixedProfile::single(AdcSpec::finite(objective.bits, step)?, objective.lambda)?;
    profile_metric(
        objective.metric,
        objective.detector,
        &objective.constellation,
        profile,
        objective.noise_variance,
        objective.pqn,
        cfg,
    )
}

/// Search bracket and resolution for [`optimize_step_size`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSearch {
    pub lower: f64,
    pub upper: f64,
    /// Absolute tolerance on the step size.
    pub tol: f64,
    /// Log-spaced points used to bracket the minimum.
    pub coarse_points: usize,
    /// Log-spaced points of the fallback grid search.
    pub fallback_points: usize,
}

impl Default for StepSearch {
    fn default() -> Self {
        StepSearch { lower: 0.01, upper: 8.0, tol: 1e-3, coarse_points: 60, fallback_points: 400 }
    }
}

/// Outcome of a step-size optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOptimum {
    /// The metric does not depend on the step size.
    Irrelevant,
    Found {
        step: f64,
        metric: f64,
        /// The coarse scan found several local minima and the dense grid minimizer was returned.
        grid_fallback: bool,
    },
}

impl StepOptimum {
    pub fn step(&self) -> Option<f64> {
        match self {
            StepOptimum::Irrelevant => None,
            StepOptimum::Found { step, .. } => Some(*step),
        }
    }
}

/// Minimizes the SE-predicted metric over the step size.
///
/// A log-spaced scan brackets the minimum, and golden-section search refines it
/// on `ln(metric)` to `search.tol`. If the scan shows more than one local
/// minimum, the minimizer of a dense log-spaced grid is returned instead.
pub fn optimize_step_size(objective: &TuneObjective, search: &StepSearch, cfg: &SeConfig) -> Result<StepOptimum> {
    objective.validate()?;
    if objective.step_irrelevant() {
        return Ok(StepOptimum::Irrelevant);
    }
    if !(search.lower > 0.0 && search.upper > search.lower && search.tol > 0.0) || search.coarse_points < 3 {
        return Err(Error::InvalidConfig("invalid step search bracket".into()));
    }
    let f = |step: f64| -> Result<f64> { Ok(step_metric(objective, step, cfg)?.max(1e-300).ln()) };

    let grid = log_grid(search.lower, search.upper, search.coarse_points);
    let values = grid.iter().map(|&s| f(s)).collect::<Result<Vec<_>>>()?;
    let minima = local_minima(&values);
    if minima.len() > 1 {
        let dense = log_grid(search.lower, search.upper, search.fallback_points.max(3));
        let dense_values = dense.iter().map(|&s| f(s)).collect::<Result<Vec<_>>>()?;
        let best = argmin(&dense_values);
        return Ok(StepOptimum::Found { step: dense[best], metric: dense_values[best].exp(), grid_fallback: true });
    }
    let best = argmin(&values);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (step, value) = golden_section(lo, hi, search.tol, f)?;
    let (step, value) = if value <= values[best] { (step, value) } else { (grid[best], values[best]) };
    Ok(StepOptimum::Found { step, metric: value.exp(), grid_fallback: false })
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Indices of strict local minima, treating runs of equal values as one point.
fn local_minima(v: &[f64]) -> Vec<usize> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-9 * scale;
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && eq(v[j + 1], v[i]) {
            j += 1;
        }
        let left_higher = i == 0 || v[i - 1] > v[i];
        let right_higher = j + 1 == v.len() || v[j + 1] > v[j];
        if left_higher && right_higher && !(i == 0 && j + 1 == v.len()) {
            out.push(i + (j - i) / 2);
        }
        i = j + 1;
    }
    out
}

/// Golden-section minimization on `[lo, hi]` to absolute width `tol`.
pub fn golden_section(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// `sqrt(2) delta / sqrt(1 + sigma_n^2)`: the step relative to the per-dimension
/// standard deviation of the received signal.
pub fn normalize_step(step: f64, noise_variance: f64) -> f64 {
    std::f64::consts::SQRT_2 * step / (1.0 + noise_variance).sqrt()
}

/// Normalized optimal step averaged over SNRs (in dB).
pub fn average_normalized_step(
    template: &TuneObjective,
    snr_db: &[f64],
    search: &StepSearch,
    cfg: &SeConfig,
) -> Result<f64> {
    if snr_db.is_empty() {
        return Err(Error::InvalidConfig("empty SNR grid".into()));
    }
    let norms = snr_db
        .par_iter()
        .map(|&snr| {
            let noise_variance = crate::noise_variance_from_db(snr);
            let obj = TuneObjective { noise_variance, ..template.clone() };
            match optimize_step_size(&obj, search, cfg)? {
                StepOptimum::Found { step, .. } => Ok(normalize_step(step, noise_variance)),
                StepOptimum::Irrelevant => Err(Error::InvalidConfig("step size is irrelevant here".into())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(norms.iter().sum::<f64>() / norms.len() as f64)
}

/// Metric values over a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `(parameter, metric)`, sorted by parameter.
    pub grid: Vec<(f64, f64)>,
    /// Grid point with the smallest metric.
    pub optimum: (f64, f64),
}

impl SweepResult {
    fn from_grid(mut grid: Vec<(f64, f64)>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("empty sweep grid".into()));
        }
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        let optimum = grid.iter().copied().fold(grid[0], |best, p| if p.1 < best.1 { p } else { best });
        Ok(SweepResult { grid, optimum })
    }
}

/// Context of a PQN-variance sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaQContext {
    pub lambda: f64,
    pub spec: AdcSpec,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaQSweep {
    pub result: SweepResult,
    /// `(delta^2 / 12, MSE)`.
    pub heuristic: (f64, f64),
}

/// MSE of the PDQ detector (Gaussian input) as a function of the assumed `sigma_q^2`.
pub fn sweep_sigma_q(grid: &[f64], ctx: &SigmaQContext, cfg: &SeConfig) -> Result<SigmaQSweep> {
    if grid.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidConfig("sigma_q^2 values must be nonnegative".into()));
    }
    let eval = |sq: f64| -> Result<f64> {
        let profile = MixedProfile::single(ctx.spec, ctx.lambda)?;
        profile_metric(
            Metric::Mse,
            DetectorKind::PdqOptimal,
            &Constellation::Gaussian,
            profile,
            ctx.noise_variance,
            PqnVariance::Fixed(sq),
            cfg,
        )
    };
    let points = grid.par_iter().map(|&sq| Ok((sq, eval(sq)?))).collect::<Result<Vec<_>>>()?;
    let h = PqnVariance::UniformCell.variance(&ctx.spec);
    Ok(SigmaQSweep { result: SweepResult::from_grid(points)?, heuristic: (h, eval(h)?) })
}

/// Context of a full-precision-fraction sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedContext {
    pub lambda: f64,
    /// Low-resolution ADC used by the DQ detector.
    pub dq_spec: AdcSpec,
    /// Low-resolution ADC used by the PDQ detector.
    pub pdq_spec: AdcSpec,
    pub noise_variance: f64,
    pub constellation: Constellation,
    pub metric: Metric,
    pub pqn: PqnVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSweep {
    pub dq: SweepResult,
    pub pdq: SweepResult,
}

/// Metric versus the fraction `f` of full-precision antennas for the DQ and PDQ detectors.
pub fn sweep_mixed_profile(fractions: &[f64], ctx: &MixedContext, cfg: &SeConfig) -> Result<MixedSweep> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidConfig(format!("fraction {f} outside [0, 1]")));
    }
    let eval = |detector: DetectorKind, spec: AdcSpec, f: f64| -> Result<(f64, f64)> {
        let profile = MixedProfile::with_full_precision(spec, ctx.lambda, f)?;
        let m = profile_metric(ctx.metric, detector, &ctx.constellation, profile, ctx.noise_variance, ctx.pqn, cfg)?;
        Ok((f, m))
    };
    let dq = fractions
        .par_iter()
        .map(|&f| eval(DetectorKind::DqOptimal, ctx.dq_spec, f))
        .collect::<Result<Vec<_>>>()?;
    let pdq = fractions
        .par_iter()
        .map(|&f| eval(DetectorKind::PdqOptimal, ctx.pdq_spec, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixedSweep { dq: SweepResult::from_grid(dq)?, pdq: SweepResult::from_grid(pdq)? })
}
