//! JSON run configurations.
//!
//! Every file carries a `"command"` tag naming the subcommand it drives.

use std::path::Path;

use mixadc::detectors::{DetectorKind, GampConfig, PqnVariance};
use mixadc::model::Constellation;
use mixadc::quantizer::{AdcBank, AdcSpec};
use mixadc::state_evolution::{MixedProfile, SeConfig};
use mixadc::tuning::{Metric, StepSearch};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Config {
    Simulate(ExperimentConfig),
    SePredict(ExperimentConfig),
    TuneStep(TuneConfig),
    SweepMixed(SweepConfig),
}

impl Config {
    pub fn command(&self) -> &'static str {
        match self {
            Config::Simulate(_) => "simulate",
            Config::SePredict(_) => "se-predict",
            Config::TuneStep(_) => "tune-step",
            Config::SweepMixed(_) => "sweep-mixed",
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            Config::Simulate(c) => c.validate(false),
            Config::SePredict(c) => c.validate(true),
            Config::TuneStep(c) => c.validate(),
            Config::SweepMixed(c) => c.validate(),
        }
    }
}

/// Reads and parses a configuration; parse errors carry line and column.
pub fn load(path: &Path) -> Result<(Config, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((config, bytes))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// One ADC group: omit `bits` for full-precision converters. Its size is
/// either an antenna `count` or a `share` of all antennas; a lone group
/// defaults to every antenna.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcGroup {
    #[serde(default)]
    pub bits: Option<u32>,
    #[serde(default)]
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl AdcGroup {
    pub fn spec(&self) -> Result<AdcSpec, CliError> {
        match self.bits {
            Some(b) => AdcSpec::finite(b, self.step).map_err(|e| invalid(e.to_string())),
            None => Ok(AdcSpec::infinite()),
        }
    }
}

/// Fraction of the antennas in each group.
pub fn shares(groups: &[AdcGroup], num_antennas: usize) -> Result<Vec<f64>, CliError> {
    if groups.is_empty() {
        return Err(invalid("adc needs at least one group"));
    }
    for g in groups {
        g.spec()?;
        if g.share.is_some() && g.count.is_some() {
            return Err(invalid("an adc group takes share or count, not both"));
        }
    }
    if groups.len() == 1 && groups[0].share.is_none() && groups[0].count.is_none() {
        return Ok(vec![1.0]);
    }
    if groups.iter().all(|g| g.count.is_some()) {
        let total: usize = groups.iter().filter_map(|g| g.count).sum();
        if total != num_antennas {
            return Err(invalid(format!("adc counts sum to {total}, expected num_antennas = {num_antennas}")));
        }
        return Ok(groups.iter().map(|g| g.count.unwrap_or(0) as f64 / num_antennas as f64).collect());
    }
    if !groups.iter().all(|g| g.share.is_some()) {
        return Err(invalid("give every adc group a share, or every group a count"));
    }
    let shares: Vec<f64> = groups.iter().filter_map(|g| g.share).collect();
    if let Some(s) = shares.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(invalid(format!("share {s} outside [0, 1]")));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("adc shares sum to {total}, expected 1")));
    }
    Ok(shares)
}

/// `bits` and `steps` CSV labels, e.g. `1:0.95+inf:0.05` and `0.5+-`.
pub fn labels(groups: &[AdcGroup], num_antennas: usize) -> Result<(String, String), CliError> {
    let shares = shares(groups, num_antennas)?;
    let bits: Vec<String> = groups
        .iter()
        .zip(&shares)
        .map(|(g, s)| {
            let b = g.bits.map_or("inf".to_string(), |b| b.to_string());
            if groups.len() > 1 {
                format!("{b}:{s}")
            } else {
                b
            }
        })
        .collect();
    let steps: Vec<String> = groups.iter().map(|g| if g.bits.is_some() { g.step.to_string() } else { "-".into() }).collect();
    Ok((bits.join("+"), steps.join("+")))
}

/// Ordered antenna assignment; shares are rounded cumulatively.
pub fn bank(groups: &[AdcGroup], num_antennas: usize) -> Result<AdcBank, CliError> {
    let shares = shares(groups, num_antennas)?;
    let mut assignment = Vec::with_capacity(num_antennas);
    let mut cumulative = 0.0;
    for (i, (g, s)) in groups.iter().zip(&shares).enumerate() {
        cumulative += s;
        let end = match g.count {
            Some(c) => assignment.len() + c,
            None if i + 1 == groups.len() => num_antennas,
            None => (cumulative * num_antennas as f64).round() as usize,
        };
        let spec = g.spec()?;
        while assignment.len() < end.min(num_antennas) {
            assignment.push(spec);
        }
    }
    AdcBank::new(assignment).map_err(|e| invalid(e.to_string()))
}

/// Group loads `share * lambda`.
pub fn profile(groups: &[AdcGroup], num_antennas: usize, lambda: f64) -> Result<MixedProfile, CliError> {
    let shares = shares(groups, num_antennas)?;
    let entries = groups.iter().zip(&shares).map(|(g, s)| Ok((g.spec()?, s * lambda))).collect::<Result<Vec<_>, CliError>>()?;
    MixedProfile::new(entries).map_err(|e| invalid(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub detector: DetectorKind,
    pub adc: Vec<AdcGroup>,
}

/// Monte Carlo (`simulate`) or SE (`se-predict`) over an SNR grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    #[serde(default = "qpsk")]
    pub constellation: Constellation,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// `se-predict` only: evaluate these loads instead of `num_antennas / num_users`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub pqn: PqnVariance,
    #[serde(default)]
    pub gamp: GampConfig,
    #[serde(default)]
    pub se: SeConfig,
    pub runs: Vec<RunConfig>,
}

fn qpsk() -> Constellation {
    Constellation::Qpsk
}

fn default_trials() -> usize {
    1000
}

fn check_snr(grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(invalid("snr_db grid is empty"));
    }
    if grid.iter().any(|s| !s.is_finite()) {
        return Err(invalid("snr_db values must be finite"));
    }
    Ok(())
}

fn check_lambda(grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(invalid("lambda values must be positive and finite"));
    }
    Ok(())
}

impl ExperimentConfig {
    fn validate(&self, se: bool) -> Result<(), CliError> {
        if self.num_users == 0 || self.num_antennas == 0 {
            return Err(invalid("num_users and num_antennas must be positive"));
        }
        self.constellation.validate().map_err(|e| invalid(e.to_string()))?;
        check_snr(&self.snr_db)?;
        if self.runs.is_empty() {
            return Err(invalid("runs is empty"));
        }
        for run in &self.runs {
            shares(&run.adc, self.num_antennas)?;
        }
        if se {
            self.se.validate().map_err(|e| invalid(e.to_string()))?;
            if let Some(l) = &self.lambda {
                check_lambda(l)?;
            }
        } else {
            if self.trials == 0 {
                return Err(invalid("trials must be at least 1"));
            }
            if self.lambda.is_some() {
                return Err(invalid("lambda applies to se-predict only"));
            }
            self.gamp.validate().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.lambda.clone().unwrap_or_else(|| vec![self.num_antennas as f64 / self.num_users as f64])
    }
}

/// SE-optimal step sizes over SNRs, bit depths and detectors (`tune-step`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub lambda: f64,
    #[serde(default = "qpsk")]
    pub constellation: Constellation,
    #[serde(default = "ber")]
    pub metric: Metric,
    pub snr_db: Vec<f64>,
    pub bits: Vec<u32>,
    pub detectors: Vec<DetectorKind>,
    #[serde(default)]
    pub pqn: PqnVariance,
    #[serde(default)]
    pub search: StepSearch,
    #[serde(default)]
    pub se: SeConfig,
    /// Also write the normalized step averaged over the SNR grid.
    #[serde(default)]
    pub average: bool,
}

fn ber() -> Metric {
    Metric::Ber
}

impl TuneConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_lambda(&[self.lambda])?;
        check_snr(&self.snr_db)?;
        if self.bits.is_empty() || self.detectors.is_empty() {
            return Err(invalid("bits and detectors must be nonempty"));
        }
        for &b in &self.bits {
            AdcSpec::finite(b, 1.0).map_err(|e| invalid(e.to_string()))?;
        }
        if self.metric == Metric::Ber && self.constellation != Constellation::Qpsk {
            return Err(invalid("the ber metric needs a qpsk constellation"));
        }
        self.constellation.validate().map_err(|e| invalid(e.to_string()))?;
        self.se.validate().map_err(|e| invalid(e.to_string()))
    }
}

/// Low-resolution ADC of one detector in a mixed sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowResAdc {
    pub bits: u32,
    pub step: f64,
}

impl LowResAdc {
    pub fn spec(&self) -> Result<AdcSpec, CliError> {
        AdcSpec::finite(self.bits, self.step).map_err(|e| invalid(e.to_string()))
    }
}

/// Metric versus the full-precision fraction for DQ and PDQ (`sweep-mixed`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: Vec<f64>,
    pub snr_db: Vec<f64>,
    #[serde(default = "qpsk")]
    pub constellation: Constellation,
    #[serde(default = "ber")]
    pub metric: Metric,
    pub fractions: Vec<f64>,
    pub dq_adc: LowResAdc,
    pub pdq_adc: LowResAdc,
    #[serde(default)]
    pub pqn: PqnVariance,
    #[serde(default)]
    pub se: SeConfig,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_lambda(&self.lambda)?;
        check_snr(&self.snr_db)?;
        if self.fractions.is_empty() {
            return Err(invalid("fractions is empty"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(invalid(format!("fraction {f} outside [0, 1]")));
        }
        self.dq_adc.spec()?;
        self.pdq_adc.spec()?;
        if self.metric == Metric::Ber && self.constellation != Constellation::Qpsk {
            return Err(invalid("the ber metric needs a qpsk constellation"));
        }
        self.constellation.validate().map_err(|e| invalid(e.to_string()))?;
        self.se.validate().map_err(|e| invalid(e.to_string()))
    }
}
