//! Output-side scalar steps `(g, g')` of GAMP.
//!
//! `g` is the score of the postulated likelihood at the prior `CN(p, v_p)` on
//! the noiseless output and `g'` its negated derivative. The exact (DQ) step
//! integrates the Gaussian over each quantization cell; the PQN (PDQ) step
//! replaces the quantizer by additive Gaussian noise of variance `sigma_q^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{interval_of, AdcBank, AdcSpec, QuantInterval, Resolution};
use crate::special::truncated_normal;

/// Variance `sigma_q^2` assigned to quantization noise under the PQN model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PqnVariance {
    /// `delta^2 / 12` per finite-resolution antenna.
    UniformCell,
    /// The same value on every finite-resolution antenna.
    Fixed(f64),
}

impl Default for PqnVariance {
    fn default() -> Self {
        PqnVariance::UniformCell
    }
}

impl PqnVariance {
    /// Quantization noise variance of one antenna (zero for an ideal ADC).
    pub fn variance(&self, spec: &AdcSpec) -> f64 {
        match (spec.bits, self) {
            (Resolution::Infinite, _) => 0.0,
            (Resolution::Finite(_), PqnVariance::UniformCell) => spec.step * spec.step / 12.0,
            (Resolution::Finite(_), PqnVariance::Fixed(v)) => *v,
        }
    }
}

/// Which likelihood a detector postulates for the quantized outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputKind {
    /// Exact quantized likelihood.
    Dq,
    /// Additive pseudo-quantization noise.
    Pdq { pqn: PqnVariance },
}

/// Per-antenna output model used by GAMP.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputChannel {
    Dq { specs: Vec<AdcSpec>, noise_variance: f64 },
    /// `gamma[i] = sigma_q,i^2 + sigma_n^2`.
    Pdq { gamma: Vec<f64> },
}

impl OutputChannel {
    pub fn dq(bank: &AdcBank, noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidConfig("noise variance must be nonnegative".into()));
        }
        Ok(OutputChannel::Dq { specs: bank.assignment.clone(), noise_variance })
    }

    pub fn pdq(bank: &AdcBank, noise_variance: f64, pqn: PqnVariance) -> Result<Self> {
        let gamma = bank.assignment.iter().map(|s| pqn.variance(s) + noise_variance).collect();
        OutputChannel::pdq_from_gamma(gamma)
    }

    pub fn pdq_from_gamma(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidConfig(format!("PQN effective variance must be positive, got {g}")));
        }
        Ok(OutputChannel::Pdq { gamma })
    }

    pub fn build(kind: OutputKind, bank: &AdcBank, noise_variance: f64) -> Result<Self> {
        match kind {
            OutputKind::Dq => OutputChannel::dq(bank, noise_variance),
            OutputKind::Pdq { pqn } => OutputChannel::pdq(bank, noise_variance, pqn),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            OutputChannel::Dq { specs, .. } => specs.len(),
            OutputChannel::Pdq { gamma } => gamma.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves the quantization cells of the observed outputs once per detection.
    pub(crate) fn prepare(&self, r: &[Complex64]) -> Result<PreparedOutput> {
        if r.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: r.len(), context: "output channel" });
        }
        match self {
            OutputChannel::Dq { specs, noise_variance } => {
                let cells = specs
                    .iter()
                    .zip(r)
                    .map(|(spec, ri)| {
                        if spec.is_infinite() {
                            Ok(None)
                        } else {
                            Ok(Some([interval_of(ri.re, spec)?, interval_of(ri.im, spec)?]))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PreparedOutput::Dq { cells, noise_variance: *noise_variance })
            }
            OutputChannel::Pdq { gamma } => Ok(PreparedOutput::Pdq { gamma: gamma.clone() }),
        }
    }
}

pub(crate) enum PreparedOutput {
    Dq { cells: Vec<Option<[QuantInterval; 2]>>, noise_variance: f64 },
    Pdq { gamma: Vec<f64> },
}

impl PreparedOutput {
    #[inline]
    pub(crate) fn eval(&self, i: usize, r: Complex64, p: Complex64, v_p: f64) -> Result<(Complex64, f64)> {
        match self {
            PreparedOutput::Dq { cells, noise_variance } => match &cells[i] {
                None => Ok(pdq_nonlinearity(r, p, v_p, *noise_variance)),
                Some(cell) => dq_cells(cell, p, v_p, *noise_variance),
            },
            PreparedOutput::Pdq { gamma } => Ok(pdq_nonlinearity(r, p, v_p, gamma[i])),
        }
    }
}

/// Exact output step for a quantized observation `r`.
///
/// Each real dimension of `w ~ CN(p, v_p + sigma_n^2)` is restricted to the
/// cell of the corresponding component of `r`; with posterior mean `r~` and
/// total variance `s~^2`, `g = (r~ - p)/(v_p + sigma_n^2)` and
/// `g' = (1 - s~^2/(v_p + sigma_n^2))/(v_p + sigma_n^2)`.
pub fn dq_nonlinearity(
    r: Complex64,
    p: Complex64,
    v_p: f64,
    spec: &AdcSpec,
    noise_variance: f64,
) -> Result<(Complex64, f64)> {
    if !(v_p > 0.0) {
        return Err(Error::InvalidConfig(format!("v_p must be positive, got {v_p}")));
    }
    if spec.is_infinite() {
        return Ok(pdq_nonlinearity(r, p, v_p, noise_variance));
    }
    let cells = [interval_of(r.re, spec)?, interval_of(r.im, spec)?];
    dq_cells(&cells, p, v_p, noise_variance)
}

fn dq_cells(cells: &[QuantInterval; 2], p: Complex64, v_p: f64, noise_variance: f64) -> Result<(Complex64, f64)> {
    let total = v_p + noise_variance;
    let sd = (0.5 * total).sqrt();
    let re = truncated_normal(cells[0].low, cells[0].high, p.re, sd)
        .ok_or_else(|| Error::Numerical(format!("empty cell {:?} for mean {}", cells[0], p.re)))?;
    let im = truncated_normal(cells[1].low, cells[1].high, p.im, sd)
        .ok_or_else(|| Error::Numerical(format!("empty cell {:?} for mean {}", cells[1], p.im)))?;
    let post_mean = Complex64::new(re.mean, im.mean);
    let post_var = re.variance + im.variance;
    let g = (post_mean - p) / total;
    let dg = (1.0 - post_var / total) / total;
    Ok((g, dg.max(0.0)))
}

/// PQN output step: `g = (r - p)/(v_p + gamma)`, `g' = 1/(v_p + gamma)`.
#[inline]
pub fn pdq_nonlinearity(r: Complex64, p: Complex64, v_p: f64, gamma: f64) -> (Complex64, f64) {
    let denom = v_p + gamma;
    ((r - p) / denom, 1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pdq_reference_values() {
        let (g, dg) = pdq_nonlinearity(Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0), 0.5, 0.5);
        assert_eq!(g, Complex64::new(0.5, 0.0));
        assert_eq!(dg, 1.0);
        let (g, _) = pdq_nonlinearity(Complex64::new(0.3, 0.2), Complex64::new(0.3, 0.2), 0.5, 0.5);
        assert_eq!(g, Complex64::new(0.0, 0.0));
        let (g, dg) = pdq_nonlinearity(Complex64::new(1.0, 1.0), Complex64::new(0.0, 0.0), 0.5, 1e300);
        assert!(g.norm() < 1e-299 && dg < 1e-299);
    }

    #[test]
    fn dq_with_ideal_adc_is_gaussian_step() {
        let r = Complex64::new(0.4, -1.1);
        let p = Complex64::new(0.1, 0.2);
        let (g, dg) = dq_nonlinearity(r, p, 0.3, &AdcSpec::infinite(), 0.2).unwrap();
        assert_relative_eq!(g.re, 0.3 / 0.5, max_relative = 1e-15);
        assert_relative_eq!(g.im, -1.3 / 0.5, max_relative = 1e-15);
        assert_relative_eq!(dg, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn dq_symmetric_cell_keeps_real_part() {
        // 2-bit, step 1: level 0.5 has cell (0, 1]; p centred at 0.5.
        let spec = AdcSpec::finite(2, 1.0).unwrap();
        let (g, dg) = dq_nonlinearity(Complex64::new(0.5, 0.5), Complex64::new(0.5, 0.5), 0.4, &spec, 0.1).unwrap();
        assert!(g.norm() < 1e-14);
        assert!(dg > 0.0 && dg < 1.0 / 0.5);
    }

    #[test]
    fn one_bit_half_line_mean() {
        // w_R ~ N(0, 1/2) on (0, inf): mean = sqrt(1/pi).
        let spec = AdcSpec::finite(1, 2.0).unwrap();
        let (g, dg) = dq_nonlinearity(Complex64::new(1.0, 1.0), Complex64::new(0.0, 0.0), 0.5, &spec, 0.5).unwrap();
        let mean = (1.0 / std::f64::consts::PI).sqrt();
        assert_relative_eq!(g.re, mean, max_relative = 1e-13);
        assert_relative_eq!(g.im, mean, max_relative = 1e-13);
        let var_dim = 0.5 * (1.0 - 2.0 / std::f64::consts::PI);
        assert_relative_eq!(dg, 1.0 - 2.0 * var_dim, max_relative = 1e-12);
    }

    #[test]
    fn pqn_variance_rule() {
        let s = AdcSpec::finite(3, 0.6).unwrap();
        assert_relative_eq!(PqnVariance::UniformCell.variance(&s), 0.03, max_relative = 1e-15);
        assert_eq!(PqnVariance::Fixed(0.2).variance(&s), 0.2);
        assert_eq!(PqnVariance::Fixed(0.2).variance(&AdcSpec::infinite()), 0.0);
    }

    #[test]
    fn dq_rejects_non_levels() {
        let spec = AdcSpec::finite(2, 1.0).unwrap();
        assert!(dq_nonlinearity(Complex64::new(0.3, 0.5), Complex64::new(0.0, 0.0), 1.0, &spec, 0.1).is_err());
        assert!(dq_nonlinearity(Complex64::new(0.5, 0.5), Complex64::new(0.0, 0.0), 0.0, &spec, 0.1).is_err());
    }
}
