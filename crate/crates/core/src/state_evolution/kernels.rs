//! Per-cell integrands `Psi`, `Psi'`, `Theta`, `Theta'`.
//!
//! Everything here lives on the `theta = sqrt(2) Re(p)` scale of the real
//! decomposition: a quantizer threshold `t` appears as `sqrt(2) t`, and a
//! per-real-dimension Gaussian of variance `v/2` becomes variance `v`.

use crate::detectors::OutputKind;
use crate::error::{Error, Result};
use crate::quantizer::{interval_of, AdcSpec, QuantInterval};
use crate::special::{normal_cdf, normal_pdf, q_function, truncated_normal};

use super::SeMoments;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Effective quantities derived from the current moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Effective {
    /// Slope of the true-channel mean `theta = a u`.
    pub a: f64,
    /// Slope of the estimated-channel mean `theta = b u`.
    pub b: f64,
    /// Variance of the true output given the estimate, `sigma_n^2 + v_x - |v_xxhat|^2 / v_xhat`.
    pub tau: f64,
    /// Postulated output-prior variance `c_xhat - v_xhat`.
    pub v_p: f64,
}

impl Effective {
    pub(crate) fn new(moments: &SeMoments, noise_variance: f64, floor: f64) -> Result<Self> {
        let SeMoments { v_x, c_xhat, v_xhat, v_xxhat } = *moments;
        if ![v_x, c_xhat, v_xhat, v_xxhat].iter().all(|v| v.is_finite()) || v_xhat < 0.0 {
            return Err(Error::Numerical(format!("invalid state-evolution moments {moments:?}")));
        }
        if c_xhat < v_xhat - 1e-9 * c_xhat.max(1.0) {
            return Err(Error::Numerical(format!(
                "second moment c_xhat = {c_xhat} below v_xhat = {v_xhat}"
            )));
        }
        let (a, tau) = if v_xhat > 0.0 {
            (v_xxhat / v_xhat.sqrt(), noise_variance + v_x - v_xxhat * v_xxhat / v_xhat)
        } else {
            (0.0, noise_variance + v_x)
        };
        if !(tau > -1e-12 * (noise_variance + v_x)) {
            return Err(Error::Numerical(format!("negative effective variance {tau}")));
        }
        Ok(Effective { a, b: v_xhat.sqrt(), tau: tau.max(floor), v_p: (c_xhat - v_xhat).max(floor) })
    }
}

/// `Psi(r | theta)`: probability that the true output lands in the cell of `level`.
pub fn psi_eval(level: f64, theta: f64, spec: &AdcSpec, noise_variance: f64, moments: &SeMoments) -> Result<f64> {
    let eff = Effective::new(moments, noise_variance, 0.0)?;
    if !(eff.tau > 0.0) {
        return Err(Error::Numerical("effective output variance is not positive".into()));
    }
    let cell = finite_cell(level, spec)?;
    Ok(cell_psi(&cell, theta, eff.tau.sqrt()).0)
}

/// `Theta(r | theta)` and `Theta'(r | theta) = -d Theta / d theta`.
pub fn theta_eval(
    level: f64,
    theta: f64,
    output: OutputKind,
    spec: &AdcSpec,
    noise_variance: f64,
    moments: &SeMoments,
) -> Result<(f64, f64)> {
    if !(moments.c_xhat > moments.v_xhat) && noise_variance == 0.0 {
        return Err(Error::Numerical("degenerate postulated variance".into()));
    }
    let eff = Effective::new(moments, noise_variance, 0.0)?;
    let cell = finite_cell(level, spec)?;
    cell_theta(output, spec, &cell, level, theta, noise_variance, eff.v_p)
}

fn finite_cell(level: f64, spec: &AdcSpec) -> Result<QuantInterval> {
    if spec.is_infinite() {
        return Err(Error::InvalidConfig("cell integrands need a finite-resolution ADC".into()));
    }
    interval_of(level, spec)
}

/// `(Psi, Psi')` for one cell at mean `theta`, standard deviation `sd`.
pub(crate) fn cell_psi(cell: &QuantInterval, theta: f64, sd: f64) -> (f64, f64) {
    let zl = (SQRT2 * cell.low - theta) / sd;
    let zh = (SQRT2 * cell.high - theta) / sd;
    let psi = if zl >= 0.0 {
        q_function(zl) - if zh.is_finite() { q_function(zh) } else { 0.0 }
    } else {
        (if zh.is_finite() { normal_cdf(zh) } else { 1.0 }) - normal_cdf(zl)
    };
    let psi_prime = (normal_pdf(zl) - normal_pdf(zh)) / sd;
    (psi.max(0.0), psi_prime)
}

/// `(Theta, Theta')` for one cell.
pub(crate) fn cell_theta(
    output: OutputKind,
    spec: &AdcSpec,
    cell: &QuantInterval,
    level: f64,
    theta: f64,
    noise_variance: f64,
    v_p: f64,
) -> Result<(f64, f64)> {
    match output {
        OutputKind::Pdq { pqn } => {
            let denom = noise_variance + pqn.variance(spec) + v_p;
            if !(denom > 0.0) {
                return Err(Error::Numerical("degenerate PQN denominator".into()));
            }
            Ok(((SQRT2 * level - theta) / denom, 1.0 / denom))
        }
        OutputKind::Dq => {
            let s2 = v_p + noise_variance;
            let m = truncated_normal(SQRT2 * cell.low, SQRT2 * cell.high, theta, s2.sqrt())
                .ok_or_else(|| Error::Numerical(format!("empty cell {cell:?}")))?;
            Ok(((m.mean - theta) / s2, ((1.0 - m.variance / s2) / s2).max(0.0)))
        }
    }
}

/// Calls `f(level, cell, psi, psi')` for every cell of `spec` carrying
/// non-negligible probability around `theta`.
///
/// Cells farther than `window` standard deviations from `theta` are skipped.
pub(crate) fn for_each_cell(
    spec: &AdcSpec,
    theta: f64,
    sd: f64,
    window: f64,
    mut f: impl FnMut(f64, &QuantInterval, f64, f64) -> Result<()>,
) -> Result<()> {
    let bits = spec.bit_depth().expect("finite ADC");
    let half = 1i64 << (bits - 1);
    let step = spec.step;
    let to_index = |v: f64| (v / step).ceil().clamp((1 - half) as f64, half as f64) as i64;
    let lo = to_index((theta - window * sd) / SQRT2);
    let hi = to_index((theta + window * sd) / SQRT2);
    for b in lo..=hi {
        let cell = spec.interval_of_index(b);
        let level = (b as f64 - 0.5) * step;
        let (psi, psi_prime) = cell_psi(&cell, theta, sd);
        f(level, &cell, psi, psi_prime)?;
    }
    Ok(())
}
