//! Input-side denoisers: posterior mean and variance of `x` given
//! `s = x + CN(0, v_s)`, and symbol decisions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Constellation;

/// Postulated prior of the transmitted symbols.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDenoiser {
    /// Exact prior over a finite alphabet (QPSK or explicit points).
    Discrete(Constellation),
    /// Unit-variance circular Gaussian prior (linear estimation).
    Gaussian,
}

impl InputDenoiser {
    /// Denoiser matched to the true input distribution.
    pub fn matched(constellation: &Constellation) -> Self {
        match constellation {
            Constellation::Gaussian => InputDenoiser::Gaussian,
            c => InputDenoiser::Discrete(c.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputDenoiser::Discrete(Constellation::Gaussian) => Err(Error::InvalidConfig(
                "discrete denoiser needs a finite constellation".into(),
            )),
            InputDenoiser::Discrete(c) => c.validate(),
            InputDenoiser::Gaussian => Ok(()),
        }
    }

    /// Posterior mean and variance at `(s, v_s)`.
    #[inline]
    pub fn denoise(&self, s: Complex64, v_s: f64) -> (Complex64, f64) {
        match self {
            InputDenoiser::Gaussian => gaussian_denoiser(s, v_s),
            InputDenoiser::Discrete(Constellation::Qpsk) => qpsk_denoiser(s, v_s),
            InputDenoiser::Discrete(Constellation::Discrete { points, probabilities }) => {
                enumeration_denoiser(s, v_s, points, probabilities)
            }
            InputDenoiser::Discrete(Constellation::Gaussian) => gaussian_denoiser(s, v_s),
        }
    }
}

/// Posterior moments under a uniform or weighted finite prior.
pub fn discrete_denoiser(s: Complex64, v_s: f64, constellation: &Constellation) -> Result<(Complex64, f64)> {
    match constellation {
        Constellation::Qpsk => Ok(qpsk_denoiser(s, v_s)),
        Constellation::Discrete { points, probabilities } => {
            constellation.validate()?;
            Ok(enumeration_denoiser(s, v_s, points, probabilities))
        }
        Constellation::Gaussian => Err(Error::InvalidConfig(
            "discrete denoiser needs a finite constellation".into(),
        )),
    }
}

/// QPSK posterior: `(1/sqrt 2) tanh(sqrt 2 s_d / v_s)` per real dimension.
#[inline]
pub fn qpsk_denoiser(s: Complex64, v_s: f64) -> (Complex64, f64) {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let scale = std::f64::consts::SQRT_2 / v_s;
    let mean = Complex64::new(a * (scale * s.re).tanh(), a * (scale * s.im).tanh());
    (mean, (1.0 - mean.norm_sqr()).max(0.0))
}

/// Posterior moments by enumerating the alphabet in the log domain.
pub fn enumeration_denoiser(s: Complex64, v_s: f64, points: &[Complex64], probabilities: &[f64]) -> (Complex64, f64) {
    let logits: Vec<f64> = points
        .iter()
        .zip(probabilities)
        .map(|(x, &p)| if p > 0.0 { p.ln() - (s - x).norm_sqr() / v_s } else { f64::NEG_INFINITY })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for (x, &l) in points.iter().zip(&logits) {
        let w = (l - top).exp();
        total += w;
        mean += w * x;
        second += w * x.norm_sqr();
    }
    let mean = mean / total;
    (mean, (second / total - mean.norm_sqr()).max(0.0))
}

/// Posterior under a `CN(0, 1)` prior: mean `s/(1 + v_s)`, variance `v_s/(1 + v_s)`.
#[inline]
pub fn gaussian_denoiser(s: Complex64, v_s: f64) -> (Complex64, f64) {
    if v_s.is_infinite() {
        return (Complex64::new(0.0, 0.0), 1.0);
    }
    (s / (1.0 + v_s), v_s / (1.0 + v_s))
}

/// Index of the nearest point; equal distances resolve to the lower index.
pub fn nearest_index(value: Complex64, points: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (m, x) in points.iter().enumerate() {
        let d = (value - x).norm_sqr();
        if d < best_d {
            best = m;
            best_d = d;
        }
    }
    best
}

/// Minimum-distance decisions in the constellation's canonical order.
pub fn hard_decision(estimate: &[Complex64], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let (points, _) = constellation
        .alphabet()
        .ok_or(Error::NoDecisionRule("hard decision"))?;
    Ok(estimate.iter().map(|v| points[nearest_index(*v, &points)]).collect())
}
