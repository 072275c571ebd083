//! Bayes-inference detectors for massive-MIMO uplinks whose receive antennas
//! carry a mix of low- and high-resolution ADCs.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] draws channels, symbols and noisy receive vectors.
//! * [`quantizer`] implements the uniform midrise quantizer and per-antenna ADC banks.
//! * [`special`] and [`quadrature`] hold the scalar numerics (Gaussian tails,
//!   truncated-Gaussian moments, Gaussian expectations).
//! * [`detectors`] runs GAMP with exact (DQ) or pseudo-quantization-noise (PDQ)
//!   output steps and discrete or Gaussian input denoisers, plus a direct
//!   regularized least-squares solver used as an oracle.
//! * [`state_evolution`] predicts the large-system BER/MSE of those detectors.
//! * [`tuning`] optimizes quantizer step sizes and sweeps mixed ADC profiles.
//! * [`harness`] runs reproducible Monte Carlo experiments and compares them
//!   against state evolution.

pub mod detectors;
pub mod error;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod quantizer;
pub mod special;
pub mod state_evolution;
pub mod tuning;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Converts an SNR in dB into the per-complex-entry noise variance `1/SNR`.
pub fn noise_variance_from_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Inverse of [`noise_variance_from_db`].
pub fn snr_db_from_noise_variance(noise_variance: f64) -> f64 {
    -10.0 * noise_variance.log10()
}
