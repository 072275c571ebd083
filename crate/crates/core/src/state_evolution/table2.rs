//! Closed-form SE specializations for QPSK inputs.
//!
//! These evaluate the same recursion as [`super::se_step_generic`] through
//! independent formulas and serve as its cross-check:
//!
//! * DQ-optimal: `A = sum lambda sum_r E_u[(Psi')^2 / Psi]`, `D = E = A`,
//!   `v_xhat = v_xxhat = E_u tanh(sqrt(A) u + D)`, `c_xhat = 1`.
//! * PDQ-optimal: `Theta` is linear in the level, so each node only needs the
//!   first two moments of the quantized output.
//! * Linear: PDQ parameters with the rational Gaussian-denoiser moments.

use crate::detectors::PqnVariance;
use crate::error::{Error, Result};

use super::kernels::{for_each_cell, Effective};
use super::{MixedProfile, SeConfig, SeMoments, SeParams};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// DQ-optimal QPSK step from `v_xhat` (which equals `v_xxhat` on this path).
pub fn table2_dq_qpsk_step(
    v_xhat: f64,
    profile: &MixedProfile,
    noise_variance: f64,
    cfg: &SeConfig,
) -> Result<(SeParams, SeMoments)> {
    let moments = SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat, v_xxhat: v_xhat };
    let eff = Effective::new(&moments, noise_variance, cfg.variance_floor)?;
    let sd = eff.tau.sqrt();
    let scale = if eff.b > 0.0 { sd / eff.b } else { f64::INFINITY };
    let rule = cfg.quadrature.rule(scale)?;
    let mut a = 0.0;
    for &(spec, lambda) in &profile.entries {
        if lambda == 0.0 {
            continue;
        }
        if spec.is_infinite() {
            a += lambda / eff.tau;
            continue;
        }
        let mut acc = 0.0;
        for (u, w) in rule.iter() {
            for_each_cell(&spec, eff.b * u, sd, cfg.cell_window, |_, _, psi, psi_prime| {
                if psi > 0.0 {
                    acc += w * psi_prime * psi_prime / psi;
                }
                Ok(())
            })?;
        }
        a += lambda * acc;
    }
    let params = SeParams { a, d: a, e: a };
    let rule = cfg.quadrature.rule(1.0 / a.sqrt())?;
    let m = rule.expect(|u| (a.sqrt() * u + a).tanh());
    Ok((params, SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat: m, v_xxhat: m }))
}

/// PDQ `(A, D, E)` via per-node output moments.
pub fn table2_pdq_qpsk_params(
    moments: &SeMoments,
    profile: &MixedProfile,
    noise_variance: f64,
    pqn: PqnVariance,
    cfg: &SeConfig,
) -> Result<SeParams> {
    let eff = Effective::new(moments, noise_variance, cfg.variance_floor)?;
    let sd = eff.tau.sqrt();
    let mse = (moments.v_x - 2.0 * moments.v_xxhat + moments.v_xhat).max(0.0);
    let scale = if eff.a != 0.0 { sd / eff.a.abs() } else { f64::INFINITY };
    let rule = cfg.quadrature.rule(scale)?;
    let (mut a, mut d, mut e) = (0.0, 0.0, 0.0);
    for &(spec, lambda) in &profile.entries {
        if lambda == 0.0 {
            continue;
        }
        let denom = noise_variance + pqn.variance(&spec) + eff.v_p;
        if spec.is_infinite() {
            a += lambda * (noise_variance + mse) / (denom * denom);
            d += lambda / denom;
            e += lambda / denom;
            continue;
        }
        let (mut a_k, mut d_k, mut e_k) = (0.0, 0.0, 0.0);
        for (u, w) in rule.iter() {
            let (mut m0, mut m1, mut m2, mut p1) = (0.0, 0.0, 0.0, 0.0);
            for_each_cell(&spec, eff.a * u, sd, cfg.cell_window, |level, _, psi, psi_prime| {
                let y = SQRT2 * level;
                m0 += psi;
                m1 += psi * y;
                m2 += psi * y * y;
                p1 += psi_prime * y;
                Ok(())
            })?;
            let c = eff.b * u;
            a_k += w * (m2 - 2.0 * c * m1 + c * c * m0);
            d_k += w * p1;
            e_k += w * m0;
        }
        a += lambda * a_k / (denom * denom);
        d += lambda * d_k / denom;
        e += lambda * e_k / denom;
    }
    Ok(SeParams { a, d, e })
}

/// Linear-detector step: PDQ parameters and Gaussian-denoiser moments (`v_x = 1`).
pub fn table2_linear_step(
    moments: &SeMoments,
    profile: &MixedProfile,
    noise_variance: f64,
    pqn: PqnVariance,
    cfg: &SeConfig,
) -> Result<(SeParams, SeMoments)> {
    let p = table2_pdq_qpsk_params(moments, profile, noise_variance, pqn, cfg)?;
    if !(p.e > -1.0) {
        return Err(Error::Numerical(format!("invalid linear SE parameters {p:?}")));
    }
    let v_xhat = (p.a + p.d * p.d) / ((1.0 + p.e) * (1.0 + p.e));
    Ok((
        p,
        SeMoments { v_x: 1.0, c_xhat: v_xhat + 1.0 / (1.0 + p.e), v_xhat, v_xxhat: p.d / (1.0 + p.e) },
    ))
}
