//! Large-system state evolution (SE) of the GAMP detectors.
//!
//! In the limit `K, N -> inf` with `N_kappa / K -> lambda_kappa`, each user's
//! denoiser input behaves like the scalar channel `s = (D/E) x + (sqrt(A)/E) z`,
//! `z ~ CN(0, 1)`, where the detector postulates noise variance `1/E`. The
//! recursion alternates between `(A, D, E)`, which sum cell integrals over
//! the ADC groups, and the input-side moments
//! `(v_x, c_xhat, v_xhat, v_xxhat)` of that scalar channel.

mod kernels;
mod table2;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, InputDenoiser, OutputKind, PqnVariance};
use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::quadrature::Quadrature;
use crate::quantizer::{AdcBank, AdcSpec};
use crate::special::q_function;

pub use kernels::{psi_eval, theta_eval};
pub use table2::{table2_dq_qpsk_step, table2_linear_step, table2_pdq_qpsk_params};

use kernels::{cell_theta, for_each_cell, Effective};

/// Scalar-channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub a: f64,
    pub d: f64,
    pub e: f64,
}

/// Input-side moments: `v_x = E|x|^2`, `c_xhat = E[|xhat|^2 + var]`,
/// `v_xhat = E|xhat|^2`, `v_xxhat = E[x^* xhat]` (real for the symmetric
/// inputs handled here).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeMoments {
    pub v_x: f64,
    pub c_xhat: f64,
    pub v_xhat: f64,
    pub v_xxhat: f64,
}

impl SeMoments {
    /// Moments of the all-zero initial estimate.
    pub fn initial(v_x: f64) -> Self {
        SeMoments { v_x, c_xhat: v_x, v_xhat: 0.0, v_xxhat: 0.0 }
    }
}

/// ADC groups with their antenna-to-user ratios `lambda_kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub entries: Vec<(AdcSpec, f64)>,
}

impl MixedProfile {
    pub fn new(entries: Vec<(AdcSpec, f64)>) -> Result<Self> {
        for (spec, lambda) in &entries {
            spec.validate()?;
            if !(*lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidConfig(format!("antenna ratio must be nonnegative, got {lambda}")));
            }
        }
        if entries.iter().map(|(_, l)| l).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("profile must contain antennas".into()));
        }
        Ok(MixedProfile { entries })
    }

    pub fn single(spec: AdcSpec, lambda: f64) -> Result<Self> {
        MixedProfile::new(vec![(spec, lambda)])
    }

    /// `(spec, lambda (1 - f))` low-resolution and `(ideal, lambda f)` antennas.
    pub fn with_full_precision(spec: AdcSpec, lambda: f64, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidConfig(format!("fraction {fraction} outside [0, 1]")));
        }
        MixedProfile::new(vec![(spec, lambda * (1.0 - fraction)), (AdcSpec::infinite(), lambda * fraction)])
    }

    /// Profile of a finite bank serving `num_users` users.
    pub fn from_bank(bank: &AdcBank, num_users: usize) -> Result<Self> {
        let k = num_users as f64;
        MixedProfile::new(bank.groups().into_iter().map(|(s, n)| (s, n as f64 / k)).collect())
    }

    /// Total `lambda = N / K`.
    pub fn lambda(&self) -> f64 {
        self.entries.iter().map(|(_, l)| l).sum()
    }
}

/// Numerical controls of the SE evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeConfig {
    pub quadrature: Quadrature,
    pub max_iterations: usize,
    /// Relative change of `(A, D, E)` below which the fixed point is accepted.
    pub fixed_point_tol: f64,
    /// Cells beyond this many standard deviations from the mean are skipped.
    pub cell_window: f64,
    /// Weight kept on the previous `(A, D, E)` once the iteration oscillates.
    pub damping: f64,
    pub variance_floor: f64,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            quadrature: Quadrature::default(),
            max_iterations: 500,
            fixed_point_tol: 1e-9,
            cell_window: 9.0,
            damping: 0.5,
            variance_floor: 1e-12,
        }
    }
}

impl SeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.fixed_point_tol > 0.0) || !(self.cell_window > 0.0) {
            return Err(Error::InvalidConfig("SE iteration controls must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig("SE damping must lie in [0, 1)".into()));
        }
        if let Quadrature::GaussHermite { nodes } = self.quadrature {
            if nodes < 20 {
                return Err(Error::InvalidConfig("at least 20 Gauss-Hermite nodes are required".into()));
            }
        }
        Ok(())
    }
}

/// Everything that defines one SE recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SeProblem {
    pub profile: MixedProfile,
    pub noise_variance: f64,
    pub output: OutputKind,
    pub denoiser: InputDenoiser,
    /// True input distribution.
    pub prior: Constellation,
}

impl SeProblem {
    pub fn for_detector(
        detector: DetectorKind,
        prior: Constellation,
        profile: MixedProfile,
        noise_variance: f64,
        pqn: PqnVariance,
    ) -> Self {
        SeProblem {
            output: detector.output_kind(pqn),
            denoiser: detector.denoiser(&prior),
            prior,
            profile,
            noise_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidConfig("noise variance must be finite and nonnegative".into()));
        }
        self.denoiser.validate()?;
        self.prior.validate()?;
        if matches!(self.denoiser, InputDenoiser::Discrete(_)) && !self.prior.is_discrete() {
            return Err(Error::InvalidConfig("a discrete denoiser needs a discrete true input".into()));
        }
        Ok(())
    }
}

/// `(A, D, E)` from the current moments.
pub fn se_params(moments: &SeMoments, problem: &SeProblem, cfg: &SeConfig) -> Result<SeParams> {
    let s2 = problem.noise_variance;
    let eff = Effective::new(moments, s2, cfg.variance_floor)?;
    let mse = (moments.v_x - 2.0 * moments.v_xxhat + moments.v_xhat).max(0.0);
    let sd = eff.tau.sqrt();
    let (mut a_sum, mut d_sum, mut e_sum) = (0.0, 0.0, 0.0);

    let rule = cfg.quadrature.rule(feature_scale(&eff, problem.output, s2))?;
    for &(spec, lambda) in &problem.profile.entries {
        if lambda == 0.0 {
            continue;
        }
        if spec.is_infinite() {
            // Continuous outputs: Gaussian likelihood with gamma = sigma_n^2.
            let denom = s2 + eff.v_p;
            a_sum += lambda * (s2 + mse) / (denom * denom);
            d_sum += lambda / denom;
            e_sum += lambda / denom;
            continue;
        }
        let (mut a_k, mut d_k, mut e_k) = (0.0, 0.0, 0.0);
        for (u, w) in rule.iter() {
            let theta_true = eff.a * u;
            let theta_est = eff.b * u;
            for_each_cell(&spec, theta_true, sd, cfg.cell_window, |level, cell, psi, psi_prime| {
                let (th, th_prime) = cell_theta(problem.output, &spec, cell, level, theta_est, s2, eff.v_p)?;
                a_k += w * psi * th * th;
                d_k += w * psi_prime * th;
                e_k += w * psi * th_prime;
                Ok(())
            })?;
        }
        a_sum += lambda * a_k;
        d_sum += lambda * d_k;
        e_sum += lambda * e_k;
    }
    let p = SeParams { a: a_sum, d: d_sum, e: e_sum };
    if ![p.a, p.d, p.e].iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite SE parameters {p:?} from moments {moments:?}")));
    }
    Ok(p)
}

/// Width in `u` of the sharpest feature of the cell integrands.
fn feature_scale(eff: &Effective, output: OutputKind, noise_variance: f64) -> f64 {
    let mut scale = if eff.a != 0.0 { eff.tau.sqrt() / eff.a.abs() } else { f64::INFINITY };
    if output == OutputKind::Dq && eff.b > 0.0 {
        scale = scale.min((eff.v_p + noise_variance).sqrt() / eff.b);
    }
    scale
}

/// Moments of the scalar channel defined by `params`.
pub fn se_moments(params: &SeParams, problem: &SeProblem, cfg: &SeConfig) -> Result<SeMoments> {
    let SeParams { a, d, e } = *params;
    if !(a >= 0.0) || !(e > 0.0) {
        return Err(Error::Numerical(format!("SE parameters {params:?} define no scalar channel")));
    }
    let v_x = problem.prior.power();
    match &problem.denoiser {
        InputDenoiser::Gaussian => {
            let v_xxhat = d * v_x / (1.0 + e);
            let v_xhat = (d * d * v_x + a) / ((1.0 + e) * (1.0 + e));
            Ok(SeMoments { v_x, c_xhat: v_xhat + 1.0 / (1.0 + e), v_xhat, v_xxhat })
        }
        InputDenoiser::Discrete(Constellation::Qpsk) if problem.prior == Constellation::Qpsk => {
            let rule = cfg.quadrature.rule(1.0 / a.sqrt())?;
            let sa = a.sqrt();
            let (mut m1, mut m2) = (0.0, 0.0);
            for (u, w) in rule.iter() {
                let t = (d + sa * u).tanh();
                m1 += w * t;
                m2 += w * t * t;
            }
            Ok(SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat: m2, v_xxhat: m1 })
        }
        InputDenoiser::Discrete(_) => discrete_moments(params, problem, cfg),
    }
}

/// Moments by two-dimensional quadrature over the complex scalar-channel noise.
fn discrete_moments(params: &SeParams, problem: &SeProblem, cfg: &SeConfig) -> Result<SeMoments> {
    let (points, probs) = problem
        .prior
        .alphabet()
        .ok_or_else(|| Error::InvalidConfig("discrete moments need a discrete input".into()))?;
    let SeParams { a, d, e } = *params;
    let rule = match cfg.quadrature {
        Quadrature::Composite { half_width, max_panel_width, .. } => {
            Quadrature::Composite { half_width, max_panel_width, max_panels: 120 }.rule(1.0 / a.sqrt())?
        }
        q => q.rule(1.0)?,
    };
    let v_s = 1.0 / e;
    let noise_sd = a.sqrt() / e * std::f64::consts::FRAC_1_SQRT_2;
    let (mut v_xxhat, mut v_xhat, mut c_xhat) = (0.0, 0.0, 0.0);
    for (x, px) in points.iter().zip(&probs) {
        if *px == 0.0 {
            continue;
        }
        let mean = x * (d / e);
        for (u1, w1) in rule.iter() {
            for (u2, w2) in rule.iter() {
                let s = mean + num_complex::Complex64::new(noise_sd * u1, noise_sd * u2);
                let (xhat, var) = problem.denoiser.denoise(s, v_s);
                let w = px * w1 * w2;
                v_xxhat += w * (x.conj() * xhat).re;
                v_xhat += w * xhat.norm_sqr();
                c_xhat += w * (xhat.norm_sqr() + var);
            }
        }
    }
    Ok(SeMoments { v_x: problem.prior.power(), c_xhat, v_xhat, v_xxhat })
}

/// One SE iteration: `(A, D, E)` from the moments, then the new moments.
pub fn se_step_generic(moments: &SeMoments, problem: &SeProblem, cfg: &SeConfig) -> Result<(SeParams, SeMoments)> {
    let params = se_params(moments, problem, cfg)?;
    let next = se_moments(&params, problem, cfg)?;
    Ok((params, next))
}

/// One SE iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeIterate {
    pub params: SeParams,
    pub moments: SeMoments,
}

impl SeIterate {
    pub fn ber(&self) -> Result<f64> {
        ber_qpsk(&self.params)
    }

    pub fn mse(&self) -> Result<f64> {
        mse_from_se(&self.moments)
    }
}

/// The first `iterations` undamped SE iterates from the zero estimate; entry
/// `t - 1` predicts GAMP iteration `t`.
pub fn se_trajectory(problem: &SeProblem, cfg: &SeConfig, iterations: usize) -> Result<Vec<SeIterate>> {
    problem.validate()?;
    cfg.validate()?;
    let mut moments = SeMoments::initial(problem.prior.power());
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (params, next) = se_step_generic(&moments, problem, cfg)?;
        moments = next;
        out.push(SeIterate { params, moments });
    }
    Ok(out)
}

/// Result of [`se_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeFixedPoint {
    pub params: SeParams,
    pub moments: SeMoments,
    pub iterations: usize,
    pub converged: bool,
    /// Whether oscillation switched damping on.
    pub damped: bool,
}

impl SeFixedPoint {
    pub fn ber(&self) -> Result<f64> {
        ber_qpsk(&self.params)
    }

    pub fn mse(&self) -> Result<f64> {
        mse_from_se(&self.moments)
    }
}

/// Iterates SE from the zero estimate until `(A, D, E)` settle.
///
/// If a component of `(A, D, E)` changes direction between two consecutive
/// iterations, the remaining iterations blend the new parameters with the
/// previous ones using `cfg.damping`.
pub fn se_fixed_point(problem: &SeProblem, cfg: &SeConfig) -> Result<SeFixedPoint> {
    problem.validate()?;
    cfg.validate()?;
    let mut moments = SeMoments::initial(problem.prior.power());
    let mut prev: Option<SeParams> = None;
    let mut prev_delta: Option<[f64; 3]> = None;
    let mut damped = false;
    let mut params = SeParams { a: 0.0, d: 0.0, e: 0.0 };
    for it in 1..=cfg.max_iterations {
        let raw = se_params(&moments, problem, cfg)?;
        params = match prev {
            Some(old) => {
                let delta = [raw.a - old.a, raw.d - old.d, raw.e - old.e];
                if let Some(pd) = prev_delta {
                    if delta.iter().zip(&pd).any(|(x, y)| x * y < 0.0) {
                        damped = cfg.damping > 0.0;
                    }
                }
                prev_delta = Some(delta);
                if damped {
                    let w = cfg.damping;
                    SeParams {
                        a: (1.0 - w) * raw.a + w * old.a,
                        d: (1.0 - w) * raw.d + w * old.d,
                        e: (1.0 - w) * raw.e + w * old.e,
                    }
                } else {
                    raw
                }
            }
            None => raw,
        };
        moments = se_moments(&params, problem, cfg)?;
        if let Some(old) = prev {
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-300);
            let change = rel(params.a, old.a).max(rel(params.d, old.d)).max(rel(params.e, old.e));
            if change < cfg.fixed_point_tol {
                return Ok(SeFixedPoint { params, moments, iterations: it, converged: true, damped });
            }
        }
        prev = Some(params);
    }
    Ok(SeFixedPoint { params, moments, iterations: cfg.max_iterations, converged: false, damped })
}

/// `BER = Q(D / sqrt(A))` for Gray-mapped QPSK.
pub fn ber_qpsk(params: &SeParams) -> Result<f64> {
    if params.a > 0.0 {
        Ok(q_function(params.d / params.a.sqrt()))
    } else if params.a == 0.0 && params.d > 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("BER undefined for {params:?}")))
    }
}

/// `MSE = v_x - 2 v_xxhat + v_xhat`.
pub fn mse_from_se(moments: &SeMoments) -> Result<f64> {
    let mse = moments.v_x - 2.0 * moments.v_xxhat + moments.v_xhat;
    if mse < -1e-12 {
        return Err(Error::Numerical(format!("negative MSE {mse} from inconsistent moments")));
    }
    Ok(mse.max(0.0))
}
