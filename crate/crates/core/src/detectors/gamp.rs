//! Generalized approximate message passing for `r = Q(H x + n)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::input::InputDenoiser;
use super::output::OutputChannel;
use crate::error::{Error, Result};
use crate::model::ChannelRealization;

/// Score used in the first Onsager correction, before any output step has run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialScore {
    /// `g(p^0, v_p^1)` with `p^0 = 0`, evaluated like every later iteration.
    Evaluated,
    /// No correction in the first iteration, so `p^1 = H x^0`.
    Zero,
}

/// Variance at which the Onsager score of line 2 is evaluated for `t >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerScore {
    /// `g(p^{t-1}, v_p^{t-1}) = z^{t-1}`, the score of the previous output step.
    Previous,
    /// `g(p^{t-1}, v_p^t)`, re-evaluated at the current `v_p`.
    CurrentVariance,
}

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GampConfig {
    pub max_iterations: usize,
    /// Lower bound applied to `v_p`, `v_s` and `v_x`.
    pub variance_floor: f64,
    /// Weight of the previous iterate in the `p` and `x` updates (0 disables).
    pub damping: f64,
    /// Stop once `||x^t - x^{t-1}||^2 / K` falls below this value (0 disables).
    pub convergence_tol: f64,
    pub initial_score: InitialScore,
    pub onsager: OnsagerScore,
}

impl Default for GampConfig {
    fn default() -> Self {
        GampConfig {
            max_iterations: 20,
            variance_floor: 1e-12,
            damping: 0.0,
            convergence_tol: 0.0,
            initial_score: InitialScore::Zero,
            onsager: OnsagerScore::Previous,
        }
    }
}

impl GampConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidConfig("variance_floor must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.damping) || self.damping == 1.0 {
            return Err(Error::InvalidConfig("damping must lie in [0, 1)".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// All per-iteration vectors of the algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    pub x: Vec<Complex64>,
    pub v_x: Vec<f64>,
    pub p: Vec<Complex64>,
    pub v_p: Vec<f64>,
    pub z: Vec<Complex64>,
    pub v_z: Vec<f64>,
    pub s: Vec<Complex64>,
    pub v_s: Vec<f64>,
    pub iteration: usize,
}

impl GampState {
    /// `x^0 = 0`, `v_x^0 = 1`, `p^0 = 0`.
    pub fn initial(num_users: usize, num_antennas: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        GampState {
            x: vec![zero; num_users],
            v_x: vec![1.0; num_users],
            p: vec![zero; num_antennas],
            v_p: vec![0.0; num_antennas],
            z: vec![zero; num_antennas],
            v_z: vec![0.0; num_antennas],
            s: vec![zero; num_users],
            v_s: vec![0.0; num_users],
            iteration: 0,
        }
    }
}

/// Summary of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub mean_v_x: f64,
    pub mean_v_p: f64,
    pub mean_v_s: f64,
    /// `||x^t - x^{t-1}||^2 / K`.
    pub change: f64,
    /// Entries of `v_s` that were non-positive or non-finite before flooring.
    pub clamped_v_s: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GampOutput {
    pub estimate: Vec<Complex64>,
    pub variance: Vec<f64>,
    pub trace: Vec<IterationSummary>,
    /// Whether the early-stop criterion fired.
    pub converged: bool,
}

/// Runs the detector and returns the final estimate with its trace.
pub fn gamp_run(
    channel: &ChannelRealization,
    r: &[Complex64],
    output: &OutputChannel,
    denoiser: &InputDenoiser,
    config: &GampConfig,
) -> Result<GampOutput> {
    gamp_run_observed(channel, r, output, denoiser, config, |_| {})
}

/// [`gamp_run`] calling `observer` with the full state after every iteration.
pub fn gamp_run_observed(
    channel: &ChannelRealization,
    r: &[Complex64],
    output: &OutputChannel,
    denoiser: &InputDenoiser,
    config: &GampConfig,
    mut observer: impl FnMut(&GampState),
) -> Result<GampOutput> {
    config.validate()?;
    denoiser.validate()?;
    let h = channel.matrix();
    let (n, k) = (h.nrows(), h.ncols());
    if output.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: output.len(), context: "output channel" });
    }
    let prepared = output.prepare(r)?;
    let abs2: DMatrix<f64> = h.map(|v| v.norm_sqr());
    let floor = config.variance_floor;
    let damp = config.damping;

    let mut st = GampState::initial(k, n);
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut converged = false;

    for t in 1..=config.max_iterations {
        st.iteration = t;
        // line 1: v_p = |H|^2 v_x
        let mut v_p = vec![0.0; n];
        for j in 0..k {
            let vx = st.v_x[j];
            for (vp, a) in v_p.iter_mut().zip(abs2.column(j).iter()) {
                *vp += a * vx;
            }
        }
        for vp in v_p.iter_mut() {
            *vp = vp.max(floor);
        }
        check_real(&v_p, t, 1, "v_p")?;

        // line 2: p = H x - v_p g(p^{t-1}, .)
        let mut p = channel.apply(&st.x)?;
        if t > 1 && config.onsager == OnsagerScore::Previous {
            for i in 0..n {
                p[i] -= v_p[i] * st.z[i];
            }
        } else if t > 1 || config.initial_score == InitialScore::Evaluated {
            for i in 0..n {
                let (g_prev, _) = prepared.eval(i, r[i], st.p[i], v_p[i])?;
                p[i] -= v_p[i] * g_prev;
            }
        }
        if damp > 0.0 && t > 1 {
            for (pn, po) in p.iter_mut().zip(&st.p) {
                *pn = (1.0 - damp) * *pn + damp * po;
            }
        }
        check_complex(&p, t, 2, "p")?;

        // lines 3-4: v_z = g'(p, v_p), z = g(p, v_p)
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut v_z = vec![0.0; n];
        for i in 0..n {
            let (g, dg) = prepared.eval(i, r[i], p[i], v_p[i])?;
            z[i] = g;
            v_z[i] = dg;
        }
        check_real(&v_z, t, 3, "v_z")?;
        check_complex(&z, t, 4, "z")?;

        // lines 5-6: v_s = 1 / (|H|^2)^T v_z, s = x + v_s (H^H z)
        let mut v_s = vec![0.0; k];
        let mut s = vec![Complex64::new(0.0, 0.0); k];
        let mut clamped = 0;
        for j in 0..k {
            let col = h.column(j);
            let prec: f64 = abs2.column(j).iter().zip(&v_z).map(|(a, v)| a * v).sum();
            let mut vs = 1.0 / prec;
            if !(vs > 0.0) || !vs.is_finite() {
                clamped += 1;
                vs = 1.0 / floor;
            }
            v_s[j] = vs.max(floor);
            let corr: Complex64 = col.iter().zip(&z).map(|(hij, zi)| hij.conj() * zi).sum();
            s[j] = st.x[j] + v_s[j] * corr;
        }
        check_real(&v_s, t, 5, "v_s")?;
        check_complex(&s, t, 6, "s")?;

        // lines 7-8: denoiser
        let mut change = 0.0;
        let mut x_new = vec![Complex64::new(0.0, 0.0); k];
        let mut v_x_new = vec![0.0; k];
        for j in 0..k {
            let (m, v) = denoiser.denoise(s[j], v_s[j]);
            let (m, v) = if damp > 0.0 {
                ((1.0 - damp) * m + damp * st.x[j], (1.0 - damp) * v + damp * st.v_x[j])
            } else {
                (m, v)
            };
            change += (m - st.x[j]).norm_sqr();
            x_new[j] = m;
            v_x_new[j] = v.max(floor);
        }
        check_complex(&x_new, t, 7, "x")?;
        check_real(&v_x_new, t, 8, "v_x")?;
        change /= k as f64;

        st.x = x_new;
        st.v_x = v_x_new;
        st.p = p;
        st.v_p = v_p;
        st.z = z;
        st.v_z = v_z;
        st.s = s;
        st.v_s = v_s;
        trace.push(IterationSummary {
            iteration: t,
            mean_v_x: mean(&st.v_x),
            mean_v_p: mean(&st.v_p),
            mean_v_s: mean(&st.v_s),
            change,
            clamped_v_s: clamped,
        });
        observer(&st);
        if config.convergence_tol > 0.0 && change < config.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(GampOutput { estimate: st.x, variance: st.v_x, trace, converged })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_real(v: &[f64], iteration: usize, line: u8, quantity: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, line, quantity })
    }
}

fn check_complex(v: &[Complex64], iteration: usize, line: u8, quantity: &'static str) -> Result<()> {
    if v.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, line, quantity })
    }
}
