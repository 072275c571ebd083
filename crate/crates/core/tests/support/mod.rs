//! Property checks shared by the `properties` and `acceptance` targets.
//!
//! Each check runs a fixed-seed randomized suite and returns a description of
//! the first counterexample on failure.

#![allow(dead_code)]

use mixadc::detectors::*;
use mixadc::harness::*;
use mixadc::model::*;
use mixadc::quantizer::*;
use mixadc::special::truncated_normal;
use mixadc::state_evolution::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn spec_strategy() -> impl Strategy<Value = AdcSpec> {
    (1u32..=8, 0.01f64..4.0).prop_map(|(b, s)| AdcSpec::finite(b, s).unwrap())
}

/// Every value lies in the cell of its level, levels are fixed points, and
/// `Q(-v) = -Q(v)` away from thresholds.
pub fn quantizer_partition(cases: u32) -> Check {
    run(cases, (spec_strategy(), -50.0f64..50.0), |(spec, v)| {
        let q = quantize_real(v, &spec).unwrap();
        let cell = interval_of(q, &spec).unwrap();
        prop_assert!(cell.contains(v), "{} not in {:?}", v, cell);
        prop_assert!(spec.levels().unwrap().contains(&q));
        prop_assert_eq!(quantize_real(q, &spec).unwrap(), q);
        if (v / spec.step).fract() != 0.0 {
            prop_assert_eq!(quantize_real(-v, &spec).unwrap(), -q);
        }
        Ok(())
    })?;
    for bits in 1..=8 {
        let spec = AdcSpec::finite(bits, 0.37).unwrap();
        let cells: Vec<_> = spec.levels().unwrap().iter().map(|&l| interval_of(l, &spec).unwrap()).collect();
        let tiled = cells[0].low == f64::NEG_INFINITY
            && cells[cells.len() - 1].high == f64::INFINITY
            && cells.windows(2).all(|w| w[0].high == w[1].low);
        if !tiled {
            return Err(format!("{bits}-bit cells do not tile the line"));
        }
    }
    Ok(())
}

/// `Psi` summed over all levels is one.
pub fn psi_closure(cases: u32) -> Check {
    let strategy = (spec_strategy(), -6.0f64..6.0, 1e-3f64..3.0, 0.0f64..1.0, 0.0f64..1.0);
    run(cases, strategy, |(spec, theta, s2, vh, corr)| {
        let moments = SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat: vh, v_xxhat: corr * vh };
        let total: f64 = spec.levels().unwrap().iter().map(|&l| psi_eval(l, theta, &spec, s2, &moments).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "sum {}", total);
        Ok(())
    })
}

/// Adaptive 20-point Gauss-Legendre integration on `[a, b]`, bisecting until
/// each piece agrees with its halves to `rel` relative to the piece.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    fn panel(rule: &[(f64, f64)], f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * rule.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>()
    }
    fn rec(rule: &[(f64, f64)], f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, rel: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (panel(rule, f, a, m), panel(rule, f, m, b));
        if depth == 0 || (l + r - whole).abs() <= rel * (l.abs() + r.abs()) {
            return l + r;
        }
        rec(rule, f, a, m, l, rel, depth - 1) + rec(rule, f, m, b, r, rel, depth - 1)
    }
    let rule = gauss_quad::GaussLegendre::new(20).unwrap().into_node_weight_pairs();
    let whole = panel(&rule, f, a, b);
    rec(&rule, f, a, b, whole, rel, 12)
}

/// Truncated standard-normal `(log_mass, mean, variance)` on `[lo, hi]` by quadrature.
fn oracle_moments(lo: f64, hi: f64) -> (f64, f64, f64) {
    let z0 = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        hi
    } else {
        0.0
    };
    let lo = lo.max(z0 - 40.0);
    let hi = hi.min(z0 + 40.0);
    let mut cuts = vec![lo];
    let mut t = lo.ceil();
    while t < hi {
        if t > lo {
            cuts.push(t);
        }
        t += 1.0;
    }
    cuts.push(hi);
    // Moments about z0, scaled by exp(z0^2 / 2) to avoid underflow in the tails.
    let integrate = |k: i32| -> f64 {
        cuts.windows(2)
            .map(|w| adaptive(&|z: f64| (-(z * z - z0 * z0) / 2.0).exp() * (z - z0).powi(k), w[0], w[1], 1e-14))
            .sum()
    };
    let (i0, i1, i2) = (integrate(0), integrate(1), integrate(2));
    let m1 = i1 / i0;
    let log_mass = -z0 * z0 / 2.0 - 0.5 * (2.0 * std::f64::consts::PI).ln() + i0.ln();
    (log_mass, z0 + m1, i2 / i0 - m1 * m1)
}

/// Truncated-Gaussian mass, mean and variance against the quadrature oracle.
pub fn truncated_moments(cells: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..cells {
        let mean = rng.random_range(-3.0..3.0);
        let std = rng.random_range(0.05..3.0);
        let lo_z: f64 = rng.random_range(-12.0..12.0);
        let width: f64 = 10f64.powf(rng.random_range(-3.0..1.0));
        let (lo_z, hi_z) = match case % 5 {
            0 => (f64::NEG_INFINITY, lo_z),
            1 => (lo_z, f64::INFINITY),
            _ => (lo_z, lo_z + width),
        };
        let lower = if lo_z.is_finite() { mean + std * lo_z } else { lo_z };
        let upper = if hi_z.is_finite() { mean + std * hi_z } else { hi_z };
        let m = truncated_normal(lower, upper, mean, std).ok_or(format!("case {case}: empty cell"))?;
        let (log_mass, z_mean, z_var) = oracle_moments(lo_z, hi_z);
        let (o_mean, o_var) = (mean + std * z_mean, std * std * z_var);
        let ok = (m.log_mass - log_mass).abs() <= 1e-8 * log_mass.abs().max(1.0)
            && (m.mean - o_mean).abs() <= 1e-8 * o_mean.abs().max(std)
            && (m.variance - o_var).abs() <= 1e-8 * o_var;
        if !ok {
            return Err(format!(
                "case {case} on [{lo_z}, {hi_z}] sd: got ({}, {}, {}), oracle ({log_mass}, {o_mean}, {o_var})",
                m.log_mass, m.mean, m.variance
            ));
        }
    }
    Ok(())
}

/// Converged GAMP with PQN output and Gaussian denoiser against the direct solve.
pub fn gamp_vs_direct(instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = GampConfig { max_iterations: 3000, convergence_tol: 1e-30, ..GampConfig::default() };
    for case in 0..instances {
        let k = rng.random_range(1..=16usize);
        let n = rng.random_range(2 * k..=4 * k);
        let gamma = rng.random_range(0.05..2.0);
        let scale = 1.0 / (k as f64).sqrt();
        let h = ChannelRealization::from_matrix(DMatrix::from_fn(n, k, |_, _| complex_normal(&mut rng, 1.0) * scale));
        let r: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut rng, 1.0 + gamma)).collect();
        let output = OutputChannel::pdq_from_gamma(vec![gamma; n]).map_err(|e| e.to_string())?;
        let out = gamp_run(&h, &r, &output, &InputDenoiser::Gaussian, &config).map_err(|e| e.to_string())?;
        let direct = linear_mmse_direct(&h, &r, gamma).map_err(|e| e.to_string())?;
        let err = out.estimate.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm = direct.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if err > 1e-6 * norm {
            return Err(format!("case {case} (K={k}, N={n}): relative error {}", err / norm));
        }
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-3)
}

/// Generic SE step against the QPSK closed forms for all three detectors.
pub fn se_closed_forms(cases: u32) -> Check {
    let dq = (1u32..=4, 0.2f64..2.0, 1.0f64..16.0, -5.0f64..20.0, 0.02f64..0.98);
    run(cases, dq, |(bits, step, lambda, snr_db, vh)| {
        let cfg = SeConfig::default();
        let s2 = mixadc::noise_variance_from_db(snr_db);
        let profile = MixedProfile::single(AdcSpec::finite(bits, step).unwrap(), lambda).unwrap();
        let problem =
            SeProblem::for_detector(DetectorKind::DqOptimal, Constellation::Qpsk, profile.clone(), s2, PqnVariance::UniformCell);
        let moments = SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat: vh, v_xxhat: vh };
        let (gp, gm) = se_step_generic(&moments, &problem, &cfg).unwrap();
        let (tp, tm) = table2_dq_qpsk_step(vh, &profile, s2, &cfg).unwrap();
        prop_assert!(close(gp.a, tp.a, 1e-8), "A {} vs {}", gp.a, tp.a);
        prop_assert!(close(gp.d, tp.a, 1e-8), "D {} vs A {}", gp.d, tp.a);
        prop_assert!(close(gp.e, tp.a, 1e-8), "E {} vs A {}", gp.e, tp.a);
        prop_assert!(close(gm.v_xhat, tm.v_xhat, 1e-8) && close(gm.v_xxhat, tm.v_xxhat, 1e-8));
        Ok(())
    })?;

    let moments = (0.02f64..0.98, 0.3f64..1.0)
        .prop_map(|(vh, corr)| SeMoments { v_x: 1.0, c_xhat: 1.0, v_xhat: vh, v_xxhat: corr * vh });
    let pqn_cases = (1u32..=4, 0.2f64..3.0, 1.0f64..16.0, -5.0f64..20.0, moments, 0.0f64..0.3);
    run(cases, pqn_cases, |(bits, step, lambda, snr_db, moments, full)| {
        let cfg = SeConfig::default();
        let s2 = mixadc::noise_variance_from_db(snr_db);
        let profile = MixedProfile::with_full_precision(AdcSpec::finite(bits, step).unwrap(), lambda, full).unwrap();
        let pqn = PqnVariance::UniformCell;
        let pdq = SeProblem::for_detector(DetectorKind::PdqOptimal, Constellation::Qpsk, profile.clone(), s2, pqn);
        let g = se_params(&moments, &pdq, &cfg).unwrap();
        let t = table2_pdq_qpsk_params(&moments, &profile, s2, pqn, &cfg).unwrap();
        prop_assert!(close(g.a, t.a, 1e-8) && close(g.d, t.d, 1e-8) && close(g.e, t.e, 1e-8), "{:?} vs {:?}", g, t);

        let lin = SeProblem::for_detector(DetectorKind::Linear, Constellation::Qpsk, profile.clone(), s2, pqn);
        let (gp, gm) = se_step_generic(&moments, &lin, &cfg).unwrap();
        let (tp, tm) = table2_linear_step(&moments, &profile, s2, pqn, &cfg).unwrap();
        prop_assert!(close(gp.a, tp.a, 1e-8) && close(gp.d, tp.d, 1e-8) && close(gp.e, tp.e, 1e-8));
        prop_assert!(close(gm.v_xhat, tm.v_xhat, 1e-8), "{:?} vs {:?}", gm, tm);
        prop_assert!(close(gm.v_xxhat, tm.v_xxhat, 1e-8) && close(gm.c_xhat, tm.c_xhat, 1e-8));
        Ok(())
    })
}

/// Posterior moments of QPSK by explicit enumeration over the four points.
fn enumerate_qpsk(s: Complex64, v_s: f64) -> (Complex64, f64) {
    let logw: Vec<f64> = QPSK_POINTS.iter().map(|p| -(s - p).norm_sqr() / v_s).collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean: Complex64 = QPSK_POINTS.iter().zip(&w).map(|(p, wi)| p * wi).sum::<Complex64>() / z;
    let second: f64 = QPSK_POINTS.iter().zip(&w).map(|(p, wi)| p.norm_sqr() * wi).sum::<f64>() / z;
    (mean, second - mean.norm_sqr())
}

/// QPSK denoiser paths against 4-point enumeration.
pub fn qpsk_denoiser(cases: u32) -> Check {
    run(cases, (-4.0f64..4.0, -4.0f64..4.0, 0.01f64..10.0), |(re, im, v_s)| {
        let s = Complex64::new(re, im);
        let (m_ref, v_ref) = enumerate_qpsk(s, v_s);
        for (m, v) in [
            mixadc::detectors::qpsk_denoiser(s, v_s),
            discrete_denoiser(s, v_s, &Constellation::Qpsk).unwrap(),
            InputDenoiser::matched(&Constellation::Qpsk).denoise(s, v_s),
        ] {
            prop_assert!((m - m_ref).norm() <= 1e-12, "mean {} vs {}", m, m_ref);
            prop_assert!((v - v_ref).abs() <= 1e-12, "variance {} vs {}", v, v_ref);
        }
        Ok(())
    })
}

/// Monte Carlo results are bit-identical under 1, 4 and 8 worker threads.
pub fn thread_invariance() -> Check {
    for (kind, bits) in [(DetectorKind::DqOptimal, 2), (DetectorKind::PdqOptimal, 3), (DetectorKind::Linear, 1)] {
        let spec = ExperimentSpec {
            system: SystemConfig::new(8, 32, 1.0, Constellation::Qpsk).unwrap(),
            bank: AdcBank::uniform(AdcSpec::finite(bits, 0.5).unwrap(), 32).unwrap(),
            detector: DetectorSpec { kind, pqn: PqnVariance::UniformCell },
            gamp: GampConfig::default(),
            trials: 40,
            base_seed: 2024,
            snr_grid_db: vec![0.0, 6.0],
            record_trajectory: true,
        };
        let one = run_monte_carlo_with_threads(&spec, 1).map_err(|e| e.to_string())?;
        for threads in [4, 8] {
            let other = run_monte_carlo_with_threads(&spec, threads).map_err(|e| e.to_string())?;
            let identical = one.records.iter().zip(&other.records).all(|(a, b)| {
                a.bit_errors == b.bit_errors
                    && a.mse.to_bits() == b.mse.to_bits()
                    && a.mse_stderr.to_bits() == b.mse_stderr.to_bits()
                    && a.mse_trajectory.iter().zip(&b.mse_trajectory).all(|(x, y)| x.to_bits() == y.to_bits())
            });
            if !identical || one != other {
                return Err(format!("{kind:?} differs between 1 and {threads} threads"));
            }
        }
    }
    Ok(())
}
