//! Subcommand bodies: each turns a validated configuration into CSV tables.

use mixadc::harness::{run_monte_carlo, DetectorSpec, ExperimentSpec};
use mixadc::model::{Constellation, SystemConfig};
use mixadc::noise_variance_from_db;
use mixadc::quantizer::AdcSpec;
use mixadc::state_evolution::{se_fixed_point, SeProblem};
use mixadc::tuning::{
    normalize_step, optimize_step_size, step_metric, sweep_mixed_profile, MixedContext, StepOptimum, TuneObjective,
};
use rayon::prelude::*;

use crate::config::{self, ExperimentConfig, SweepConfig, TuneConfig};
use crate::output::{num, opt_num, Table};
use crate::CliError;

pub const SIMULATE_HEADER: &[&str] =
    &["snr_db", "detector", "bits", "steps", "ber", "ber_stderr", "mse", "mse_stderr", "trials", "nonconverged"];
pub const SE_HEADER: &[&str] =
    &["lambda", "snr_db", "detector", "bits", "steps", "ber", "mse", "A", "D", "E", "iterations", "converged"];
pub const TUNE_HEADER: &[&str] = &["snr_db", "bits", "detector", "step", "step_norm", "metric", "grid_fallback"];
pub const TUNE_AVERAGE_HEADER: &[&str] = &["bits", "detector", "mean_step_norm", "snr_points"];
pub const SWEEP_HEADER: &[&str] = &["lambda", "snr_db", "fraction", "dq_metric", "pdq_metric", "gap_db"];

/// Marks step sizes that have no effect on the detector.
pub const IRRELEVANT: &str = "irrelevant";

/// Named output tables and whether every computation converged.
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
    pub converged: bool,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let mut table = Table::new(SIMULATE_HEADER);
    let mut converged = true;
    for run in &cfg.runs {
        let (bits, steps) = config::labels(&run.adc, cfg.num_antennas)?;
        let spec = ExperimentSpec {
            system: SystemConfig::new(cfg.num_users, cfg.num_antennas, 1.0, cfg.constellation.clone())?,
            bank: config::bank(&run.adc, cfg.num_antennas)?,
            detector: DetectorSpec { kind: run.detector, pqn: cfg.pqn },
            gamp: cfg.gamp,
            trials: cfg.trials,
            base_seed: cfg.seed,
            snr_grid_db: cfg.snr_db.clone(),
            record_trajectory: false,
        };
        let result = run_monte_carlo(&spec)?;
        for r in &result.records {
            converged &= r.nonconverged == 0;
            table.push(vec![
                num(r.snr_db),
                run.detector.name().into(),
                bits.clone(),
                steps.clone(),
                opt_num(r.ber),
                opt_num(r.ber_stderr),
                num(r.mse),
                num(r.mse_stderr),
                r.trials_run.to_string(),
                r.nonconverged.to_string(),
            ]);
        }
    }
    Ok(Outputs { tables: vec![("simulate.csv".into(), table)], converged })
}

pub fn se_predict(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let mut jobs = Vec::new();
    for &lambda in &cfg.lambdas() {
        for run in &cfg.runs {
            for &snr in &cfg.snr_db {
                jobs.push((lambda, run, snr));
            }
        }
    }
    let qpsk = cfg.constellation == Constellation::Qpsk;
    let rows = jobs
        .par_iter()
        .map(|&(lambda, run, snr)| {
            let (bits, steps) = config::labels(&run.adc, cfg.num_antennas)?;
            let profile = config::profile(&run.adc, cfg.num_antennas, lambda)?;
            let problem =
                SeProblem::for_detector(run.detector, cfg.constellation.clone(), profile, noise_variance_from_db(snr), cfg.pqn);
            let fp = se_fixed_point(&problem, &cfg.se)?;
            let ber = if qpsk { Some(fp.ber()?) } else { None };
            let row = vec![
                num(lambda),
                num(snr),
                run.detector.name().into(),
                bits,
                steps,
                opt_num(ber),
                num(fp.mse()?),
                num(fp.params.a),
                num(fp.params.d),
                num(fp.params.e),
                fp.iterations.to_string(),
                fp.converged.to_string(),
            ];
            Ok((row, fp.converged))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(SE_HEADER);
    let converged = rows.iter().all(|(_, c)| *c);
    for (row, _) in rows {
        table.push(row);
    }
    Ok(Outputs { tables: vec![("se-predict.csv".into(), table)], converged })
}

pub fn tune_step(cfg: &TuneConfig) -> Result<Outputs, CliError> {
    let mut jobs = Vec::new();
    for &bits in &cfg.bits {
        for &detector in &cfg.detectors {
            for &snr in &cfg.snr_db {
                jobs.push((snr, bits, detector));
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(snr, bits, detector)| {
            let noise_variance = noise_variance_from_db(snr);
            let objective = TuneObjective {
                metric: cfg.metric,
                detector,
                constellation: cfg.constellation.clone(),
                lambda: cfg.lambda,
                noise_variance,
                bits,
                pqn: cfg.pqn,
            };
            let optimum = optimize_step_size(&objective, &cfg.search, &cfg.se)?;
            let metric = match optimum {
                StepOptimum::Found { metric, .. } => metric,
                StepOptimum::Irrelevant => step_metric(&objective, 1.0, &cfg.se)?,
            };
            Ok((snr, bits, detector, optimum, metric, noise_variance))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut table = Table::new(TUNE_HEADER);
    for (snr, bits, detector, optimum, metric, noise_variance) in &results {
        let (step, norm, fallback) = match *optimum {
            StepOptimum::Found { step, grid_fallback, .. } => {
                (num(step), num(normalize_step(step, *noise_variance)), grid_fallback.to_string())
            }
            StepOptimum::Irrelevant => (IRRELEVANT.into(), IRRELEVANT.into(), "false".into()),
        };
        table.push(vec![num(*snr), bits.to_string(), detector.name().into(), step, norm, num(*metric), fallback]);
    }
    let mut tables = vec![("tune-step.csv".into(), table)];

    if cfg.average {
        let mut avg = Table::new(TUNE_AVERAGE_HEADER);
        for chunk in results.chunks(cfg.snr_db.len()) {
            let (_, bits, detector, _, _, _) = chunk[0];
            let norms: Option<Vec<f64>> =
                chunk.iter().map(|(_, _, _, opt, _, nv)| opt.step().map(|s| normalize_step(s, *nv))).collect();
            let mean = match norms {
                Some(n) => num(n.iter().sum::<f64>() / n.len() as f64),
                None => IRRELEVANT.into(),
            };
            avg.push(vec![bits.to_string(), detector.name().into(), mean, chunk.len().to_string()]);
        }
        tables.push(("tune-step.average.csv".into(), avg));
    }
    Ok(Outputs { tables, converged: true })
}

pub fn sweep_mixed(cfg: &SweepConfig) -> Result<Outputs, CliError> {
    let (dq_spec, pdq_spec): (AdcSpec, AdcSpec) = (cfg.dq_adc.spec()?, cfg.pdq_adc.spec()?);
    let mut jobs = Vec::new();
    for &lambda in &cfg.lambda {
        for &snr in &cfg.snr_db {
            jobs.push((lambda, snr));
        }
    }
    let sweeps = jobs
        .iter()
        .map(|&(lambda, snr)| {
            let ctx = MixedContext {
                lambda,
                dq_spec,
                pdq_spec,
                noise_variance: noise_variance_from_db(snr),
                constellation: cfg.constellation.clone(),
                metric: cfg.metric,
                pqn: cfg.pqn,
            };
            Ok((lambda, snr, sweep_mixed_profile(&cfg.fractions, &ctx, &cfg.se)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(SWEEP_HEADER);
    for (lambda, snr, sweep) in sweeps {
        for (&(f, dq), &(_, pdq)) in sweep.dq.grid.iter().zip(&sweep.pdq.grid) {
            let gap = 10.0 * (pdq / dq).log10();
            table.push(vec![num(lambda), num(snr), num(f), num(dq), num(pdq), num(gap)]);
        }
    }
    Ok(Outputs { tables: vec![("sweep-mixed.csv".into(), table)], converged: true })
}
