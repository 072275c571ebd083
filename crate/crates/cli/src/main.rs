//! `mixadc`: Monte Carlo simulation, state-evolution prediction and step-size
//! tuning for massive-MIMO uplinks with mixed-resolution ADCs.
//!
//! Exit codes: 0 success, 1 output I/O error, 2 configuration error,
//! 3 numerical failure, 4 nonconvergence (outputs are still written).

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::Config;
use output::{sha256_hex, Manifest};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<mixadc::Error> for CliError {
    fn from(e: mixadc::Error) -> Self {
        use mixadc::Error as E;
        match e {
            E::InvalidConfig(_) | E::DimensionMismatch { .. } | E::NoDecisionRule(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

const NONCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "mixadc", version, about = "Mixed-ADC massive-MIMO detector simulation and state evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER/MSE of GAMP detectors over an SNR grid.
    Simulate(Common),
    /// State-evolution fixed points over load and SNR grids.
    SePredict(Common),
    /// Step sizes minimizing the predicted BER or MSE.
    TuneStep(Common),
    /// Predicted DQ and PDQ metrics versus the full-precision antenna fraction.
    SweepMixed(Common),
    /// Parse and check a configuration of any command without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the CSV files and the manifest.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the Monte Carlo seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected, common) = match &cli.command {
        Command::Simulate(c) => (Some("simulate"), c),
        Command::SePredict(c) => (Some("se-predict"), c),
        Command::TuneStep(c) => (Some("tune-step"), c),
        Command::SweepMixed(c) => (Some("sweep-mixed"), c),
        Command::Validate(c) => (None, c),
    };
    match run(expected, common) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mixadc: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(expected: Option<&str>, common: &Common) -> Result<u8, CliError> {
    let start = Instant::now();
    let (mut config, bytes) = config::load(&common.config)?;
    if let (Some(seed), Config::Simulate(c)) = (common.seed, &mut config) {
        c.seed = seed;
    }
    config.validate()?;
    let Some(expected) = expected else {
        println!("{}: valid {} configuration", common.config.display(), config.command());
        return Ok(0);
    };
    if config.command() != expected {
        return Err(CliError::Config(format!(
            "{} is a {} configuration, not {expected}",
            common.config.display(),
            config.command()
        )));
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }

    let outputs = match &config {
        Config::Simulate(c) => commands::simulate(c)?,
        Config::SePredict(c) => commands::se_predict(c)?,
        Config::TuneStep(c) => commands::tune_step(c)?,
        Config::SweepMixed(c) => commands::sweep_mixed(c)?,
    };

    std::fs::create_dir_all(&common.out).map_err(|e| CliError::Io(format!("{}: {e}", common.out.display())))?;
    let mut paths = Vec::new();
    for (name, table) in &outputs.tables {
        let path = common.out.join(name);
        table.write(&path)?;
        paths.push(path);
    }
    let code = if outputs.converged { 0 } else { NONCONVERGED };
    write_manifest(&config, &bytes, common, paths, start, code)?;
    if code == NONCONVERGED {
        eprintln!("mixadc: some computations did not converge; see the nonconverged/converged columns");
    }
    Ok(code)
}

fn write_manifest(
    config: &Config,
    bytes: &[u8],
    common: &Common,
    outputs: Vec<PathBuf>,
    start: Instant,
    code: u8,
) -> Result<(), CliError> {
    let manifest = Manifest {
        command: config.command().into(),
        config_path: common.config.clone(),
        config_sha256: sha256_hex(bytes),
        seed_override: common.seed,
        resolved_config: serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?,
        outputs,
        code_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        exit_code: code as i32,
    };
    manifest.write(&Path::new(&common.out).join(format!("{}.manifest.json", config.command())))
}
