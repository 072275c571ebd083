//! GAMP-based detectors and their scalar building blocks.
//!
//! A detector is a pair (output model, input denoiser):
//!
//! | detector     | output step           | denoiser                |
//! |--------------|-----------------------|-------------------------|
//! | DQ-optimal   | exact quantized cells | matched prior           |
//! | PDQ-optimal  | PQN, `gamma = sigma_q^2 + sigma_n^2` | matched prior |
//! | linear       | PQN                   | Gaussian                |

mod gamp;
mod input;
mod linear;
mod output;

use serde::{Deserialize, Serialize};

pub use gamp::{gamp_run, gamp_run_observed, GampConfig, GampOutput, GampState, InitialScore, IterationSummary, OnsagerScore};
pub use input::{
    discrete_denoiser, enumeration_denoiser, gaussian_denoiser, hard_decision, nearest_index, qpsk_denoiser,
    InputDenoiser,
};
pub use linear::{linear_mmse_direct, linear_mmse_weighted};
pub use output::{dq_nonlinearity, pdq_nonlinearity, OutputChannel, OutputKind, PqnVariance};

use crate::model::Constellation;

/// The three detectors compared throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[serde(alias = "dq")]
    DqOptimal,
    #[serde(alias = "pdq")]
    PdqOptimal,
    Linear,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::DqOptimal, DetectorKind::PdqOptimal, DetectorKind::Linear];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::DqOptimal => "dq",
            DetectorKind::PdqOptimal => "pdq",
            DetectorKind::Linear => "linear",
        }
    }

    pub fn output_kind(&self, pqn: PqnVariance) -> OutputKind {
        match self {
            DetectorKind::DqOptimal => OutputKind::Dq,
            DetectorKind::PdqOptimal | DetectorKind::Linear => OutputKind::Pdq { pqn },
        }
    }

    pub fn denoiser(&self, constellation: &Constellation) -> InputDenoiser {
        match self {
            DetectorKind::Linear => InputDenoiser::Gaussian,
            _ => InputDenoiser::matched(constellation),
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "dq" | "dq_optimal" => Ok(DetectorKind::DqOptimal),
            "pdq" | "pdq_optimal" => Ok(DetectorKind::PdqOptimal),
            "linear" => Ok(DetectorKind::Linear),
            other => Err(crate::Error::InvalidConfig(format!("unknown detector '{other}'"))),
        }
    }
}
