//! Uplink signal model `y = H x + n` with i.i.d. Rayleigh channel.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-9;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Symbols = 2,
    Noise = 3,
}

/// ChaCha8 generator for `seed` positioned on the given stream.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one Monte Carlo trial: `mix64(mix64(mix64(base) ^ snr_index) ^ trial)`.
pub fn trial_seed(base_seed: u64, snr_index: u64, trial: u64) -> u64 {
    mix64(mix64(mix64(base_seed) ^ snr_index) ^ trial)
}

/// Transmit symbol distribution, normalized to unit average power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constellation {
    /// `(+-1 +- j)/sqrt(2)`, equiprobable.
    Qpsk,
    /// Circular complex Gaussian with unit variance.
    Gaussian,
    /// Finite alphabet with explicit probabilities.
    Discrete { points: Vec<Complex64>, probabilities: Vec<f64> },
}

impl Constellation {
    /// Builds and validates a finite alphabet.
    pub fn discrete(points: Vec<Complex64>, probabilities: Vec<f64>) -> Result<Self> {
        let c = Constellation::Discrete { points, probabilities };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let Constellation::Discrete { points, probabilities } = self {
            if points.is_empty() || points.len() != probabilities.len() {
                return Err(Error::InvalidConfig(
                    "discrete constellation needs one probability per point".into(),
                ));
            }
            if probabilities.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidConfig("probabilities must be nonnegative".into()));
            }
            let total: f64 = probabilities.iter().sum();
            if (total - 1.0).abs() > POWER_TOL {
                return Err(Error::InvalidConfig(format!("probabilities sum to {total}, not 1")));
            }
            if points.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::InvalidConfig("constellation points must be finite".into()));
            }
            let power: f64 = points.iter().zip(probabilities).map(|(x, p)| p * x.norm_sqr()).sum();
            if (power - 1.0).abs() > POWER_TOL {
                return Err(Error::InvalidConfig(format!("average power is {power}, not 1")));
            }
        }
        Ok(())
    }

    /// Average symbol energy `E|x|^2`.
    pub fn power(&self) -> f64 {
        match self {
            Constellation::Discrete { points, probabilities } => {
                points.iter().zip(probabilities).map(|(x, p)| p * x.norm_sqr()).sum()
            }
            _ => 1.0,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Constellation::Gaussian)
    }

    /// Points and probabilities in canonical order; `None` for the Gaussian input.
    ///
    /// QPSK order is `(1+j), (-1+j), (1-j), (-1-j)` scaled by `1/sqrt(2)`,
    /// i.e. the index is `bit0 + 2 bit1` with a bit set for a negative component.
    pub fn alphabet(&self) -> Option<(Vec<Complex64>, Vec<f64>)> {
        match self {
            Constellation::Qpsk => Some((QPSK_POINTS.to_vec(), vec![0.25; 4])),
            Constellation::Gaussian => None,
            Constellation::Discrete { points, probabilities } => {
                Some((points.clone(), probabilities.clone()))
            }
        }
    }
}

const QPSK_AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// QPSK points in canonical order.
pub const QPSK_POINTS: [Complex64; 4] = [
    Complex64::new(QPSK_AMPLITUDE, QPSK_AMPLITUDE),
    Complex64::new(-QPSK_AMPLITUDE, QPSK_AMPLITUDE),
    Complex64::new(QPSK_AMPLITUDE, -QPSK_AMPLITUDE),
    Complex64::new(-QPSK_AMPLITUDE, -QPSK_AMPLITUDE),
];

/// Dimensions, noise level and input distribution of the uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    /// Noise variance per complex dimension.
    pub noise_variance: f64,
    pub constellation: Constellation,
}

impl SystemConfig {
    pub fn new(
        num_users: usize,
        num_antennas: usize,
        noise_variance: f64,
        constellation: Constellation,
    ) -> Result<Self> {
        let c = SystemConfig { num_users, num_antennas, noise_variance, constellation };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_antennas == 0 {
            return Err(Error::InvalidConfig("num_users and num_antennas must be positive".into()));
        }
        if !(self.noise_variance >= 0.0) || self.noise_variance.is_infinite() {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.noise_variance
            )));
        }
        self.constellation.validate()
    }

    /// `1 / noise_variance`; infinite for a noiseless system.
    pub fn snr(&self) -> f64 {
        1.0 / self.noise_variance
    }

    /// Antenna-to-user ratio `N / K`.
    pub fn load(&self) -> f64 {
        self.num_antennas as f64 / self.num_users as f64
    }
}

/// Channel matrix `H = H~ / sqrt(K)`, `N x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    matrix: DMatrix<Complex64>,
}

impl ChannelRealization {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Self {
        ChannelRealization { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn num_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.matrix.ncols()
    }

    /// `H x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.num_users() {
            return Err(Error::DimensionMismatch {
                expected: self.num_users(),
                actual: x.len(),
                context: "symbol vector",
            });
        }
        let n = self.num_antennas();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (j, &xj) in x.iter().enumerate() {
            let col = self.matrix.column(j);
            for (yi, h) in y.iter_mut().zip(col.iter()) {
                *yi += h * xj;
            }
        }
        Ok(y)
    }
}

/// Circular complex Gaussian draw with variance `variance`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Draws `H` with i.i.d. `CN(0, 1/K)` entries.
pub fn sample_channel(config: &SystemConfig, seed: u64) -> ChannelRealization {
    let mut rng = stream_rng(seed, Stream::Channel);
    let var = 1.0 / config.num_users as f64;
    // Column-major fill keeps the draw order independent of the storage layout.
    let matrix = DMatrix::from_fn(config.num_antennas, config.num_users, |_, _| {
        complex_normal(&mut rng, var)
    });
    ChannelRealization { matrix }
}

/// Draws `count` i.i.d. symbols from the constellation.
pub fn sample_symbols(constellation: &Constellation, count: usize, seed: u64) -> Result<Vec<Complex64>> {
    let mut rng = stream_rng(seed, Stream::Symbols);
    match constellation {
        Constellation::Qpsk => Ok((0..count)
            .map(|_| {
                let re = if rng.random::<bool>() { -QPSK_AMPLITUDE } else { QPSK_AMPLITUDE };
                let im = if rng.random::<bool>() { -QPSK_AMPLITUDE } else { QPSK_AMPLITUDE };
                Complex64::new(re, im)
            })
            .collect()),
        Constellation::Gaussian => Ok((0..count).map(|_| complex_normal(&mut rng, 1.0)).collect()),
        Constellation::Discrete { points, probabilities } => {
            constellation.validate()?;
            let dist = WeightedIndex::new(probabilities)
                .map_err(|e| Error::InvalidConfig(format!("constellation probabilities: {e}")))?;
            Ok((0..count).map(|_| points[dist.sample(&mut rng)]).collect())
        }
    }
}

/// `y = H x + n` with `n ~ CN(0, noise_variance I)`.
pub fn received_signal(
    channel: &ChannelRealization,
    x: &[Complex64],
    noise_variance: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance {noise_variance} is negative")));
    }
    let mut y = channel.apply(x)?;
    if noise_variance > 0.0 {
        let mut rng = stream_rng(seed, Stream::Noise);
        for yi in y.iter_mut() {
            *yi += complex_normal(&mut rng, noise_variance);
        }
    }
    Ok(y)
}
