//! Uniform midrise quantizer and per-antenna ADC banks.
//!
//! A `kappa`-bit quantizer with step `delta` outputs the `2^kappa` levels
//! `(b - 1/2) delta`, `b = -2^kappa/2 + 1, ..., 2^kappa/2`. Level `(b - 1/2) delta`
//! is produced for inputs in `((b - 1) delta, b delta]`, the outermost cells
//! extending to infinity. Real and imaginary parts are quantized separately.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported bit depth.
pub const MAX_BITS: u32 = 24;

/// ADC resolution: a finite bit depth or an ideal (identity) converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Finite(u32),
    Infinite,
}

/// One ADC: bit depth and step size (the step is unused for `Infinite`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdcSpec {
    pub bits: Resolution,
    pub step: f64,
}

impl PartialEq for AdcSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self.bits, other.bits) {
            (Resolution::Infinite, Resolution::Infinite) => true,
            (Resolution::Finite(a), Resolution::Finite(b)) => a == b && self.step == other.step,
            _ => false,
        }
    }
}

impl AdcSpec {
    pub fn finite(bits: u32, step: f64) -> Result<Self> {
        let s = AdcSpec { bits: Resolution::Finite(bits), step };
        s.validate()?;
        Ok(s)
    }

    pub fn infinite() -> Self {
        AdcSpec { bits: Resolution::Infinite, step: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Resolution::Finite(bits) = self.bits {
            if bits == 0 || bits > MAX_BITS {
                return Err(Error::InvalidConfig(format!("bit depth must be in 1..={MAX_BITS}, got {bits}")));
            }
            if !(self.step > 0.0) || !self.step.is_finite() {
                return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.step)));
            }
        }
        Ok(())
    }

    pub fn is_infinite(&self) -> bool {
        self.bits == Resolution::Infinite
    }

    /// Bit depth, `None` for an ideal converter.
    pub fn bit_depth(&self) -> Option<u32> {
        match self.bits {
            Resolution::Finite(b) => Some(b),
            Resolution::Infinite => None,
        }
    }

    /// Number of output levels per real dimension (`None` if infinite).
    pub fn num_levels(&self) -> Option<u64> {
        self.bit_depth().map(|b| 1u64 << b)
    }

    /// Output levels in increasing order.
    pub fn levels(&self) -> Result<Vec<f64>> {
        let bits = self
            .bit_depth()
            .ok_or_else(|| Error::InvalidConfig("an ideal ADC has no finite alphabet".into()))?;
        let half = 1i64 << (bits - 1);
        Ok(((1 - half)..=half).map(|b| (b as f64 - 0.5) * self.step).collect())
    }

    /// Cell index `b` of the level `(b - 1/2) delta` containing `value`.
    fn index_of_value(&self, value: f64, bits: u32) -> i64 {
        let half = (1i64 << (bits - 1)) as f64;
        (value / self.step).ceil().clamp(1.0 - half, half) as i64
    }

    /// Cell bounds for index `b`, with infinite outer edges.
    pub fn interval_of_index(&self, b: i64) -> QuantInterval {
        let bits = self.bit_depth().expect("finite ADC");
        let half = 1i64 << (bits - 1);
        let low = if b == 1 - half { f64::NEG_INFINITY } else { (b - 1) as f64 * self.step };
        let high = if b == half { f64::INFINITY } else { b as f64 * self.step };
        QuantInterval { low, high }
    }
}

/// Cell `(low, high]` of a quantizer output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantInterval {
    pub low: f64,
    pub high: f64,
}

impl QuantInterval {
    pub fn contains(&self, v: f64) -> bool {
        v > self.low && v <= self.high
    }

    /// Degenerate cell of an ideal converter output.
    pub fn is_point(&self) -> bool {
        self.low == self.high
    }
}

/// Quantizes a real sample.
pub fn quantize_real(value: f64, spec: &AdcSpec) -> Result<f64> {
    if value.is_nan() {
        return Err(Error::NanInput);
    }
    match spec.bits {
        Resolution::Infinite => Ok(value),
        Resolution::Finite(bits) => {
            let b = spec.index_of_value(value, bits);
            Ok((b as f64 - 0.5) * spec.step)
        }
    }
}

/// Quantizes real and imaginary parts independently.
pub fn quantize_complex(value: Complex64, spec: &AdcSpec) -> Result<Complex64> {
    Ok(Complex64::new(quantize_real(value.re, spec)?, quantize_real(value.im, spec)?))
}

/// Cell of the output `level`; an ideal converter yields the point cell `(level, level]`.
pub fn interval_of(level: f64, spec: &AdcSpec) -> Result<QuantInterval> {
    if level.is_nan() {
        return Err(Error::NanInput);
    }
    match spec.bits {
        Resolution::Infinite => Ok(QuantInterval { low: level, high: level }),
        Resolution::Finite(bits) => {
            let half = 1i64 << (bits - 1);
            let scaled = level / spec.step + 0.5;
            let b = scaled.round();
            if (scaled - b).abs() > 1e-9 * scaled.abs().max(1.0) || b < (1 - half) as f64 || b > half as f64 {
                return Err(Error::NotALevel { level });
            }
            Ok(spec.interval_of_index(b as i64))
        }
    }
}

/// Ordered per-antenna ADC assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcBank {
    pub assignment: Vec<AdcSpec>,
}

impl AdcBank {
    pub fn new(assignment: Vec<AdcSpec>) -> Result<Self> {
        for s in &assignment {
            s.validate()?;
        }
        Ok(AdcBank { assignment })
    }

    /// `count` copies of each spec, in the given order.
    pub fn from_groups(groups: &[(AdcSpec, usize)]) -> Result<Self> {
        let assignment = groups
            .iter()
            .flat_map(|&(spec, count)| std::iter::repeat_n(spec, count))
            .collect();
        AdcBank::new(assignment)
    }

    pub fn uniform(spec: AdcSpec, n: usize) -> Result<Self> {
        AdcBank::from_groups(&[(spec, n)])
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Distinct specs with their antenna counts, in order of first appearance.
    pub fn groups(&self) -> Vec<(AdcSpec, usize)> {
        let mut out: Vec<(AdcSpec, usize)> = Vec::new();
        for s in &self.assignment {
            match out.iter_mut().find(|(g, _)| g == s) {
                Some((_, n)) => *n += 1,
                None => out.push((*s, 1)),
            }
        }
        out
    }
}

/// Quantizes antenna `i` of `y` with `bank.assignment[i]`.
pub fn quantize_vector(y: &[Complex64], bank: &AdcBank) -> Result<Vec<Complex64>> {
    if y.len() != bank.len() {
        return Err(Error::DimensionMismatch { expected: bank.len(), actual: y.len(), context: "ADC bank" });
    }
    y.iter().zip(&bank.assignment).map(|(v, s)| quantize_complex(*v, s)).collect()
}
