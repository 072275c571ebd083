//! Gaussian tail functions and numerically stable truncated-Gaussian moments.
//!
//! The truncated moments are the kernel of both the exact (DQ) output step of
//! GAMP and the DQ branch of state evolution. Cells far in a Gaussian tail are
//! handled through the scaled complementary error function
//! `erfcx(x) = exp(x^2) erfc(x)` so that neither the cell probability nor the
//! moment ratios underflow.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standardized arguments beyond this magnitude use the scaled tail formulas.
pub const TAIL_THRESHOLD: f64 = 6.0;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function `Phi(x)`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Gaussian tail probability `Q(x) = 1 - Phi(x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, accurate deep into the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x < -TAIL_THRESHOLD {
        (0.5 * erfcx(-x * FRAC_1_SQRT_2)).ln() - 0.5 * x * x
    } else {
        normal_cdf(x).ln()
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(-x) = 2 - erfc(x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x <= TAIL_THRESHOLD {
        return (x * x).exp() * libm::erfc(x);
    }
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut t = x;
    for n in (1..=60).rev() {
        t = x + 0.5 * n as f64 / t;
    }
    1.0 / (PI.sqrt() * t)
}

/// Moments of `N(mean, std^2)` conditioned on the cell `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    /// Natural log of the cell probability.
    pub log_mass: f64,
    pub mean: f64,
    pub variance: f64,
}

impl TruncatedMoments {
    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }
}

/// Moments of a Gaussian restricted to `(lower, upper]`; either bound may be infinite.
///
/// Returns `None` when the cell is empty (`lower >= upper`), `std` is not
/// positive, or any input is NaN.
pub fn truncated_normal(lower: f64, upper: f64, mean: f64, std: f64) -> Option<TruncatedMoments> {
    if lower.is_nan() || upper.is_nan() || !mean.is_finite() || !(std > 0.0) || lower >= upper {
        return None;
    }
    let a = (lower - mean) / std;
    let b = (upper - mean) / std;
    let z = truncated_std_normal(a, b);
    Some(TruncatedMoments {
        log_mass: z.log_mass,
        mean: mean + std * z.mean,
        variance: std * std * z.variance,
    })
}

/// Truncated moments of the standard normal on `(a, b]`, `a < b`.
fn truncated_std_normal(a: f64, b: f64) -> TruncatedMoments {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return TruncatedMoments { log_mass: 0.0, mean: 0.0, variance: 1.0 };
    }
    // Reflect so that the cell leans to the left of the origin: b <= -a.
    if a + b > 0.0 {
        let m = truncated_std_normal(-b, -a);
        return TruncatedMoments { mean: -m.mean, ..m };
    }
    let width = b - a;
    if width.is_finite() && width * a.abs().max(b.abs()).max(1.0) < 1.0 {
        return narrow_cell(a, b);
    }
    if b < -TAIL_THRESHOLD {
        return lower_tail_cell(a, b);
    }

    let mass = if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2))
    };
    let ratio_a = normal_pdf(a) / mass;
    let ratio_b = normal_pdf(b) / mass;
    let mean = ratio_a - ratio_b;
    let variance = 1.0 + finite_mul(a, ratio_a) - finite_mul(b, ratio_b) - mean * mean;
    TruncatedMoments { log_mass: mass.ln(), mean, variance: variance.max(0.0) }
}

/// Cell entirely in the lower tail (`b < -6`), evaluated relative to `phi(b)`.
fn lower_tail_cell(a: f64, b: f64) -> TruncatedMoments {
    let y = -b;
    if a == f64::NEG_INFINITY {
        // Mills-ratio continued fraction R(y) = 1/(y + 1/(y + 2/(y + 3/...))).
        // With d = 1/(y + 3/(y + 4/...)) and c = 1/(y + 2d):
        //   mean = b - c,   variance = c (2d - c)
        let mut t = y;
        for n in (3..=80).rev() {
            t = y + n as f64 / t;
        }
        let d = 1.0 / t;
        let c = 1.0 / (y + 2.0 * d);
        let log_mass = (0.5 * erfcx(y * FRAC_1_SQRT_2)).ln() - 0.5 * y * y;
        return TruncatedMoments { log_mass, mean: b - c, variance: (c * (2.0 * d - c)).max(0.0) };
    }
    // mass * exp(b^2/2) = (erfcx(-b/sqrt2) - erfcx(-a/sqrt2) exp(-(a^2 - b^2)/2)) / 2
    let decay = (-0.5 * (a - b) * (a + b)).exp();
    let scaled = 0.5 * (erfcx(-b * FRAC_1_SQRT_2) - erfcx(-a * FRAC_1_SQRT_2) * decay);
    let ratio_b = FRAC_1_SQRT_2PI / scaled;
    let ratio_a = ratio_b * decay;
    let mean = ratio_a - ratio_b;
    let variance = 1.0 + a * ratio_a - b * ratio_b - mean * mean;
    TruncatedMoments {
        log_mass: scaled.ln() - 0.5 * b * b,
        mean,
        variance: variance.max(0.0),
    }
}

/// Cells narrow relative to the local density scale: direct Gauss-Legendre
/// moments, weighted relative to the endpoint closest to the origin.
fn narrow_cell(a: f64, b: f64) -> TruncatedMoments {
    let rule = legendre16();
    let anchor = if a <= 0.0 && b >= 0.0 { 0.0 } else if b < 0.0 { b } else { a };
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    let mut first = 0.0;
    for &(node, weight) in rule {
        let x = mid + half * node;
        let w = weight * (-0.5 * (x - anchor) * (x + anchor)).exp();
        total += w;
        first += w * x;
    }
    let mean = first / total;
    let mut second = 0.0;
    for &(node, weight) in rule {
        let x = mid + half * node;
        let w = weight * (-0.5 * (x - anchor) * (x + anchor)).exp();
        second += w * (x - mean) * (x - mean);
    }
    TruncatedMoments {
        log_mass: (total * half).ln() + normal_pdf(anchor).ln(),
        mean,
        variance: second / total,
    }
}

fn legendre16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(16)
            .expect("16-point Gauss-Legendre rule")
            .into_node_weight_pairs()
    })
}

/// `x * y` with the convention `(+-inf) * 0 = 0`.
#[inline]
fn finite_mul(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        x * y
    }
}

/// Probability of `N(mean, std^2)` falling in `(lower, upper]`.
pub fn interval_probability(lower: f64, upper: f64, mean: f64, std: f64) -> f64 {
    let hi = if upper == f64::INFINITY { 1.0 } else { normal_cdf((upper - mean) / std) };
    let lo = if lower == f64::NEG_INFINITY { 0.0 } else { normal_cdf((lower - mean) / std) };
    // Upper-tail cells lose precision as a difference of values near one.
    if lower > mean {
        let hi_t = if upper == f64::INFINITY { 0.0 } else { q_function((upper - mean) / std) };
        return q_function((lower - mean) / std) - hi_t;
    }
    hi - lo
}

/// `sqrt(2)` as used by the per-real-dimension conversions.
pub const SQRT2: f64 = SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn erfcx_matches_direct_evaluation_below_threshold() {
        for &x in &[0.0, 0.5, 1.0, 3.0, 5.5] {
            assert_relative_eq!(erfcx(x), (x * x).exp() * libm::erfc(x), max_relative = 1e-14);
        }
    }

    #[test]
    fn erfcx_reference_values() {
        // 30-digit reference values.
        let cases = [
            (0.5, 0.615_690_344_192_925_874_9),
            (3.0, 0.179_001_151_181_389_950_4),
            (6.0, 0.092_776_567_800_538_354_39),
            (6.5, 0.085_805_670_104_894_601_78),
            (10.0, 0.056_140_992_743_822_585_86),
            (30.0, 0.018_795_888_861_416_751_50),
            (-1.0, 5.008_980_080_762_283_466),
        ];
        for (x, want) in cases {
            assert_relative_eq!(erfcx(x), want, max_relative = 1e-13);
        }
        assert_relative_eq!(erfcx(1e6), 1.0 / (1e6 * PI.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn q_function_reference_points() {
        assert_eq!(q_function(0.0), 0.5);
        assert_relative_eq!(q_function(3.0902), 1.000_108_783_207_071_8e-3, max_relative = 1e-13);
        assert_relative_eq!(q_function(10.0), 7.619_853_024_160_526e-24, max_relative = 1e-13);
        assert_relative_eq!(q_function(-2.0), 0.977_249_868_051_820_8, max_relative = 1e-15);
        assert_relative_eq!(q_function(-1.0) + q_function(1.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn log_cdf_deep_tail() {
        // ln Phi(-40) ~ -800 - ln(40 sqrt(2 pi)) for the leading asymptote
        let v = log_normal_cdf(-40.0);
        let approx = -800.0 - (40.0 * (2.0 * PI).sqrt()).ln();
        assert!((v - approx).abs() < 1e-3, "{v} vs {approx}");
        assert!(v.is_finite());
    }

    #[test]
    fn untruncated_cell_returns_parent_moments() {
        let m = truncated_normal(f64::NEG_INFINITY, f64::INFINITY, 0.7, 2.0).unwrap();
        assert_eq!(m.mean, 0.7);
        assert_eq!(m.variance, 4.0);
        assert_eq!(m.log_mass, 0.0);
    }

    #[test]
    fn symmetric_cell_keeps_mean() {
        let m = truncated_normal(-1.3 + 0.4, 1.3 + 0.4, 0.4, 0.9).unwrap();
        assert_relative_eq!(m.mean, 0.4, epsilon = 1e-15);
        assert!(m.variance < 0.81);
    }

    #[test]
    fn half_line_moments() {
        // E[X | X > 0] = sqrt(2/pi), Var = 1 - 2/pi for a standard normal
        let m = truncated_normal(0.0, f64::INFINITY, 0.0, 1.0).unwrap();
        assert_relative_eq!(m.mean, (2.0 / PI).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(m.variance, 1.0 - 2.0 / PI, max_relative = 1e-13);
        assert_relative_eq!(m.mass(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn far_tail_does_not_underflow() {
        let m = truncated_normal(0.0, f64::INFINITY, -50.0, 1.0).unwrap();
        assert!(m.log_mass.is_finite() && m.log_mass < -1200.0);
        // Inverse Mills ratio ~ y + 1/y, variance ~ 1/y^2.
        assert_relative_eq!(m.mean, 1.0 / 50.0 - 2.0 / 50f64.powi(3), max_relative = 1e-3);
        assert_relative_eq!(m.variance, 1.0 / 2500.0, max_relative = 1e-2);
        let far = truncated_normal(f64::NEG_INFINITY, -1e4, 0.0, 1.0).unwrap();
        assert!(far.variance > 0.0 && far.variance < 1e-7);
        assert!(far.mean < -1e4);
    }

    #[test]
    fn empty_or_invalid_cells_are_rejected() {
        assert!(truncated_normal(1.0, 1.0, 0.0, 1.0).is_none());
        assert!(truncated_normal(0.0, 1.0, 0.0, 0.0).is_none());
        assert!(truncated_normal(f64::NAN, 1.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn interval_probability_upper_tail_precision() {
        let p = interval_probability(10.0, f64::INFINITY, 0.0, 1.0);
        assert_relative_eq!(p, q_function(10.0), max_relative = 1e-14);
        assert!(p > 0.0);
    }
}
