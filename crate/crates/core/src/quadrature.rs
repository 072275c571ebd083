//! Quadrature rules for expectations over a standard normal variable.
//!
//! `GaussianRule` holds nodes `u_k` and weights `w_k` with
//! `sum_k w_k f(u_k) ~ E[f(u)]`, `u ~ N(0, 1)`.

use std::sync::OnceLock;

use gauss_quad::{GaussHermite, GaussLegendre};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::normal_pdf;

/// Nodes per panel of the composite rule.
const PANEL_ORDER: usize = 6;

/// How expectations over `u ~ N(0, 1)` are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quadrature {
    /// Fixed Gauss-Hermite rule with the given node count.
    GaussHermite { nodes: usize },
    /// Gauss-Legendre panels on `[-half_width, half_width]` whose width
    /// shrinks with the feature scale of the integrand.
    Composite { half_width: f64, max_panel_width: f64, max_panels: usize },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Composite { half_width: 10.0, max_panel_width: 0.5, max_panels: 4000 }
    }
}

impl Quadrature {
    /// Builds a rule resolving integrand features of width `feature_scale` in `u`.
    ///
    /// The Gauss-Hermite variant ignores `feature_scale`.
    pub fn rule(&self, feature_scale: f64) -> Result<GaussianRule> {
        match *self {
            Quadrature::GaussHermite { nodes } => GaussianRule::gauss_hermite(nodes),
            Quadrature::Composite { half_width, max_panel_width, max_panels } => {
                if !(half_width > 0.0) || !(max_panel_width > 0.0) || max_panels == 0 {
                    return Err(Error::InvalidConfig("composite quadrature needs positive extents".into()));
                }
                let width = if feature_scale.is_finite() && feature_scale > 0.0 {
                    (0.5 * feature_scale).min(max_panel_width)
                } else {
                    max_panel_width
                };
                let panels = ((2.0 * half_width / width).ceil() as usize).clamp(1, max_panels);
                Ok(GaussianRule::composite(half_width, panels))
            }
        }
    }
}

/// Discrete approximation of the standard normal measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    /// Gauss-Hermite rule rescaled from weight `exp(-x^2)` to the standard normal.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        let rule = GaussHermite::new(n)
            .map_err(|e| Error::InvalidConfig(format!("Gauss-Hermite rule with {n} nodes: {e}")))?;
        let scale = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .into_node_weight_pairs()
            .into_iter()
            .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / scale))
            .unzip();
        Ok(GaussianRule { nodes, weights })
    }

    /// `panels` equal Gauss-Legendre panels on `[-half_width, half_width]`,
    /// each weighted by the normal density.
    pub fn composite(half_width: f64, panels: usize) -> Self {
        let base = legendre_panel();
        let h = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for k in 0..panels {
            let mid = -half_width + (k as f64 + 0.5) * h;
            for &(x, w) in base {
                let u = mid + 0.5 * h * x;
                nodes.push(u);
                weights.push(0.5 * h * w * normal_pdf(u));
            }
        }
        GaussianRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E[f(u)]` under the rule.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(u, w)| w * f(u)).sum()
    }
}

fn legendre_panel() -> &'static [(f64, f64)] {
    static PANEL: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    PANEL.get_or_init(|| {
        GaussLegendre::new(PANEL_ORDER)
            .expect("Gauss-Legendre panel rule")
            .into_node_weight_pairs()
    })
}
