//! Truncated radial grids: composite Gauss-Legendre panels on
//! `(k_min, k_max)`, geometrically graded toward the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{phi_unchecked, PHI0_SCALE};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n: usize,
    pub k_min: f64,
    pub k_max: f64,
    /// Ratio between consecutive panel widths until the width cap is reached.
    pub panel_growth: f64,
    pub nodes_per_panel: usize,
    /// Allowed deviation of `Σ w_i φ₀(k_i)²` from 1.
    pub grid_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 400,
            k_min: 1e-3,
            k_max: 30.0,
            panel_growth: 1.5,
            nodes_per_panel: 4,
            grid_tol: 1e-6,
        }
    }
}

impl GridSpec {
    /// Finer grading and a smaller cutoff, so that windows `(ε, 2ε)` near
    /// the origin hold enough nodes for the slow decay dynamics.
    pub fn decay_default() -> Self {
        Self {
            k_min: 1e-5,
            panel_growth: 1.25,
            ..Self::default()
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n < 8 {
            return fail(format!("grid needs N >= 8, got {}", self.n));
        }
        if !(self.k_min > 0.0 && self.k_min.is_finite() && self.k_max.is_finite() && self.k_min < self.k_max) {
            return fail(format!("need 0 < k_min < k_max, got ({}, {})", self.k_min, self.k_max));
        }
        if !(self.panel_growth >= 1.0 && self.panel_growth.is_finite()) {
            return fail(format!("panel_growth must be >= 1, got {}", self.panel_growth));
        }
        if self.nodes_per_panel == 0 || self.nodes_per_panel > self.n {
            return fail(format!(
                "nodes_per_panel must lie in [1, N], got {}",
                self.nodes_per_panel
            ));
        }
        if !(self.grid_tol > 0.0) {
            return fail(format!("grid_tol must be positive, got {}", self.grid_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i φ₀(k_i)²`, which approximates 1.
    pub fn phi0_norm_sq(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| {
                let p = PHI0_SCALE * phi_unchecked(k);
                w * p * p
            })
            .sum()
    }

    /// `φ(k_i) / ‖φ‖_h`: the equilibrium profile normalized in the discrete
    /// inner product, so the projection onto it is exactly idempotent.
    pub fn phi0_vec(&self) -> Vec<f64> {
        let phi: Vec<f64> = self.nodes.iter().map(|&k| phi_unchecked(k)).collect();
        let norm = self.norm(&phi);
        phi.into_iter().map(|p| p / norm).collect()
    }

    /// Number of nodes strictly inside `(lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.nodes.iter().filter(|&&k| k > lo && k < hi).count()
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// Discrete `L²` inner product `Σ w_i f_i g_i`.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }

    /// Samples `f` at the nodes.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&k| f(k)).collect()
    }
}

/// Panel widths `min(k_min g^i, h_cap)` summing to `length`, with the cap
/// found by bisection; widths are rescaled when the uncapped series is
/// already too short.
fn panel_widths(panels: usize, first: f64, growth: f64, length: f64) -> Vec<f64> {
    let geometric: Vec<f64> = (0..panels).map(|i| first * growth.powi(i as i32)).collect();
    let total: f64 = geometric.iter().sum();
    if total <= length {
        let scale = length / total;
        return geometric.into_iter().map(|h| h * scale).collect();
    }
    let capped_sum = |cap: f64| geometric.iter().map(|&h| h.min(cap)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, geometric[panels - 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capped_sum(mid) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut widths: Vec<f64> = geometric.iter().map(|&h| h.min(hi)).collect();
    let s: f64 = widths.iter().sum();
    for h in &mut widths {
        *h *= length / s;
    }
    widths
}

pub fn build_grid(spec: &GridSpec) -> Result<RadialGrid> {
    spec.validate()?;
    let panels = spec.n / spec.nodes_per_panel;
    let extra = spec.n % spec.nodes_per_panel;
    let length = spec.k_max - spec.k_min;
    let widths = panel_widths(panels, spec.k_min, spec.panel_growth, length);

    let mut nodes = Vec::with_capacity(spec.n);
    let mut weights = Vec::with_capacity(spec.n);
    let base = GaussLegendre::new(spec.nodes_per_panel);
    let bumped = GaussLegendre::new(spec.nodes_per_panel + 1);
    let mut a = spec.k_min;
    for (i, &h) in widths.iter().enumerate() {
        let b = if i + 1 == panels { spec.k_max } else { a + h };
        // Leftover nodes go to the smallest panels, where resolution matters most.
        let rule = if i < extra { &bumped } else { &base };
        for (x, w) in rule.mapped(a, b) {
            nodes.push(x);
            weights.push(w);
        }
        a = b;
    }
    let grid = RadialGrid {
        nodes,
        weights,
        k_min: spec.k_min,
        k_max: spec.k_max,
    };
    let deviation = (grid.phi0_norm_sq() - 1.0).abs();
    if deviation > spec.grid_tol {
        return Err(Error::InvalidSpec(format!(
            "grid normalization |Σ w φ₀² - 1| = {deviation:e} exceeds grid_tol {:e}",
            spec.grid_tol
        )));
    }
    Ok(grid)
}
