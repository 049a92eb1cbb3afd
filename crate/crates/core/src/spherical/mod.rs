//! The three-dimensional problem. A fluctuation `Ω(t, p)` is expanded in
//! real spherical harmonics, and each radial mode is mapped to the radial
//! variable `f(t, k) = (k / sinh k) Ω` and evolved by the same operator.

mod appendix;
pub mod harmonics;

pub use appendix::{big_m, calibrate_lambda, w0, BigM, RadialOperator3d, BIG_M_CUTOFF_K};
pub use harmonics::{legendre, AngularGrid, AngularSamples};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::schemes::SchemeRegistry;
use crate::evolution::{evolve_observed, Diagnostics, SolverConfig};
use crate::grid::RadialGrid;
use crate::operator::DiscreteOperator;

/// Relative tolerance when matching a field's radial nodes to a `k` grid.
const GRID_MATCH_TOL: f64 = 1e-12;

/// Physical constants of the phonon gas with the linear dispersion `ω = c|p|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub g: f64,
    pub n_c: f64,
    pub m: f64,
    #[serde(rename = "k_B")]
    pub k_b: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
}

impl Default for PhysicalParams {
    /// Units in which `c = 1` and `k = r`.
    fn default() -> Self {
        Self {
            g: 1.0,
            n_c: 1.0,
            m: 1.0,
            k_b: 1.0,
            temperature: 0.5,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("n_c", self.n_c),
            ("m", self.m),
            ("k_B", self.k_b),
            ("T", self.temperature),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "physical parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Sound speed `c = √(g n_c / m)`.
    pub fn sound_speed(&self) -> f64 {
        (self.g * self.n_c / self.m).sqrt()
    }

    /// Momentum per unit wavenumber, `2 k_B T / c`.
    pub fn momentum_scale(&self) -> f64 {
        2.0 * self.k_b * self.temperature / self.sound_speed()
    }

    pub(crate) fn k_of(&self, r: f64) -> f64 {
        self.sound_speed() * r / (2.0 * self.k_b * self.temperature)
    }

    /// Momentum magnitude with wavenumber `k`.
    pub fn r_of(&self, k: f64) -> f64 {
        k * self.momentum_scale()
    }
}

/// `k = c r / (2 k_B T)`.
pub fn wavenumber(params: &PhysicalParams, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(
            "wavenumber",
            format!("momentum must be non-negative, got {r}"),
        ));
    }
    Ok(params.k_of(r))
}

/// Bose-Einstein occupancy `n₀ = 1 / (e^{2k} - 1)`.
pub fn n0(k: f64) -> f64 {
    1.0 / (2.0 * k).exp_m1()
}

/// `n₀(1 + n₀) = 1 / (4 sinh²k)`.
pub fn n0_one_plus_n0(k: f64) -> f64 {
    let s = k.sinh();
    1.0 / (4.0 * s * s)
}

fn k_over_sinh(k: f64) -> f64 {
    if k < 1e-8 {
        1.0 - k * k / 6.0
    } else {
        k / k.sinh()
    }
}

/// Quadrature nodes in `r` with weights for `∫ · dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialR {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

impl RadialR {
    pub fn from_k_grid(grid: &RadialGrid, params: &PhysicalParams) -> Self {
        let s = params.momentum_scale();
        Self {
            nodes: grid.nodes.iter().map(|k| k * s).collect(),
            weights: grid.weights.iter().map(|w| w * s).collect(),
            r_min: grid.k_min * s,
            r_max: grid.k_max * s,
        }
    }

    pub fn k_grid(&self, params: &PhysicalParams) -> RadialGrid {
        RadialGrid {
            nodes: self.nodes.iter().map(|&r| params.k_of(r)).collect(),
            weights: self.weights.iter().map(|&w| params.k_of(w)).collect(),
            k_min: params.k_of(self.r_min),
            k_max: params.k_of(self.r_max),
        }
    }

    /// Fails unless the nodes map onto `grid` through [`wavenumber`].
    pub fn check_matches(&self, grid: &RadialGrid, params: &PhysicalParams) -> Result<()> {
        grid.check_len(self.nodes.len())?;
        for (i, (&r, &k)) in self.nodes.iter().zip(&grid.nodes).enumerate() {
            let kr = params.k_of(r);
            if (kr - k).abs() > GRID_MATCH_TOL * k {
                return Err(Error::InvalidSpec(format!(
                    "radial grid mismatch at node {i}: r = {r} maps to k = {kr}, operator has {k}"
                )));
            }
        }
        Ok(())
    }
}

/// One spherical-harmonics component `Ω_ℓm(r_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub ell: usize,
    #[serde(rename = "m")]
    pub m_index: i64,
    pub radial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalField {
    pub params: PhysicalParams,
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub radial_grid: RadialR,
    /// Every `(ℓ, m)` with `ℓ ≤ L_max`, in the order of [`harmonics::mode_list`].
    pub modes: Vec<Mode>,
}

impl SphericalField {
    pub fn new(params: PhysicalParams, l_max: usize, radial_grid: RadialR, modes: Vec<Mode>) -> Result<Self> {
        let field = Self {
            params,
            l_max,
            radial_grid,
            modes,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn zeros(params: PhysicalParams, l_max: usize, radial_grid: RadialR) -> Self {
        let n = radial_grid.nodes.len();
        let modes = harmonics::mode_list(l_max)
            .into_iter()
            .map(|(ell, m_index)| Mode {
                ell,
                m_index,
                radial: vec![0.0; n],
            })
            .collect();
        Self {
            params,
            l_max,
            radial_grid,
            modes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.radial_grid.nodes.len();
        if self.radial_grid.weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.radial_grid.weights.len(),
            });
        }
        let expected = harmonics::mode_list(self.l_max);
        if self.modes.len() != expected.len() {
            return Err(Error::DimensionMismatch {
                expected: expected.len(),
                got: self.modes.len(),
            });
        }
        for (mode, (ell, m)) in self.modes.iter().zip(expected) {
            if mode.ell != ell || mode.m_index != m {
                return Err(Error::InvalidSpec(format!(
                    "mode ({}, {}) out of order, expected ({ell}, {m})",
                    mode.ell, mode.m_index
                )));
            }
            if mode.radial.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: mode.radial.len(),
                });
            }
            if let Some(index) = mode.radial.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "mode radial data",
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn mode(&self, ell: usize, m: i64) -> Option<&Mode> {
        if ell > self.l_max || m.unsigned_abs() as usize > ell {
            return None;
        }
        self.modes.get(harmonics::mode_index(ell, m))
    }

    fn radial_parts(&self) -> Vec<Vec<f64>> {
        self.modes.iter().map(|m| m.radial.clone()).collect()
    }
}

/// `f_i = k_i Ω_i / sinh k_i` for a radial part sampled at momenta `r`.
pub fn to_radial(omega: &[f64], r: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    if omega.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            got: omega.len(),
        });
    }
    Ok(omega
        .iter()
        .zip(r)
        .map(|(v, &x)| v * k_over_sinh(params.k_of(x)))
        .collect())
}

/// Inverse of [`to_radial`].
pub fn from_radial(f: &[f64], r: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    if f.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            got: f.len(),
        });
    }
    Ok(f.iter().zip(r).map(|(v, &x)| v / k_over_sinh(params.k_of(x))).collect())
}

/// Projects angular samples onto every mode with `ℓ ≤ l_max`.
pub fn decompose(
    samples: &AngularSamples,
    l_max: usize,
    params: PhysicalParams,
    radial: RadialR,
) -> Result<SphericalField> {
    if samples.r != radial.nodes {
        return Err(Error::InvalidSpec("sample radii differ from the radial grid".into()));
    }
    let parts = harmonics::project(samples, l_max)?;
    let modes = harmonics::mode_list(l_max)
        .into_iter()
        .zip(parts)
        .map(|((ell, m_index), radial)| Mode { ell, m_index, radial })
        .collect();
    SphericalField::new(params, l_max, radial, modes)
}

/// Samples the field on `grid`.
pub fn reconstruct(field: &SphericalField, grid: &AngularGrid) -> Result<AngularSamples> {
    harmonics::synthesize(&field.radial_parts(), field.l_max, &field.radial_grid.nodes, grid)
}

/// The coefficients `c_ℓm` of the stationary state `Θ = Σ c_ℓm Y_ℓm |p|`:
/// each mode's `c₀` carried back through the change of variables.
pub fn theta_coefficients(field: &SphericalField) -> Result<Vec<f64>> {
    field.validate()?;
    let params = &field.params;
    let grid = field.radial_grid.k_grid(params);
    let phi0 = grid.phi0_vec();
    let phi_norm = grid.norm(&grid.sample(crate::kernels::phi_unchecked));
    let scale = 1.0 / (phi_norm * params.momentum_scale());
    field
        .modes
        .iter()
        .map(|mode| {
            let f = to_radial(&mode.radial, &field.radial_grid.nodes, params)?;
            Ok(grid.dot(&f, &phi0) * scale)
        })
        .collect()
}

/// The limit `Θ` predicted for `field0`, with radial parts `c_ℓm r`.
pub fn stationary_theta(field0: &SphericalField) -> Result<SphericalField> {
    let coeffs = theta_coefficients(field0)?;
    let mut theta = field0.clone();
    for (mode, c) in theta.modes.iter_mut().zip(coeffs) {
        for (v, &r) in mode.radial.iter_mut().zip(&field0.radial_grid.nodes) {
            *v = c * r;
        }
    }
    Ok(theta)
}

/// `∫ n₀(1+n₀) Ω |p| dp`; only `(0, 0)` survives the angular integral.
pub fn energy_3d(field: &SphericalField) -> f64 {
    moment_00(field, 3)
}

/// `∫ n₀(1+n₀) Ω dp`, the fluctuation of the particle number.
pub fn mass_functional(field: &SphericalField) -> f64 {
    moment_00(field, 2)
}

fn moment_00(field: &SphericalField, power: i32) -> f64 {
    let Some(mode) = field.mode(0, 0) else {
        return 0.0;
    };
    radial_moment(&mode.radial, &field.radial_grid, &field.params, power)
}

fn radial_moment(omega00: &[f64], radial: &RadialR, params: &PhysicalParams, power: i32) -> f64 {
    let sum: f64 = radial
        .nodes
        .iter()
        .zip(&radial.weights)
        .zip(omega00)
        .map(|((&r, &w), &v)| w * r.powi(power) * v * n0_one_plus_n0(params.k_of(r)))
        .sum();
    (4.0 * PI).sqrt() * sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub ell: usize,
    pub m: i64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: f64,
    /// `Σ_ℓm ∫ |Ω_ℓm - c_ℓm r|² r² dr / sinh²k`.
    pub dist_sq: f64,
    pub energy: f64,
    pub mass: f64,
}

impl AggregateRow {
    pub const CSV_HEADER: &'static str = "t,dist_sq,energy,mass";

    pub fn csv_fields(&self) -> [f64; 4] {
        [self.t, self.dist_sq, self.energy, self.mass]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution3d {
    pub field: SphericalField,
    pub theta: SphericalField,
    pub modes: Vec<ModeDiagnostics>,
    pub aggregate: Vec<AggregateRow>,
    /// `max_t (1+t) dist²(t) / dist²(0)`; zero when the data start at `Θ` to
    /// round-off.
    pub decay_constant: f64,
}

/// Evolves every mode with `op`, which must live on the field's `k` grid.
pub fn evolve_3d(field0: &SphericalField, op: &DiscreteOperator, cfg: &SolverConfig) -> Result<Evolution3d> {
    evolve_3d_with(field0, op, cfg, &SchemeRegistry::default())
}

pub fn evolve_3d_with(
    field0: &SphericalField,
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    registry: &SchemeRegistry,
) -> Result<Evolution3d> {
    field0.validate()?;
    let params = field0.params;
    let radial = &field0.radial_grid;
    radial.check_matches(&op.grid, &params)?;
    let theta = stationary_theta(field0)?;
    let s3 = params.momentum_scale().powi(3);

    let runs = field0
        .modes
        .par_iter()
        .map(|mode| {
            let f0 = to_radial(&mode.radial, &radial.nodes, &params)?;
            let want = mode.ell == 0;
            let mut moments = Vec::new();
            let (state, diag) = evolve_observed(&f0, op, cfg, registry, |_, f| {
                if want {
                    let omega = from_radial(f, &radial.nodes, &params).expect("lengths checked");
                    moments.push((
                        radial_moment(&omega, radial, &params, 3),
                        radial_moment(&omega, radial, &params, 2),
                    ));
                }
            })?;
            let omega = from_radial(&state.f, &radial.nodes, &params)?;
            Ok((omega, diag, moments))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut field = field0.clone();
    let mut modes = Vec::with_capacity(runs.len());
    let mut moments = Vec::new();
    for ((mode, (omega, diag, mom)), out) in field0.modes.iter().zip(runs).zip(field.modes.iter_mut()) {
        out.radial = omega;
        if mode.ell == 0 {
            moments = mom;
        }
        modes.push(ModeDiagnostics {
            ell: mode.ell,
            m: mode.m_index,
            diagnostics: diag,
        });
    }

    let rows = modes[0].diagnostics.rows.len();
    let aggregate: Vec<AggregateRow> = (0..rows)
        .map(|i| {
            let dist_sq = s3 * modes.iter().map(|m| m.diagnostics.rows[i].dist_eq.powi(2)).sum::<f64>();
            AggregateRow {
                t: modes[0].diagnostics.rows[i].t,
                dist_sq,
                energy: moments[i].0,
                mass: moments[i].1,
            }
        })
        .collect();
    let d0 = aggregate[0].dist_sq;
    let scale = s3 * modes.iter().map(|m| m.diagnostics.rows[0].l2_norm.powi(2)).sum::<f64>();
    let decay_constant = if d0 > (1e3 * f64::EPSILON).powi(2) * scale {
        aggregate
            .iter()
            .map(|a| (1.0 + a.t) * a.dist_sq / d0)
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(Evolution3d {
        field,
        theta,
        modes,
        aggregate,
        decay_constant,
    })
}
