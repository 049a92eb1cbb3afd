//! Time integration of `∂f/∂t = E(f)` on the grid, with the diagnostics used
//! to measure conservation, dissipation and the rate of relaxation.

mod analysis;
mod experiments;
pub mod presets;
pub mod schemes;

pub use analysis::{
    classify_initial_data, decay_fit, power_law_fit, Condition, DecayFit, InitialDataReport, MIN_FIT_ROWS,
};
pub use experiments::{experiment_no_uniform_decay, remove_equilibrium, EpsRow};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::DiscreteOperator;
use schemes::{SchemeRegistry, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Registered scheme name, see [`SchemeRegistry`].
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    /// Restore `c₀` after every step; `None` defers to the scheme default.
    pub conservation_fix: Option<bool>,
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: "crank-nicolson".into(),
            dt: 1e-2,
            t_end: 200.0,
            conservation_fix: None,
            record_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "t_end must exceed dt, got t_end = {}, dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidSpec("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        let s = self.t_end / self.dt;
        let r = s.round();
        if (s - r).abs() <= 1e-9 * s {
            r as usize
        } else {
            s.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub t: f64,
    pub l2_norm: f64,
    pub energy: f64,
    pub c0: f64,
    pub dist_eq: f64,
    pub min_f: f64,
    pub gamma_norm: f64,
    /// `∫_0^t ‖f - c₀φ₀‖_Γ² ds`, accumulated by the trapezoid rule over
    /// every step (not only the recorded ones).
    pub dissipation: f64,
}

impl DiagRow {
    pub const CSV_HEADER: &'static str = "t,l2_norm,energy,c0,dist_eq,min_f,gamma_norm";

    pub fn csv_fields(&self) -> [f64; 7] {
        [
            self.t,
            self.l2_norm,
            self.energy,
            self.c0,
            self.dist_eq,
            self.min_f,
            self.gamma_norm,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rows: Vec<DiagRow>,
}

/// Measures `f` at time `t`; `dissipation` is filled in by the caller.
pub fn measure(op: &DiscreteOperator, phi0: &[f64], t: f64, f: &[f64]) -> DiagRow {
    let grid = &op.grid;
    let c0 = grid.dot(f, phi0);
    let g: Vec<f64> = f.iter().zip(phi0).map(|(v, p)| v - c0 * p).collect();
    DiagRow {
        t,
        l2_norm: grid.norm(f),
        energy: op.energy(f),
        c0,
        dist_eq: grid.norm(&g),
        min_f: f.iter().copied().fold(f64::INFINITY, f64::min),
        gamma_norm: op.gamma_norm(&g),
        dissipation: 0.0,
    }
}

/// A scheme prepared for one operator and step size.
pub struct Solver<'a> {
    op: &'a DiscreteOperator,
    stepper: Box<dyn Stepper + 'a>,
    fix: bool,
    phi0: Vec<f64>,
    pub dt: f64,
}

impl<'a> Solver<'a> {
    pub fn new(op: &'a DiscreteOperator, cfg: &SolverConfig, registry: &SchemeRegistry) -> Result<Self> {
        cfg.validate()?;
        let scheme = registry.get(&cfg.scheme)?;
        Ok(Self {
            op,
            stepper: scheme.prepare(op, cfg.dt)?,
            fix: cfg.conservation_fix.unwrap_or(scheme.default_conservation_fix()),
            phi0: op.grid.phi0_vec(),
            dt: cfg.dt,
        })
    }

    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    pub fn advance(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.op.grid.check_len(f.len())?;
        let mut next = self.stepper.advance(f)?;
        if self.fix {
            let grid = &self.op.grid;
            let shift = grid.dot(f, &self.phi0) - grid.dot(&next, &self.phi0);
            for (v, p) in next.iter_mut().zip(&self.phi0) {
                *v += shift * p;
            }
        }
        if let Some(index) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "solution",
                index,
            });
        }
        Ok(next)
    }
}

/// One step from `state` with the default scheme registry.
pub fn step(state: &State, op: &DiscreteOperator, cfg: &SolverConfig) -> Result<State> {
    let solver = Solver::new(op, cfg, &SchemeRegistry::default())?;
    Ok(State {
        t: state.t + cfg.dt,
        f: solver.advance(&state.f)?,
    })
}

pub fn evolve(f0: &[f64], op: &DiscreteOperator, cfg: &SolverConfig) -> Result<(State, Diagnostics)> {
    evolve_with(f0, op, cfg, &SchemeRegistry::default())
}

pub fn evolve_with(
    f0: &[f64],
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    registry: &SchemeRegistry,
) -> Result<(State, Diagnostics)> {
    evolve_observed(f0, op, cfg, registry, |_, _| {})
}

/// Like [`evolve_with`], calling `observe(t, f)` at every recorded row.
pub fn evolve_observed<O: FnMut(f64, &[f64])>(
    f0: &[f64],
    op: &DiscreteOperator,
    cfg: &SolverConfig,
    registry: &SchemeRegistry,
    mut observe: O,
) -> Result<(State, Diagnostics)> {
    op.grid.check_len(f0.len())?;
    if let Some(index) = f0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial data",
            index,
        });
    }
    let solver = Solver::new(op, cfg, registry)?;
    let steps = cfg.steps();
    let mut f = f0.to_vec();
    let mut prev = measure(op, solver.phi0(), 0.0, &f);
    let mut diag = Diagnostics { rows: vec![prev] };
    observe(0.0, &f);
    for i in 1..=steps {
        let t = i as f64 * cfg.dt;
        f = match solver.advance(&f) {
            Ok(next) => next,
            Err(e) => {
                if let Some(last) = diag.rows.last() {
                    warn!("aborting at t = {t}: {e}; last recorded diagnostics {last:?}");
                }
                return Err(e);
            }
        };
        let mut row = measure(op, solver.phi0(), t, &f);
        row.dissipation = prev.dissipation + 0.5 * cfg.dt * (prev.gamma_norm.powi(2) + row.gamma_norm.powi(2));
        if i % cfg.record_every == 0 || i == steps {
            diag.rows.push(row);
            observe(t, &f);
        }
        prev = row;
    }
    let t = steps as f64 * cfg.dt;
    Ok((State { t, f }, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::operator::{assemble, GammaMode};
    use crate::quadrature::QuadratureConfig;

    fn op() -> DiscreteOperator {
        let grid = build_grid(&GridSpec::default().with_n(80)).unwrap();
        assemble(&grid, &QuadratureConfig::default(), GammaMode::KernelConsistent).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig {
                dt: 0.0,
                ..Default::default()
            },
            SolverConfig {
                t_end: 1e-3,
                ..Default::default()
            },
            SolverConfig {
                record_every: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert_eq!(SolverConfig::default().steps(), 20_000);
        assert_eq!(
            SolverConfig {
                t_end: 0.105,
                dt: 0.01,
                ..Default::default()
            }
            .steps(),
            11
        );
    }

    #[test]
    fn equilibrium_is_stationary_for_every_scheme() {
        let op = op();
        for scheme in SchemeRegistry::default().names() {
            let cfg = SolverConfig {
                scheme: scheme.into(),
                t_end: 1.0,
                ..Default::default()
            };
            let phi = op.phi_vec.clone();
            let s = step(&State { t: 0.0, f: phi.clone() }, &op, &cfg).unwrap();
            let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in s.f.iter().zip(&phi) {
                assert!((a - b).abs() <= 1e-12 * scale, "{scheme}");
            }
        }
    }

    #[test]
    fn records_rows_on_stride_and_end() {
        let op = op();
        let cfg = SolverConfig {
            t_end: 0.25,
            dt: 0.01,
            record_every: 10,
            ..Default::default()
        };
        let f0 = op.grid.sample(|k| (-k).exp());
        let (fin, diag) = evolve(&f0, &op, &cfg).unwrap();
        let ts: Vec<f64> = diag.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 4);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!((fin.t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn unknown_scheme_and_bad_length() {
        let op = op();
        let cfg = SolverConfig {
            scheme: "rk4".into(),
            ..Default::default()
        };
        assert!(matches!(evolve(&op.phi_vec, &op, &cfg), Err(Error::Unknown { .. })));
        assert!(evolve(&[1.0, 2.0], &op, &SolverConfig::default()).is_err());
        let mut nan = op.phi_vec.clone();
        nan[0] = f64::NAN;
        assert!(matches!(
            evolve(&nan, &op, &SolverConfig::default()),
            Err(Error::NonFinite { .. })
        ));
    }
}
