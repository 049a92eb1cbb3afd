use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::presets::{Bump, InitialData};
use super::schemes::SchemeRegistry;
use super::{measure, Solver, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::operator::{project_p, DiscreteOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub t_half: f64,
}

/// `f - c₀(f) φ₀`.
pub fn remove_equilibrium(f: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    let (_, pf) = project_p(f, grid)?;
    Ok(f.iter().zip(&pf).map(|(a, b)| a - b).collect())
}

/// For each `ε`, evolves the normalized indicator of `(ε, 2ε)` with its
/// equilibrium component removed and reports the first time its distance
/// to equilibrium halves (linearly interpolated between steps). Runs are
/// independent and execute in parallel; `cfg.t_end` caps each run.
pub fn experiment_no_uniform_decay(op: &DiscreteOperator, cfg: &SolverConfig, eps_list: &[f64]) -> Result<Vec<EpsRow>> {
    for &eps in eps_list {
        if !(eps > 0.0 && 2.0 * eps < 1.0) {
            return Err(Error::InvalidSpec(format!("eps must satisfy 0 < 2 eps < 1, got {eps}")));
        }
    }
    let registry = SchemeRegistry::default();
    let solver = Solver::new(op, cfg, &registry)?;
    let data = eps_list
        .iter()
        .map(|&eps| {
            let bump = Bump { eps }.sample(&op.grid)?;
            remove_equilibrium(&bump, &op.grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = cfg.steps();
    eps_list
        .par_iter()
        .zip(data.par_iter())
        .map(|(&eps, g0)| {
            let d0 = measure(op, solver.phi0(), 0.0, g0).dist_eq;
            let target = 0.5 * d0;
            let mut f = g0.clone();
            let mut prev = d0;
            for i in 1..=steps {
                f = solver.advance(&f)?;
                let d = measure(op, solver.phi0(), 0.0, &f).dist_eq;
                if d <= target {
                    let frac = (prev - target) / (prev - d);
                    let t_half = (i as f64 - 1.0 + frac) * cfg.dt;
                    return Ok(EpsRow { eps, t_half });
                }
                prev = d;
            }
            Err(Error::NotReached { eps, t_max: cfg.t_end })
        })
        .collect()
}
