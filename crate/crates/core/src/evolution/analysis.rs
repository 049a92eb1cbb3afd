use serde::{Deserialize, Serialize};

use super::Diagnostics;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::interp::Pchip;
use crate::quadrature::{integrate, QuadratureConfig};

/// Which hypothesis of the decay theorem the data plausibly satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `∫_0^1 f₀²/k dk < ∞`.
    Condition1,
    /// `lim_{k→0} f₀(k)` exists.
    Condition2,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDataReport {
    /// `∫_{k_min}^1 f₀²/k dk` from the interpolated data.
    pub i_value: f64,
    /// Extrapolated `f₀(0)`, `None` when the estimate is unstable.
    pub a_estimate: Option<f64>,
    /// Slope of `log|f₀|` against `log k` at the two smallest nodes.
    pub local_exponent: f64,
    pub condition_met: Condition,
}

/// Extrapolations to `k = 0` are accepted when the quadratic and linear
/// estimates agree to this fraction of the data scale.
const EXTRAPOLATION_SPREAD: f64 = 1e-2;
/// Local exponents above this count as vanishing at the origin.
const VANISHING_EXPONENT: f64 = 0.05;

/// Grid data cannot certify a continuum limit; this is a diagnostic only.
pub fn classify_initial_data(f0: &[f64], grid: &RadialGrid) -> Result<InitialDataReport> {
    grid.check_len(f0.len())?;
    if grid.len() < 3 {
        return Err(Error::InsufficientData("classification needs three nodes".into()));
    }
    let upper = grid.nodes.partition_point(|&k| k <= 1.0);
    let interp = Pchip::new(&grid.nodes, f0)?;
    let i_value = if grid.k_min < 1.0 {
        // ∫ f²/k dk = ∫ f(e^u)² du over u ∈ (ln k_min, 0), broken at every node.
        let mut breaks = vec![grid.k_min.ln()];
        breaks.extend(grid.nodes[..upper].iter().map(|k| k.ln()));
        breaks.push(0.0);
        let cfg = QuadratureConfig {
            rel_tol: 1e-8,
            max_panels: 100_000,
            ..QuadratureConfig::default()
        };
        integrate(
            |u| {
                let v = interp.eval(u.exp());
                v * v
            },
            &breaks,
            &cfg,
        )?
        .value
    } else {
        0.0
    };

    let (x, y) = (&grid.nodes[..3], &f0[..3]);
    let linear = y[0] - x[0] * (y[1] - y[0]) / (x[1] - x[0]);
    let l = |i: usize, j: usize, m: usize| x[j] * x[m] / ((x[i] - x[j]) * (x[i] - x[m]));
    let quadratic = y[0] * l(0, 1, 2) + y[1] * l(1, 0, 2) + y[2] * l(2, 0, 1);
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let a_estimate = ((quadratic - linear).abs() <= EXTRAPOLATION_SPREAD * scale).then_some(quadratic);

    let local_exponent = if y[0] == 0.0 && y[1] == 0.0 {
        f64::INFINITY
    } else {
        (y[1].abs().ln() - y[0].abs().ln()) / (x[1].ln() - x[0].ln())
    };
    let condition_met = if local_exponent > VANISHING_EXPONENT {
        Condition::Condition1
    } else if a_estimate.is_some() {
        Condition::Condition2
    } else {
        Condition::Neither
    };
    Ok(InitialDataReport {
        i_value,
        a_estimate,
        local_exponent,
        condition_met,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `log dist_eq` against `log(1 + t)`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rows: usize,
}

pub const MIN_FIT_ROWS: usize = 10;

/// Fits `dist_eq ≈ C (1+t)^slope` over rows with `t ∈ [t_lo, t_hi]`. Rows at
/// or below the round-off floor `10³ ε ‖f₀‖` end the window.
pub fn decay_fit(diag: &Diagnostics, window: (f64, f64)) -> Result<DecayFit> {
    let first = diag
        .rows
        .first()
        .ok_or_else(|| Error::InsufficientData("empty diagnostics".into()))?;
    let floor = 1e3 * f64::EPSILON * first.l2_norm;
    let series: Vec<(f64, f64)> = diag.rows.iter().map(|r| (r.t, r.dist_eq)).collect();
    power_law_fit(&series, window, floor)
}

/// Least-squares fit of `y ≈ C (1+t)^slope` to `(t, y)` pairs with
/// `t ∈ [t_lo, t_hi]`, stopping at the first `y ≤ floor`.
pub fn power_law_fit(series: &[(f64, f64)], window: (f64, f64), floor: f64) -> Result<DecayFit> {
    let (t_lo, t_hi) = window;
    let mut pts = Vec::new();
    let mut floor_time = None;
    for &(t, y) in series.iter().filter(|p| p.0 <= t_hi) {
        if y <= floor {
            floor_time = Some(t);
            break;
        }
        if t >= t_lo {
            pts.push(((1.0 + t).ln(), y.ln()));
        }
    }
    if pts.len() < MIN_FIT_ROWS {
        return Err(match floor_time {
            Some(floor_time) => Error::DegenerateFit { floor, floor_time },
            None => Error::InsufficientData(format!(
                "{} rows in window [{t_lo}, {t_hi}], need {MIN_FIT_ROWS}",
                pts.len()
            )),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        slope,
        intercept,
        r2,
        rows: pts.len(),
    })
}
