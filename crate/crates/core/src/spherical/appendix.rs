//! The three-dimensional rates `W₀` and `M` written in momentum variables,
//! and the radial operator they define on a mode.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{n0, PhysicalParams, RadialR};
use crate::error::{Error, Result};
use crate::kernels::gamma;
use crate::quadrature::{integrate, QuadratureConfig};

/// Wavenumber at which `bigM.from_w0` is truncated.
pub const BIG_M_CUTOFF_K: f64 = 60.0;

fn prefactor(params: &PhysicalParams) -> f64 {
    9.0 / (32.0 * PI * PI * params.n_c)
}

/// One ordered term `(a-b)² n₀(a)(1+n₀(b))(1+n₀(a-b))` for `a > b`.
fn ordered_term(a: f64, b: f64, params: &PhysicalParams) -> f64 {
    let d = a - b;
    let kd = params.k_of(d);
    // d² n₀(d) stays finite as d → 0 and vanishes in the limit.
    let dn = if kd == 0.0 { 0.0 } else { d * d * n0(kd) };
    let dn1 = d * d + dn;
    n0(params.k_of(a)) * (1.0 + n0(params.k_of(b))) * dn1
}

/// `W₀` with the diagonal filled by its limit from either side.
pub(crate) fn w0_unchecked(r: f64, r2: f64, params: &PhysicalParams) -> f64 {
    let direct = if r > r2 {
        ordered_term(r, r2, params)
    } else if r2 > r {
        ordered_term(r2, r, params)
    } else {
        0.0
    };
    let s = r + r2;
    let (k, k2) = (params.k_of(r), params.k_of(r2));
    let reverse = s * s * n0(params.k_of(s)) * ((1.0 + n0(k)) * (1.0 + n0(k2)));
    prefactor(params) * (direct - reverse)
}

/// Angular-averaged transition rate `W₀(r, r')` between momenta of
/// magnitude `r` and `r'`, with occupancies at the mapped wavenumbers.
pub fn w0(r: f64, r2: f64, params: &PhysicalParams) -> Result<f64> {
    if !(r > 0.0 && r2 > 0.0 && r.is_finite() && r2.is_finite()) {
        return Err(Error::domain("w0", format!("needs r, r' > 0, got ({r}, {r2})")));
    }
    if r == r2 {
        return Err(Error::domain("w0", format!("undefined on the diagonal r = r' = {r}")));
    }
    Ok(w0_unchecked(r, r2, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    /// `(1/ω(cr)) ∫ W₀(r, r') ω(cr') r'² dr'` by quadrature.
    pub from_w0: f64,
    /// `Γ(k) n₀(1+n₀) = Γ(k) / (4 sinh²k)`.
    pub closed: f64,
}

/// Loss rate `M(r)` evaluated from `W₀` and from the collision frequency.
pub fn big_m(r: f64, params: &PhysicalParams, cfg: &QuadratureConfig) -> Result<BigM> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("big_m", format!("needs r > 0, got {r}")));
    }
    let k = params.k_of(r);
    let r_max = params.r_of(BIG_M_CUTOFF_K);
    let mut breaks = vec![0.0];
    breaks.extend(
        [1.0, 4.0, 16.0]
            .into_iter()
            .map(|kb| params.r_of(kb))
            .chain(std::iter::once(r))
            .filter(|&b| b < r_max),
    );
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.push(r_max);
    // ω(cr) = c·r up to constants that cancel in the ratio.
    let from_w0 = integrate(|x| w0_unchecked(r, x, params) * x * x * x, &breaks, cfg)?.value / r;
    let sinh = k.sinh();
    let closed = gamma(k, cfg)? / (4.0 * sinh * sinh);
    Ok(BigM { from_w0, closed })
}

/// The factor `λ = closed / from_w0` at `r_ref`, absorbing the constants
/// the two evaluations of `M` disagree by.
pub fn calibrate_lambda(r_ref: f64, params: &PhysicalParams, cfg: &QuadratureConfig) -> Result<f64> {
    let m = big_m(r_ref, params, cfg)?;
    Ok(m.closed / m.from_w0)
}

/// The mode equation `n₀(1+n₀) ∂_tΩ = -M Ω + ∫ W Ω' r'² dr'` discretized on
/// a radial grid, with `W = λ W₀` and `M` taken from the same quadrature so
/// that `Ω ∝ r` is annihilated to round-off.
#[derive(Debug, Clone)]
pub struct RadialOperator3d {
    pub lambda: f64,
    pub w: DMatrix<f64>,
    pub m: Vec<f64>,
    r: Vec<f64>,
    /// `r_j² w_j`.
    measure: Vec<f64>,
}

impl RadialOperator3d {
    pub fn new(radial: &RadialR, params: &PhysicalParams, lambda: f64) -> Result<Self> {
        let n = radial.nodes.len();
        if radial.weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: radial.weights.len(),
            });
        }
        let r = radial.nodes.clone();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| lambda * w0_unchecked(r[i], r[j], params)).collect())
            .collect();
        let w = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let measure: Vec<f64> = r.iter().zip(&radial.weights).map(|(x, w)| x * x * w).collect();
        let m = (0..n)
            .map(|i| (0..n).map(|j| w[(i, j)] * r[j] * measure[j]).sum::<f64>() / r[i])
            .collect();
        Ok(Self {
            lambda,
            w,
            m,
            r,
            measure,
        })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `-M Ω + ∫ W Ω' r'² dr'`.
    pub fn apply(&self, omega: &[f64]) -> Result<Vec<f64>> {
        if omega.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: omega.len(),
            });
        }
        Ok((0..self.len())
            .map(|i| {
                let gain: f64 = (0..self.len())
                    .map(|j| self.w[(i, j)] * omega[j] * self.measure[j])
                    .sum();
                gain - self.m[i] * omega[i]
            })
            .collect())
    }

    /// `‖L Θ‖ / ‖M Θ‖` for `Θ = r`.
    pub fn theta_residual(&self) -> Result<f64> {
        let res = self.apply(&self.r)?;
        let num = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        let den = self
            .m
            .iter()
            .zip(&self.r)
            .map(|(m, r)| (m * r).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(num / den)
    }
}
