//! Legendre polynomials, real orthonormal spherical harmonics, and exact
//! angular projection on Gauss-Legendre × uniform-azimuth product grids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub const MAX_LEGENDRE_DEGREE: usize = 64;

/// `P_n(x)` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> Result<f64> {
    if n > MAX_LEGENDRE_DEGREE {
        return Err(Error::domain(
            "legendre",
            format!("degree {n} exceeds {MAX_LEGENDRE_DEGREE}"),
        ));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::domain("legendre", format!("argument {x} outside [-1, 1]")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

/// Position of `(ℓ, m)` in the flat mode ordering `ℓ = 0, 1, ...; m = -ℓ..=ℓ`.
pub fn mode_index(ell: usize, m: i64) -> usize {
    ((ell * ell + ell) as i64 + m) as usize
}

/// Number of modes with `ℓ ≤ l_max`.
pub fn mode_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// All `(ℓ, m)` pairs with `ℓ ≤ l_max` in flat order.
pub fn mode_list(l_max: usize) -> Vec<(usize, i64)> {
    (0..=l_max)
        .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
        .collect()
}

/// Every real orthonormal `Y_ℓm(θ, ϕ)` with `ℓ ≤ l_max` at `x = cos θ`.
/// `m > 0` pairs with `cos(mϕ)`, `m < 0` with `sin(|m|ϕ)`.
#[allow(clippy::needless_range_loop)]
pub fn real_harmonics(l_max: usize, x: f64, azimuth: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    // p[l][m]: associated Legendre functions normalized so the m = 0
    // harmonic is p[l][0] and the others carry an extra √2.
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..l_max {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let mut y = vec![0.0; mode_count(l_max)];
    for l in 0..=l_max {
        let base = l * l + l;
        y[base] = p[l][0];
        for m in 1..=l {
            let mf = m as f64;
            y[base + m] = std::f64::consts::SQRT_2 * p[l][m] * (mf * azimuth).cos();
            y[base - m] = std::f64::consts::SQRT_2 * p[l][m] * (mf * azimuth).sin();
        }
    }
    y
}

/// Gauss-Legendre nodes in `cos θ` times uniform azimuths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub cos_theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub n_phi: usize,
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidSpec(
                "angular grid needs at least one node per direction".into(),
            ));
        }
        let rule = GaussLegendre::new(n_theta);
        Ok(Self {
            cos_theta: rule.nodes,
            theta_weights: rule.weights,
            n_phi,
        })
    }

    /// The smallest grid that integrates products of degree-`l_max`
    /// harmonics exactly.
    pub fn for_degree(l_max: usize) -> Self {
        Self::new(l_max + 1, 2 * l_max + 1).expect("non-empty grid")
    }

    pub fn len(&self) -> usize {
        self.cos_theta.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The largest degree for which projection is exact.
    pub fn max_degree(&self) -> usize {
        (self.cos_theta.len() - 1).min((self.n_phi - 1) / 2)
    }

    pub fn check_degree(&self, l_max: usize) -> Result<()> {
        if self.cos_theta.len() < l_max + 1 || self.n_phi < 2 * l_max + 1 {
            return Err(Error::AngularResolution {
                l_max,
                detail: format!(
                    "{} polar and {} azimuthal nodes; need {} and {}",
                    self.cos_theta.len(),
                    self.n_phi,
                    l_max + 1,
                    2 * l_max + 1
                ),
            });
        }
        Ok(())
    }

    /// `(cos θ, ϕ, weight)` for every point; azimuth varies fastest.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let dphi = 2.0 * PI / self.n_phi as f64;
        self.cos_theta
            .iter()
            .zip(&self.theta_weights)
            .flat_map(|(&x, &w)| (0..self.n_phi).map(move |j| (x, j as f64 * dphi, w * dphi)))
            .collect()
    }
}

/// Samples of a field on an angular × radial product grid, stored with the
/// radial index fastest: `values[a * r.len() + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSamples {
    pub grid: AngularGrid,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl AngularSamples {
    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(grid: AngularGrid, r: Vec<f64>, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len() * r.len());
        for (x, phi, _) in grid.points() {
            for &ri in &r {
                values.push(f(x, phi, ri));
            }
        }
        Self { grid, r, values }
    }

    /// `Σ_a w_a Ω(a, r_i)²` for each radial node.
    pub fn angular_norm_sq(&self) -> Vec<f64> {
        let nr = self.r.len();
        let mut out = vec![0.0; nr];
        for ((_, _, w), row) in self.grid.points().into_iter().zip(self.values.chunks(nr)) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v * v;
            }
        }
        out
    }
}

/// Radial parts `Ω_ℓm(r_i)` of every mode, in flat mode order.
pub fn project(samples: &AngularSamples, l_max: usize) -> Result<Vec<Vec<f64>>> {
    samples.grid.check_degree(l_max)?;
    let nr = samples.r.len();
    if samples.values.len() != samples.grid.len() * nr {
        return Err(Error::DimensionMismatch {
            expected: samples.grid.len() * nr,
            got: samples.values.len(),
        });
    }
    let mut modes = vec![vec![0.0; nr]; mode_count(l_max)];
    for (a, (x, phi, w)) in samples.grid.points().into_iter().enumerate() {
        let y = real_harmonics(l_max, x, phi);
        let row = &samples.values[a * nr..(a + 1) * nr];
        for (mode, &ylm) in modes.iter_mut().zip(&y) {
            for (acc, &v) in mode.iter_mut().zip(row) {
                *acc += w * ylm * v;
            }
        }
    }
    Ok(modes)
}

/// `Ω(a, r_i) = Σ_ℓm Ω_ℓm(r_i) Y_ℓm(a)`.
pub fn synthesize(modes: &[Vec<f64>], l_max: usize, r: &[f64], grid: &AngularGrid) -> Result<AngularSamples> {
    if modes.len() != mode_count(l_max) {
        return Err(Error::DimensionMismatch {
            expected: mode_count(l_max),
            got: modes.len(),
        });
    }
    let nr = r.len();
    let mut values = vec![0.0; grid.len() * nr];
    for (a, (x, phi, _)) in grid.points().into_iter().enumerate() {
        let y = real_harmonics(l_max, x, phi);
        let row = &mut values[a * nr..(a + 1) * nr];
        for (mode, &ylm) in modes.iter().zip(&y) {
            if mode.len() != nr {
                return Err(Error::DimensionMismatch {
                    expected: nr,
                    got: mode.len(),
                });
            }
            for (acc, &v) in row.iter_mut().zip(mode) {
                *acc += ylm * v;
            }
        }
    }
    Ok(AngularSamples {
        grid: grid.clone(),
        r: r.to_vec(),
        values,
    })
}
