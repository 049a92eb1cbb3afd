//! Time-stepping schemes for `f' = E_h f`, registered by name.

use log::warn;
use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::operator::{apply, DiscreteOperator};

/// A one-step map prepared for a fixed operator and step size.
pub trait Stepper: Send + Sync {
    fn advance(&self, f: &[f64]) -> Result<Vec<f64>>;
}

/// A time-integration method. Implementations prepare a [`Stepper`] once per
/// `(operator, dt)` pair, caching whatever factorization they need.
pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the `c₀` restoring projection is applied after each step
    /// unless the caller overrides it.
    fn default_conservation_fix(&self) -> bool;

    fn prepare<'a>(&self, op: &'a DiscreteOperator, dt: f64) -> Result<Box<dyn Stepper + 'a>>;
}

pub struct CrankNicolson;

struct CrankNicolsonStepper<'a> {
    op: &'a DiscreteOperator,
    half_dt: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Scheme for CrankNicolson {
    fn name(&self) -> &'static str {
        "crank-nicolson"
    }

    fn default_conservation_fix(&self) -> bool {
        false
    }

    fn prepare<'a>(&self, op: &'a DiscreteOperator, dt: f64) -> Result<Box<dyn Stepper + 'a>> {
        let n = op.len();
        let half_dt = 0.5 * dt;
        let a = DMatrix::identity(n, n) - op.matrix() * half_dt;
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSolve);
        }
        Ok(Box::new(CrankNicolsonStepper { op, half_dt, lu }))
    }
}

impl Stepper for CrankNicolsonStepper<'_> {
    fn advance(&self, f: &[f64]) -> Result<Vec<f64>> {
        let ef = apply(self.op, f)?;
        let rhs = DVector::from_iterator(f.len(), f.iter().zip(&ef).map(|(v, e)| v + self.half_dt * e));
        let sol = self.lu.solve(&rhs).ok_or(Error::SingularSolve)?;
        Ok(sol.as_slice().to_vec())
    }
}

/// `φ₁(z) = (e^z - 1)/z`.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `φ₂(z) = (e^z - 1 - z)/z²`, by its Taylor series near 0.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ_{n≥0} zⁿ/(n+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for n in 1..12 {
            term *= z / (n as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Per-node exponential coefficients `e^{-Γdt}`, `dt φ₁(-Γdt)`, `dt φ₂(-Γdt)`.
struct EtdCoefficients {
    decay: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

fn etd_coefficients(op: &DiscreteOperator, dt: f64) -> Result<EtdCoefficients> {
    if let Some(index) = op.gamma_vec.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::DegenerateGamma {
            index,
            value: op.gamma_vec[index],
        });
    }
    let z: Vec<f64> = op.gamma_vec.iter().map(|g| -g * dt).collect();
    Ok(EtdCoefficients {
        decay: z.iter().map(|z| z.exp()).collect(),
        c1: z.iter().map(|&z| dt * phi1(z)).collect(),
        c2: z.iter().map(|&z| dt * phi2(z)).collect(),
    })
}

fn stability_check(op: &DiscreteOperator, dt: f64, name: &str) {
    let r = dt * op.gain_inf_norm();
    if r > 1.0 {
        warn!("{name}: dt * |T2| = {r:.3e} exceeds 1; the explicit gain term may be unstable");
    }
}

/// First-order exponential Euler on the splitting `E = -Γ + T₂`.
pub struct EtdEuler;

struct EtdEulerStepper<'a> {
    op: &'a DiscreteOperator,
    c: EtdCoefficients,
}

impl Scheme for EtdEuler {
    fn name(&self) -> &'static str {
        "etd-euler"
    }

    fn default_conservation_fix(&self) -> bool {
        true
    }

    fn prepare<'a>(&self, op: &'a DiscreteOperator, dt: f64) -> Result<Box<dyn Stepper + 'a>> {
        stability_check(op, dt, self.name());
        Ok(Box::new(EtdEulerStepper {
            op,
            c: etd_coefficients(op, dt)?,
        }))
    }
}

impl Stepper for EtdEulerStepper<'_> {
    fn advance(&self, f: &[f64]) -> Result<Vec<f64>> {
        let t2 = self.op.gain(f)?;
        Ok((0..f.len())
            .map(|i| self.c.decay[i] * f[i] + self.c.c1[i] * t2[i])
            .collect())
    }
}

/// Second-order two-stage exponential Runge-Kutta (Cox-Matthews ETD2RK).
pub struct EtdRk2;

struct EtdRk2Stepper<'a> {
    op: &'a DiscreteOperator,
    c: EtdCoefficients,
}

impl Scheme for EtdRk2 {
    fn name(&self) -> &'static str {
        "etd-rk2"
    }

    fn default_conservation_fix(&self) -> bool {
        true
    }

    fn prepare<'a>(&self, op: &'a DiscreteOperator, dt: f64) -> Result<Box<dyn Stepper + 'a>> {
        stability_check(op, dt, self.name());
        Ok(Box::new(EtdRk2Stepper {
            op,
            c: etd_coefficients(op, dt)?,
        }))
    }
}

impl Stepper for EtdRk2Stepper<'_> {
    fn advance(&self, f: &[f64]) -> Result<Vec<f64>> {
        let t2 = self.op.gain(f)?;
        let a: Vec<f64> = (0..f.len())
            .map(|i| self.c.decay[i] * f[i] + self.c.c1[i] * t2[i])
            .collect();
        let t2a = self.op.gain(&a)?;
        Ok((0..f.len()).map(|i| a[i] + self.c.c2[i] * (t2a[i] - t2[i])).collect())
    }
}

/// Name-keyed collection of schemes.
pub struct SchemeRegistry {
    schemes: Vec<Box<dyn Scheme>>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Self { schemes: Vec::new() };
        r.register(Box::new(CrankNicolson));
        r.register(Box::new(EtdEuler));
        r.register(Box::new(EtdRk2));
        r
    }
}

impl SchemeRegistry {
    /// Adds a scheme, replacing any previous entry of the same name.
    pub fn register(&mut self, scheme: Box<dyn Scheme>) {
        self.schemes.retain(|s| s.name() != scheme.name());
        self.schemes.push(scheme);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.schemes.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scheme> {
        self.schemes
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "scheme",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}
