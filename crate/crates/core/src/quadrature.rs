//! Quadrature primitives: Gauss-Legendre rules, a globally adaptive
//! Gauss-Kronrod (7/15) integrator with user-supplied panel breaks, and the
//! closed-form tail integrals used to certify truncation of semi-infinite
//! integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and truncation policy shared by every adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Semi-infinite integrals are cut at this wavenumber.
    pub tail_cutoff: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            tail_cutoff: 60.0,
            max_panels: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, tail_cutoff: f64, max_panels: usize) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            rel_tol,
            tail_cutoff,
            max_panels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks positivity of every field and that the tail of an integrand
    /// dominated by `(2 k^2 e^{-k})^2` past the cutoff stays below `abs_tol`.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        positive("tail_cutoff", self.tail_cutoff)?;
        if self.max_panels < 1 {
            return Err(Error::InvalidSpec("max_panels must be at least 1".into()));
        }
        let bound = reference_tail_bound(self.tail_cutoff);
        if bound > self.abs_tol {
            return Err(Error::TailBound {
                bound,
                tolerance: self.abs_tol,
                cutoff: self.tail_cutoff,
            });
        }
        Ok(())
    }

    /// Acceptance threshold for an integral of magnitude `value`.
    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// `∫_K^∞ (2k² e^{-k})² dk / (1 - e^{-2})²`, the reference tail. The extra
/// factor accounts for `φ(k) ≤ 2k² e^{-k} / (1 - e^{-2})` on `k ≥ 1`.
pub fn reference_tail_bound(cutoff: f64) -> f64 {
    let c = 1.0 / (1.0 - (-2.0f64).exp());
    4.0 * c * c * poly_exp2_tail(&[0.0, 0.0, 0.0, 0.0, 1.0], cutoff)
}

/// Closed form of `∫_{x0}^∞ P(x) e^{-2x} dx` for `P(x) = Σ coeffs[n] x^n`.
pub fn poly_exp2_tail(coeffs: &[f64], x0: f64) -> f64 {
    // ∫_{x0}^∞ x^n e^{-2x} dx = e^{-2 x0} Σ_{j=0}^{n} n!/j! x0^j / 2^{n-j+1}
    let mut total = 0.0;
    for (n, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        let mut ratio = 1.0; // n!/j!, walked down from j = n
        for j in (0..=n).rev() {
            sum += ratio * x0.powi(j as i32) / 2f64.powi((n - j + 1) as i32);
            ratio *= j as f64;
        }
        total += c * sum;
    }
    total * (-2.0 * x0).exp()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term recurrence; nodes ascending.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the Bonnet recurrence.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    (value, error)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration over `[breaks[0], breaks[last]]`
/// with the given interior panel breaks. Bisects the panel with the largest
/// error estimate until the summed estimate meets `cfg.tolerance_for(value)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
    if breaks.len() < 2 {
        return Err(Error::InvalidSpec("integration needs at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::with_capacity(cfg.max_panels + 2);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b >= a) {
            return Err(Error::InvalidSpec(format!("breakpoints not ascending: {a} > {b}")));
        }
        if b == a {
            continue;
        }
        let (value, error) = kronrod15(&f, a, b);
        heap.push(Panel { a, b, value, error });
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "integrand",
                index: heap.len(),
            });
        }
        if error <= cfg.tolerance_for(value) {
            return Ok(Integral {
                value,
                error,
                panels: heap.len(),
            });
        }
        let worst = match heap.peek() {
            Some(p) => *p,
            None => {
                return Ok(Integral {
                    value: 0.0,
                    error: 0.0,
                    panels: 0,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if heap.len() >= cfg.max_panels || mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureNonConvergence {
                value,
                error,
                panels: heap.len(),
            });
        }
        heap.pop();
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = kronrod15(&f, a, b);
            heap.push(Panel { a, b, value, error });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let rule = GaussLegendre::new(n);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn nodes_are_ascending_and_interior() {
        let rule = GaussLegendre::new(9);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| 1.0 / (1e-4 + x * x), &[-1.0, 0.0, 1.0], &cfg).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert_relative_eq!(r.value, exact, max_relative = 1e-10);
    }

    #[test]
    fn panel_cap_reports_nonconvergence() {
        let cfg = QuadratureConfig {
            max_panels: 2,
            ..QuadratureConfig::default()
        };
        let err = integrate(|x: f64| x.abs().sqrt().recip(), &[1e-12, 1.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn poly_tail_matches_quadrature() {
        let cfg = QuadratureConfig::default();
        let coeffs = [1.0, -2.0, 0.5, 3.0, 1.0];
        let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let direct = integrate(|x| p(x) * (-2.0 * x).exp(), &[2.0, 10.0, 40.0], &cfg).unwrap();
        assert_relative_eq!(poly_exp2_tail(&coeffs, 2.0), direct.value, max_relative = 1e-9);
    }

    #[test]
    fn config_rejects_short_cutoff() {
        assert!(matches!(
            QuadratureConfig::new(1e-10, 1e-10, 5.0, 100),
            Err(Error::TailBound { .. })
        ));
        assert!(QuadratureConfig::new(1e-10, 1e-10, 30.0, 100).is_ok());
        assert!(QuadratureConfig::new(0.0, 1e-10, 60.0, 100).is_err());
        assert!(QuadratureConfig::new(1e-10, 1e-10, 60.0, 0).is_err());
    }
}
