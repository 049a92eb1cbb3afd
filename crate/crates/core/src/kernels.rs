//! Scalar special functions of the linearized phonon operator: the
//! equilibrium profile `φ(k) = k²/sinh k`, the collision frequency `Γ`,
//! the scattering kernel `K`, their integral norms, and the scaled
//! Hôpital-type estimate used in the decay argument.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, poly_exp2_tail, GaussLegendre, QuadratureConfig};

/// `√30 / π²`, the reciprocal of `‖φ‖₂`.
pub const PHI0_SCALE: f64 = 0.554_958_978_340_318_5;

const SERIES_CUTOFF: f64 = 1e-4;
const SCALED_CUTOFF: f64 = 30.0;

/// `1 / (1 - e^{-2})`: the constant in `φ(k) ≤ 2c k² e^{-k}` for `k ≥ 1`.
fn tail_constant() -> f64 {
    1.0 / (1.0 - (-2.0f64).exp())
}

fn check_wavenumber(op: &'static str, k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("wavenumber must be finite and non-negative, got {k}"),
        ))
    }
}

/// `k² / sinh k` without argument checks. Callers guarantee `k ≥ 0`.
#[inline]
pub fn phi_unchecked(k: f64) -> f64 {
    if k < SERIES_CUTOFF {
        let k2 = k * k;
        k * (1.0 - k2 / 6.0 + 7.0 * k2 * k2 / 360.0)
    } else if k > SCALED_CUTOFF {
        let e = (-k).exp();
        2.0 * k * k * e / (1.0 - e * e)
    } else {
        k * k / k.sinh()
    }
}

pub fn phi(k: f64) -> Result<f64> {
    check_wavenumber("phi", k)?;
    Ok(phi_unchecked(k))
}

pub fn phi0(k: f64) -> Result<f64> {
    check_wavenumber("phi0", k)?;
    Ok(PHI0_SCALE * phi_unchecked(k))
}

/// `x² / (1 - e^{-2x})`, with the limit 0 at the origin.
#[inline]
fn q(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x / -(-2.0 * x).exp_m1()
    }
}

/// Collision frequency `Γ(k) = 2 sinh k ∫ φ(k+k')φ(k') dk' + sinh k ∫_0^k φ(k-k')φ(k') dk'`.
///
/// Both integrands are rewritten so `sinh k` never appears unscaled:
/// `sinh k · φ(a) φ(b) = 2(1 - e^{-2k}) q(a) q(b)` when `a + b = k`, and
/// `= 4 e^{-2b}(1 - e^{-2k}) q(k+b) q(b)` when `a = k + b`.
pub fn gamma(k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_wavenumber("gamma", k)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    let s = -(-2.0 * k).exp_m1();
    let inner = integrate(|x| q(k - x) * q(x), &[0.0, 0.5 * k, k], cfg)?;
    let kt = cfg.tail_cutoff;
    let mut breaks = vec![0.0];
    breaks.extend([1.0, 4.0, 16.0].into_iter().filter(|&b| b < kt));
    breaks.push(kt);
    let outer = integrate(|x| (-2.0 * x).exp() * q(k + x) * q(x), &breaks, cfg)?;
    let damp = 1.0 / -(-2.0 * kt).exp_m1();
    let tail = 4.0 * s * damp * damp * poly_exp2_tail(&[0.0, 0.0, k * k, 2.0 * k, 1.0], kt);
    let value = 2.0 * s * inner.value + 4.0 * s * outer.value;
    check_tail(tail, value, cfg)?;
    Ok(value)
}

fn check_tail(bound: f64, value: f64, cfg: &QuadratureConfig) -> Result<()> {
    let tolerance = cfg.tolerance_for(value);
    if bound > tolerance {
        return Err(Error::TailBound {
            bound,
            tolerance,
            cutoff: cfg.tail_cutoff,
        });
    }
    Ok(())
}

/// Scattering kernel without argument checks. The product `k·k2` is formed
/// last so swapping the arguments gives a bitwise-identical result.
#[inline]
pub fn kernel_k_unchecked(k: f64, k2: f64) -> f64 {
    (phi_unchecked((k - k2).abs()) - phi_unchecked(k + k2)) * (k * k2)
}

pub fn kernel_k(k: f64, k2: f64) -> Result<f64> {
    check_wavenumber("kernel_k", k)?;
    check_wavenumber("kernel_k", k2)?;
    Ok(kernel_k_unchecked(k, k2))
}

/// `K(k, k') / √(Γ(k) Γ(k'))`.
pub fn weighted_kernel(k: f64, k2: f64, cfg: &QuadratureConfig) -> Result<f64> {
    for x in [k, k2] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(
                "weighted_kernel",
                format!("arguments must be positive, got {x}"),
            ));
        }
    }
    let g = gamma(k, cfg)? * gamma(k2, cfg)?;
    Ok(kernel_k_unchecked(k, k2) / g.sqrt())
}

/// `∫_0^∞ K(k, k')² dk'`, cut at `k + tail_cutoff` with a certified tail.
pub fn row_norm_sq(k: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(
            "row_norm_sq",
            format!("wavenumber must be positive, got {k}"),
        ));
    }
    let kt = cfg.tail_cutoff;
    let mut breaks = vec![0.0, k];
    breaks.extend([k + 1.0, k + 4.0, k + 16.0].into_iter().filter(|&b| b < k + kt));
    breaks.push(k + kt);
    let r = integrate(
        |x| {
            let v = kernel_k_unchecked(k, x);
            v * v
        },
        &breaks,
        cfg,
    )?;
    // Past k + Kt: |K| ≤ φ(a) k (a + k) with a = k' - k, and φ(a) ≤ 2c a² e^{-a}.
    let c = tail_constant();
    let coeffs = [0.0, 0.0, 0.0, 0.0, k.powi(4), 2.0 * k.powi(3), k * k];
    let tail = 4.0 * c * c * poly_exp2_tail(&coeffs, kt);
    check_tail(tail, r.value, cfg)?;
    Ok(r.value)
}

/// Right-hand side `(4/15)π⁴k⁴ + (4/21)π⁶k²` of the row-norm bound.
pub fn row_norm_bound(k: f64) -> f64 {
    4.0 / 15.0 * PI.powi(4) * k.powi(4) + 4.0 / 21.0 * PI.powi(6) * k * k
}

/// `2π³k/√21`, the small-wavenumber bound on `‖K(k, ·)‖₂`.
pub fn small_k_row_bound(k: f64) -> f64 {
    2.0 * PI.powi(3) * k / 21f64.sqrt()
}

/// `∫_0^∞ kⁿ / sinh² k dk` for `n ≥ 2`.
pub fn sinh_moment(n: u32, cfg: &QuadratureConfig) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(
            "sinh_moment",
            format!("moment order must be at least 2, got {n}"),
        ));
    }
    let kt = cfg.tail_cutoff;
    let f = |x: f64| {
        let e = (-2.0 * x).exp();
        let d = -(-2.0 * x).exp_m1();
        if x == 0.0 {
            0.0
        } else {
            4.0 * x.powi(n as i32) * e / (d * d)
        }
    };
    let r = integrate(f, &[0.0, 1.0, 5.0, 20.0_f64.min(kt), kt], cfg)?;
    let damp = 1.0 / -(-2.0 * kt).exp_m1();
    let mut coeffs = vec![0.0; n as usize + 1];
    coeffs[n as usize] = 4.0 * damp * damp;
    check_tail(poly_exp2_tail(&coeffs, kt), r.value, cfg)?;
    Ok(r.value)
}

/// Hilbert-Schmidt norm of the weighted kernel with its truncation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsNorm {
    /// Norm over `(lo, K_tail)²`.
    pub value: f64,
    /// Norm over `(lo, K_tail/2)²`.
    pub half_cutoff_value: f64,
    /// `|value - half_cutoff_value|`.
    pub truncation_estimate: f64,
}

/// `C₀ = ‖K(k,k')/√(Γ(k)Γ(k'))‖_{L²((0, K_tail)²)}`.
pub fn hs_norm_c0(cfg: &QuadratureConfig) -> Result<HsNorm> {
    hs_norm_region(0.0, cfg)
}

/// The Hilbert-Schmidt norm restricted to `(lo, K_tail)²`.
///
/// By symmetry the square is twice the triangle `k' < k`; the inner variable
/// is `k' = lo + (k - lo)s` on a fixed rule graded toward the diagonal and
/// the outer integral is adaptive. Splitting the outer range at `K_tail/2`
/// yields the half-cutoff norm at no extra cost.
pub fn hs_norm_region(lo: f64, cfg: &QuadratureConfig) -> Result<HsNorm> {
    let kt = cfg.tail_cutoff;
    if !(lo >= 0.0 && lo < 0.5 * kt) {
        return Err(Error::domain(
            "hs_norm_region",
            format!("lower edge {lo} outside [0, K_tail/2)"),
        ));
    }
    let rule = GaussLegendre::new(8);
    let mut edges = vec![0.0];
    edges.extend((1..=12).map(|j| 1.0 - 0.5f64.powi(j)));
    edges.push(1.0);
    let inner_nodes: Vec<(f64, f64)> = edges
        .windows(2)
        .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
        .collect();

    let first_error = std::sync::Mutex::new(None);
    let record = |e: Error| {
        let mut slot = first_error.lock().unwrap_or_else(|p| p.into_inner());
        slot.get_or_insert(e);
    };
    let integrand = |k: f64| -> f64 {
        if k <= lo {
            return 0.0;
        }
        let gk = match gamma(k, cfg) {
            Ok(g) => g,
            Err(e) => {
                record(e);
                return 0.0;
            }
        };
        let span = k - lo;
        let mut acc = 0.0;
        for &(s, w) in &inner_nodes {
            let k2 = lo + span * s;
            let g2 = match gamma(k2, cfg) {
                Ok(g) => g,
                Err(e) => {
                    record(e);
                    return 0.0;
                }
            };
            let kk = kernel_k_unchecked(k, k2);
            acc += w * kk * kk / (gk * g2);
        }
        2.0 * span * acc
    };

    let outer_cfg = QuadratureConfig {
        rel_tol: cfg.rel_tol.max(1e-8),
        ..*cfg
    };
    let half = 0.5 * kt;
    let mut near = vec![lo];
    near.extend([0.01, 0.1, 1.0, 10.0].iter().map(|d| lo + d).filter(|&b| b < half));
    near.push(half);
    let inner_part = integrate(integrand, &near, &outer_cfg)?;
    let far_breaks = [half, 0.5 * (half + kt), kt];
    let far_part = integrate(integrand, &far_breaks, &outer_cfg)?;
    if let Some(e) = first_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let value = (inner_part.value + far_part.value).sqrt();
    let half_cutoff_value = inner_part.value.sqrt();
    Ok(HsNorm {
        value,
        half_cutoff_value,
        truncation_estimate: (value - half_cutoff_value).abs(),
    })
}

/// Arguments `(t, θ, ρ)` of `Z(t, θ, ρ) = ∫_0^t (s+1)^{-θ} e^{ρs} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopitalArgs {
    pub t: f64,
    pub theta: f64,
    pub rho: f64,
}

impl HopitalArgs {
    pub fn new(t: f64, theta: f64, rho: f64) -> Result<Self> {
        let ok = t >= 0.0 && t.is_finite() && theta >= 0.0 && theta.is_finite() && rho > 0.0 && rho.is_finite();
        if !ok {
            return Err(Error::domain(
                "HopitalArgs",
                format!("need t >= 0, theta >= 0, rho > 0; got t={t}, theta={theta}, rho={rho}"),
            ));
        }
        Ok(Self { t, theta, rho })
    }
}

/// `mantissa · e^{exponent}`, for quantities whose exponential factor
/// overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub mantissa: f64,
    pub exponent: f64,
}

impl Scaled {
    /// The represented value; may overflow to infinity.
    pub fn value(&self) -> f64 {
        self.mantissa * self.exponent.exp()
    }
}

const MAX_SCALED_EXPONENT: f64 = 1e6;

fn hopital_exponent(args: &HopitalArgs) -> Result<f64> {
    let exponent = args.rho * args.t;
    if exponent > MAX_SCALED_EXPONENT {
        return Err(Error::Overflow { exponent });
    }
    Ok(exponent)
}

/// `Z(t, θ, ρ)` with the factor `e^{ρt}` carried in the exponent.
pub fn hopital_z(args: &HopitalArgs, cfg: &QuadratureConfig) -> Result<Scaled> {
    let exponent = hopital_exponent(args)?;
    let HopitalArgs { t, theta, rho } = *args;
    if t == 0.0 {
        return Ok(Scaled {
            mantissa: 0.0,
            exponent,
        });
    }
    // e^{-ρt} Z = ∫_0^t (s+1)^{-θ} e^{ρ(s-t)} ds; the mass sits within ~1/ρ of t.
    let mut breaks = vec![0.0];
    for w in [40.0, 5.0, 1.0] {
        let b = t - w / rho;
        if b > *breaks.last().unwrap_or(&0.0) {
            breaks.push(b);
        }
    }
    breaks.push(t);
    let r = integrate(|s| (s + 1.0).powf(-theta) * (rho * (s - t)).exp(), &breaks, cfg)?;
    Ok(Scaled {
        mantissa: r.value,
        exponent,
    })
}

/// `[2^θ (t+1)^{-θ} + 3 e^{-ρt/3}] e^{ρt} / ρ` in the same scaled form.
pub fn hopital_bound(args: &HopitalArgs) -> Result<Scaled> {
    let exponent = hopital_exponent(args)?;
    let HopitalArgs { t, theta, rho } = *args;
    let mantissa = (2f64.powf(theta) * (t + 1.0).powf(-theta) + 3.0 * (-rho * t / 3.0).exp()) / rho;
    Ok(Scaled { mantissa, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn phi0_scale_is_inverse_norm() {
        assert_relative_eq!(PHI0_SCALE, 30f64.sqrt() / (PI * PI), max_relative = 1e-15);
    }

    #[test]
    fn phi_reference_values() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert_relative_eq!(phi(1.0).unwrap(), 0.850_918_128_239_321_5, max_relative = 1e-15);
        assert_relative_eq!(phi0(1.0).unwrap(), 0.472_224_655_098_949_97, max_relative = 1e-15);
        assert_eq!(phi0(0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_branches_are_continuous() {
        for &k in &[SERIES_CUTOFF, SCALED_CUTOFF] {
            let below = phi_unchecked(k * (1.0 - 1e-12));
            let above = phi_unchecked(k * (1.0 + 1e-12));
            assert_relative_eq!(below, above, max_relative = 1e-10);
            assert_relative_eq!(phi_unchecked(k), k * k / k.sinh(), max_relative = 1e-14);
        }
    }

    #[test]
    fn phi_no_overflow_at_large_k() {
        let v = phi(700.0).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        assert!(phi(710.0).unwrap().is_finite());
    }

    #[test]
    fn phi_rejects_bad_input() {
        assert!(phi(-1.0).is_err());
        assert!(phi(f64::NAN).is_err());
        assert!(phi(f64::INFINITY).is_err());
        assert!(phi0(-1e-300).is_err());
    }

    #[test]
    fn phi_tail_bound_holds() {
        let c = tail_constant();
        for i in 0..200 {
            let k = 1.0 + i as f64 * 0.5;
            assert!(phi_unchecked(k) <= 2.0 * c * k * k * (-k).exp() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn kernel_reference_values() {
        assert_relative_eq!(
            kernel_k(1.0, 1.0).unwrap(),
            -1.102_882_259_087_132_8,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            kernel_k(1.0, 2.0).unwrap(),
            -0.094_951_997_560_166_1,
            max_relative = 1e-13
        );
        assert_eq!(kernel_k(3.0, 0.0).unwrap(), 0.0);
        assert!(kernel_k(-1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_reference_values() {
        assert_eq!(gamma(0.0, &cfg()).unwrap(), 0.0);
        assert_relative_eq!(gamma(1.0, &cfg()).unwrap(), 6.782_321_497_025_447, max_relative = 1e-10);
        assert_relative_eq!(
            gamma(2.0, &cfg()).unwrap(),
            17.494_495_616_873_053,
            max_relative = 1e-10
        );
        assert!(gamma(-0.5, &cfg()).is_err());
    }

    #[test]
    fn gamma_asymptotics() {
        let small = gamma(1e-3, &cfg()).unwrap() / 1e-3;
        assert!((small / (PI.powi(4) / 15.0) - 1.0).abs() < 0.01);
        let large = gamma(50.0, &cfg()).unwrap() / 50f64.powi(5);
        assert!((large * 15.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn weighted_kernel_reference_and_limit() {
        assert_relative_eq!(
            weighted_kernel(1.0, 2.0, &cfg()).unwrap(),
            -0.008_716_943_007_342_519,
            max_relative = 1e-9
        );
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| weighted_kernel(e, e, &cfg()).unwrap().abs())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(weighted_kernel(0.0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn row_norm_reference_and_bounds() {
        assert_relative_eq!(
            row_norm_sq(1.0, &cfg()).unwrap(),
            16.026_035_523_812_88,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            row_norm_sq(2.0, &cfg()).unwrap(),
            204.730_609_825_779,
            max_relative = 1e-9
        );
        for &k in &[0.1, 1.0, 10.0] {
            assert!(row_norm_sq(k, &cfg()).unwrap() < row_norm_bound(k));
        }
        for &k in &[1e-1, 1e-2, 1e-3] {
            assert!(row_norm_sq(k, &cfg()).unwrap().sqrt() <= small_k_row_bound(k));
        }
        assert_relative_eq!(row_norm_bound(1.0), 209.097_400, max_relative = 1e-6);
    }

    #[test]
    fn moments_match_closed_forms() {
        assert!((sinh_moment(4, &cfg()).unwrap() - PI.powi(4) / 30.0).abs() < 1e-8);
        assert!((sinh_moment(6, &cfg()).unwrap() - PI.powi(6) / 42.0).abs() < 1e-8);
        assert!(sinh_moment(1, &cfg()).is_err());
    }

    #[test]
    fn hopital_theta_zero_closed_form() {
        for &(t, rho) in &[(1.0, 0.5), (10.0, 1.0), (100.0, 0.1)] {
            let args = HopitalArgs::new(t, 0.0, rho).unwrap();
            let z = hopital_z(&args, &cfg()).unwrap();
            // (e^{ρt} - 1)/ρ = e^{ρt} (1 - e^{-ρt})/ρ
            let exact = -(-rho * t).exp_m1() / rho;
            assert_relative_eq!(z.mantissa, exact, max_relative = 1e-10);
            assert_eq!(z.exponent, rho * t);
        }
    }

    #[test]
    fn hopital_reference_point() {
        let args = HopitalArgs::new(2.0, 1.0, 1.0).unwrap();
        let z = hopital_z(&args, &cfg()).unwrap();
        assert_relative_eq!(z.value(), 2.957_277_891_537_284_5, max_relative = 1e-10);
        let b = hopital_bound(&args).unwrap();
        assert_relative_eq!(b.value(), 16.307_041_083_336_63, max_relative = 1e-12);
    }

    #[test]
    fn hopital_overflow_and_validation() {
        let args = HopitalArgs::new(2e6, 0.0, 1.0).unwrap();
        assert!(matches!(hopital_z(&args, &cfg()), Err(Error::Overflow { .. })));
        assert!(matches!(hopital_bound(&args), Err(Error::Overflow { .. })));
        assert!(HopitalArgs::new(-1.0, 0.0, 1.0).is_err());
        assert!(HopitalArgs::new(1.0, -0.1, 1.0).is_err());
        assert!(HopitalArgs::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn hopital_large_exponent_is_finite() {
        let args = HopitalArgs::new(1e5, 2.0, 1.0).unwrap();
        let z = hopital_z(&args, &cfg()).unwrap();
        let b = hopital_bound(&args).unwrap();
        assert!(z.mantissa.is_finite() && z.mantissa <= b.mantissa);
    }

    proptest! {
        #[test]
        fn kernel_is_bitwise_symmetric(a in 0.0f64..80.0, b in 0.0f64..80.0) {
            prop_assert_eq!(kernel_k(a, b).unwrap().to_bits(), kernel_k(b, a).unwrap().to_bits());
        }

        #[test]
        fn phi_is_positive_and_bounded(k in 1e-12f64..700.0) {
            let v = phi(k).unwrap();
            prop_assert!(v > 0.0);
            // max of k²/sinh k is about 1.0907
            prop_assert!(v < 1.1);
        }
    }
}
