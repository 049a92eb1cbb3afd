//! The end-to-end verification suite: one check per acceptance criterion,
//! sharing expensive operators and trajectories through a lazily filled
//! [`Context`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::evolution::{
    decay_fit, evolve, experiment_no_uniform_decay, power_law_fit, remove_equilibrium, Diagnostics, SolverConfig,
};
use crate::grid::{build_grid, GridSpec};
use crate::kernels::{
    gamma, hopital_bound, hopital_z, hs_norm_c0, row_norm_bound, row_norm_sq, sinh_moment, small_k_row_bound,
    HopitalArgs,
};
use crate::operator::{
    assemble, dirichlet_form, nullspace_report, spectral_gap, symmetrize, DiscreteOperator, GammaMode, NullspaceReport,
    SpectralGap,
};
use crate::quadrature::QuadratureConfig;
use crate::spherical::{
    self, calibrate_lambda, decompose, evolve_3d, from_radial, reconstruct, AngularGrid, PhysicalParams,
    RadialOperator3d, RadialR, SphericalField,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    /// `PASS 3 moment identities: ...`
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {:>2} {}: {}", self.id, self.title, self.detail)
    }
}

type Check = fn(&Context) -> Result<(bool, String)>;

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    check: Check,
}

impl Criterion {
    pub fn run(&self, ctx: &Context) -> Outcome {
        let (passed, detail) = match (self.check)(ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome {
            id: self.id,
            title: self.title,
            passed,
            detail,
        }
    }
}

type Lazy<T> = OnceLock<Result<T>>;

fn get<T>(cell: &Lazy<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(init).as_ref().map_err(Clone::clone)
}

/// Operators and runs shared between criteria, built on first use.
pub struct Context {
    pub seed: u64,
    pub quad: QuadratureConfig,
    op400: Lazy<DiscreteOperator>,
    op200: Lazy<DiscreteOperator>,
    decay_op: Lazy<DiscreteOperator>,
    gap400: Lazy<(SpectralGap, NullspaceReport)>,
    conservation: Lazy<Diagnostics>,
}

impl Context {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            quad: QuadratureConfig::default(),
            op400: OnceLock::new(),
            op200: OnceLock::new(),
            decay_op: OnceLock::new(),
            gap400: OnceLock::new(),
            conservation: OnceLock::new(),
        }
    }

    fn op_on(&self, spec: &GridSpec, mode: GammaMode) -> Result<DiscreteOperator> {
        assemble(&build_grid(spec)?, &self.quad, mode)
    }

    /// Default grid, `N = 400`.
    pub fn op400(&self) -> Result<&DiscreteOperator> {
        get(&self.op400, || {
            self.op_on(&GridSpec::default(), GammaMode::KernelConsistent)
        })
    }

    pub fn op200(&self) -> Result<&DiscreteOperator> {
        get(&self.op200, || {
            self.op_on(&GridSpec::default().with_n(200), GammaMode::KernelConsistent)
        })
    }

    /// The grid refined toward the origin used for decay studies.
    pub fn decay_op(&self) -> Result<&DiscreteOperator> {
        get(&self.decay_op, || {
            self.op_on(&GridSpec::decay_default(), GammaMode::KernelConsistent)
        })
    }

    pub fn gap400(&self) -> Result<&(SpectralGap, NullspaceReport)> {
        get(&self.gap400, || {
            let op = self.op400()?;
            let sym = symmetrize(op)?;
            Ok((spectral_gap(&sym)?, nullspace_report(op, &sym)?))
        })
    }

    /// Crank-Nicolson from `exp-decay` on the default grid, `dt = 10⁻²`, `t ≤ 200`.
    pub fn conservation_run(&self) -> Result<&Diagnostics> {
        get(&self.conservation, || {
            let op = self.op400()?;
            let f0 = op.grid.sample(|k| (-k).exp());
            Ok(evolve(&f0, op, &SolverConfig::default())?.1)
        })
    }
}

pub fn criteria() -> Vec<Criterion> {
    macro_rules! c {
        ($id:expr, $title:expr, $f:ident) => {
            Criterion {
                id: $id,
                title: $title,
                check: $f,
            }
        };
    }
    vec![
        c!(1, "collision frequency small-k constant", gamma_small_k),
        c!(2, "collision frequency large-k constant", gamma_large_k),
        c!(3, "moment identities", moments),
        c!(4, "kernel row bounds", kernel_bounds),
        c!(5, "Hilbert-Schmidt norm under cutoff doubling", hilbert_schmidt),
        c!(6, "nullspace residual", nullspace),
        c!(7, "positivity and Cauchy-Schwarz of the form", positivity),
        c!(8, "spectral gap", gap),
        c!(9, "conservation of energy and c0", conservation),
        c!(10, "a-priori inequality", a_priori),
        c!(11, "algebraic decay rate and positivity", decay_rate),
        c!(12, "no uniform decay", no_uniform_decay),
        c!(13, "three-dimensional suite", three_d),
        c!(14, "loss-rate consistency", appendix),
        c!(15, "Hopital lemma", hopital),
    ]
}

/// Runs the criteria whose ids are in `only` (all when empty), in order.
pub fn run(ctx: &Context, only: &[usize]) -> Vec<Outcome> {
    criteria()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| c.run(ctx))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn gamma_small_k(ctx: &Context) -> Result<(bool, String)> {
    let k = 1e-3;
    let e = rel(gamma(k, &ctx.quad)? / k, PI.powi(4) / 15.0);
    Ok((e < 0.01, format!("relative deviation {e:.3e} (limit 1e-2)")))
}

fn gamma_large_k(ctx: &Context) -> Result<(bool, String)> {
    let k: f64 = 50.0;
    let e = rel(gamma(k, &ctx.quad)? / k.powi(5), 1.0 / 15.0);
    Ok((e < 0.02, format!("relative deviation {e:.3e} (limit 2e-2)")))
}

fn moments(ctx: &Context) -> Result<(bool, String)> {
    let e4 = (sinh_moment(4, &ctx.quad)? - PI.powi(4) / 30.0).abs();
    let e6 = (sinh_moment(6, &ctx.quad)? - PI.powi(6) / 42.0).abs();
    Ok((
        e4 <= 1e-8 && e6 <= 1e-8,
        format!("|error| {e4:.2e} (n = 4), {e6:.2e} (n = 6), limit 1e-8"),
    ))
}

fn kernel_bounds(ctx: &Context) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in [0.1, 1.0, 10.0] {
        worst = worst.max(row_norm_sq(k, &ctx.quad)? / row_norm_bound(k));
    }
    let mut worst_small: f64 = 0.0;
    for k in [1e-3, 1e-2, 0.05, 0.1] {
        worst_small = worst_small.max(row_norm_sq(k, &ctx.quad)?.sqrt() / small_k_row_bound(k));
    }
    Ok((
        worst < 1.0 && worst_small <= 1.0,
        format!("max norm/bound {worst:.4} (k in 0.1, 1, 10), {worst_small:.4} (k <= 0.1)"),
    ))
}

fn hilbert_schmidt(ctx: &Context) -> Result<(bool, String)> {
    let hs = hs_norm_c0(&ctx.quad)?;
    let e = rel(hs.half_cutoff_value, hs.value);
    Ok((
        hs.value.is_finite() && hs.value > 0.0 && e < 0.01,
        format!(
            "C0 = {:.10} (cutoff {}), {:.10} (cutoff {}), change {e:.2e}",
            hs.value,
            ctx.quad.tail_cutoff,
            hs.half_cutoff_value,
            0.5 * ctx.quad.tail_cutoff
        ),
    ))
}

fn nullspace(ctx: &Context) -> Result<(bool, String)> {
    let kc = ctx.op400()?.null_residual();
    let ladder = [200, 400, 800];
    let res = ladder
        .iter()
        .map(|&n| {
            Ok(ctx
                .op_on(&GridSpec::default().with_n(n), GammaMode::Quadrature)?
                .null_residual())
        })
        .collect::<Result<Vec<f64>>>()?;
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = kc <= 1e-13 && res[2] <= 1e-4 && orders.iter().all(|&p| p >= 2.0);
    Ok((
        ok,
        format!(
            "kernel-consistent {kc:.2e}; quadrature N = 200/400/800: {:.2e}, {:.2e}, {:.2e}, orders {:.2}, {:.2}",
            res[0], res[1], res[2], orders[0], orders[1]
        ),
    ))
}

fn positivity(ctx: &Context) -> Result<(bool, String)> {
    let op = ctx.op400()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let phi0 = op.grid.phi0_vec();
    // Every other sample lies close to the null direction, where the form
    // is smallest relative to the norm.
    let samples: Vec<Vec<f64>> = (0..1000)
        .map(|i| {
            let noise: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            if i % 2 == 0 {
                noise
            } else {
                let c = rng.random_range(-1.0..1.0);
                phi0.iter().zip(&noise).map(|(p, n)| c * p + 1e-6 * n).collect()
            }
        })
        .collect();
    let mut worst_pos = f64::INFINITY;
    let mut worst_cs = f64::NEG_INFINITY;
    let forms = samples
        .iter()
        .map(|f| dirichlet_form(op, f, f))
        .collect::<Result<Vec<f64>>>()?;
    for (i, f) in samples.iter().enumerate() {
        let n2 = op.grid.dot(f, f);
        worst_pos = worst_pos.min(forms[i] / n2);
        let j = (i + 1) % samples.len();
        let cross = dirichlet_form(op, f, &samples[j])?.abs();
        worst_cs = worst_cs.max(cross - 0.5 * forms[i] - 0.5 * forms[j]);
    }
    Ok((
        worst_pos >= -1e-10 && worst_cs <= 1e-10,
        format!("min <-Ef,f>/|f|^2 = {worst_pos:.3e}; max Cauchy-Schwarz excess {worst_cs:.3e}"),
    ))
}

fn gap(ctx: &Context) -> Result<(bool, String)> {
    let (g400, ns) = ctx.gap400()?;
    let g200 = spectral_gap(&symmetrize(ctx.op200()?)?)?;
    let spread = rel(g200.c_star, g400.c_star);
    let ok = g200.c_star > 0.0
        && g400.c_star > 0.0
        && spread < 0.05
        && (-1e-8..=1e-6).contains(&ns.min_eigenvalue)
        && ns.cosine >= 0.999;
    Ok((
        ok,
        format!(
            "C* = {:.6} (N = 200), {:.6} (N = 400), spread {spread:.2e}; uncorrected min {:.2e}, cosine {:.6}",
            g200.c_star, g400.c_star, ns.min_eigenvalue, ns.cosine
        ),
    ))
}

fn conservation(ctx: &Context) -> Result<(bool, String)> {
    let rows = &ctx.conservation_run()?.rows;
    let (e0, c0) = (rows[0].energy, rows[0].c0);
    let de = rows.iter().map(|r| rel(r.energy, e0)).fold(0.0, f64::max);
    let dc = rows.iter().map(|r| rel(r.c0, c0)).fold(0.0, f64::max);
    Ok((
        de <= 1e-10 && dc <= 1e-10,
        format!("max relative drift: energy {de:.2e}, c0 {dc:.2e}"),
    ))
}

fn a_priori(ctx: &Context) -> Result<(bool, String)> {
    let c_star = ctx.gap400()?.0.c_star;
    let rows = &ctx.conservation_run()?.rows;
    let l0 = rows[0].l2_norm.powi(2);
    let worst = rows
        .iter()
        .map(|r| (r.l2_norm.powi(2) + 2.0 * c_star * r.dissipation) / (2.0 * l0))
        .fold(0.0, f64::max);
    Ok((
        worst <= 1.0,
        format!("max (|f|^2 + 2 C* dissipation) / (2 |f0|^2) = {worst:.6}"),
    ))
}

/// Non-negative data may dip below zero by round-off in the far tail.
const POSITIVITY_FLOOR: f64 = -1e-13;

fn decay_rate(ctx: &Context) -> Result<(bool, String)> {
    let op = ctx.decay_op()?;
    let f0 = remove_equilibrium(&op.grid.sample(|k| (-k).exp()), &op.grid)?;
    let (_, diag) = evolve(&f0, op, &SolverConfig::default())?;
    let fit = decay_fit(&diag, (10.0, 200.0))?;
    let min_f = ctx
        .conservation_run()?
        .rows
        .iter()
        .map(|r| r.min_f)
        .fold(f64::INFINITY, f64::min);
    let ok = (-0.65..=-0.45).contains(&fit.slope) && min_f >= POSITIVITY_FLOOR;
    Ok((
        ok,
        format!(
            "slope {:.4} (r^2 {:.6}); min f along exp-decay run {min_f:.3e}",
            fit.slope, fit.r2
        ),
    ))
}

fn no_uniform_decay(ctx: &Context) -> Result<(bool, String)> {
    let rows = experiment_no_uniform_decay(ctx.decay_op()?, &SolverConfig::default(), &[0.4, 0.2, 0.1, 0.05])?;
    let increasing = rows.windows(2).all(|w| w[1].t_half > w[0].t_half);
    let list: Vec<String> = rows.iter().map(|r| format!("{}: {:.4}", r.eps, r.t_half)).collect();
    Ok((increasing, format!("t_half {}", list.join(", "))))
}

fn three_d(ctx: &Context) -> Result<(bool, String)> {
    let params = PhysicalParams::default();
    let grid = build_grid(&GridSpec::decay_default().with_n(200))?;
    let op = assemble(&grid, &ctx.quad, GammaMode::KernelConsistent)?;
    let radial = RadialR::from_k_grid(&grid, &params);

    let lambda = calibrate_lambda(params.r_of(1.0), &params, &ctx.quad)?;
    let theta_res = RadialOperator3d::new(&radial, &params, lambda)?.theta_residual()?;

    let mut field = SphericalField::zeros(params, 2, radial.clone());
    for (i, m) in field.modes.iter_mut().enumerate() {
        let f = grid.sample(|k| (1.0 + 0.1 * i as f64) * (-k).exp());
        m.radial = from_radial(&f, &radial.nodes, &params)?;
    }
    let cfg = SolverConfig {
        dt: 0.05,
        t_end: 200.0,
        record_every: 10,
        ..Default::default()
    };
    let run = evolve_3d(&field, &op, &cfg)?;
    let e0 = run.aggregate[0].energy;
    let drift = run.aggregate.iter().map(|a| rel(a.energy, e0)).fold(0.0, f64::max);
    let series: Vec<(f64, f64)> = run.aggregate.iter().map(|a| (a.t, a.dist_sq.sqrt())).collect();
    let floor = 1e3 * f64::EPSILON * series[0].1;
    let fit = power_law_fit(&series, (10.0, 200.0), floor)?;

    let round_trip = band_limited_round_trip(8, &radial, params, ctx.seed)?;
    let ok = theta_res <= 1e-10 && drift <= 1e-10 && fit.slope <= -0.45 && round_trip <= 1e-12;
    Ok((
        ok,
        format!(
            "theta residual {theta_res:.2e}; energy drift {drift:.2e}; distance slope {:.4}; \
             decay constant {:.3}; round trip (L_max 8) {round_trip:.2e}",
            fit.slope, run.decay_constant
        ),
    ))
}

/// Largest pointwise error of `reconstruct ∘ decompose` on random data of
/// degree at most `l_max`.
pub fn band_limited_round_trip(l_max: usize, radial: &RadialR, params: PhysicalParams, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Vec<f64>> = (0..spherical::harmonics::mode_count(l_max))
        .map(|_| {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0));
            radial.nodes.iter().map(|r| a * (-r / b).exp()).collect()
        })
        .collect();
    let grid = AngularGrid::for_degree(l_max);
    let samples = spherical::harmonics::synthesize(&parts, l_max, &radial.nodes, &grid)?;
    let field = decompose(&samples, l_max, params, radial.clone())?;
    let back = reconstruct(&field, &grid)?;
    Ok(back
        .values
        .iter()
        .zip(&samples.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

fn appendix(ctx: &Context) -> Result<(bool, String)> {
    let params = PhysicalParams::default();
    let lambda = calibrate_lambda(params.r_of(1.0), &params, &ctx.quad)?;
    let mut worst: f64 = 0.0;
    let (lo, hi, n) = (1e-3f64, 30.0f64, 16);
    for i in 0..n {
        let k = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let m = spherical::big_m(params.r_of(k), &params, &ctx.quad)?;
        worst = worst.max(rel(lambda * m.from_w0, m.closed));
    }
    let small: f64 = 1e-3;
    let large: f64 = 50.0;
    let ms = spherical::big_m(params.r_of(small), &params, &ctx.quad)?.closed;
    let ml = spherical::big_m(params.r_of(large), &params, &ctx.quad)?.closed;
    let e0 = rel(ms * small.sinh().powi(2) / small, PI.powi(4) / 60.0);
    let einf = rel(ml * large.sinh().powi(2) / large.powi(5), 1.0 / 60.0);
    Ok((
        worst < 1e-3 && e0 < 0.01 && einf < 0.02,
        format!("lambda {lambda:.8}; max mismatch {worst:.2e}; limits off by {e0:.2e} (k -> 0), {einf:.2e} (k -> inf)"),
    ))
}

fn hopital(ctx: &Context) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in [0.1, 1.0, 10.0, 100.0] {
        for theta in [0.0, 0.5, 1.0, 2.0] {
            for rho in [0.01, 0.1, 1.0] {
                let args = HopitalArgs::new(t, theta, rho)?;
                let z = hopital_z(&args, &ctx.quad)?;
                let b = hopital_bound(&args)?;
                worst = worst.max(z.mantissa / b.mantissa);
                count += 1;
            }
        }
    }
    Ok((worst <= 1.0, format!("max Z/bound {worst:.12} over {count} points")))
}
