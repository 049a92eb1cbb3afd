//! One function per subcommand. Each reads a resolved [`RunConfig`] and
//! writes its files into the output directory.

use log::{info, warn};
use lqbe_core::acceptance::{self, Context};
use lqbe_core::evolution::schemes::SchemeRegistry;
use lqbe_core::evolution::{
    classify_initial_data, decay_fit, evolve_with, experiment_no_uniform_decay, power_law_fit, remove_equilibrium,
    DecayFit, DiagRow, Diagnostics, InitialDataReport,
};
use lqbe_core::grid::build_grid;
use lqbe_core::kernels::{gamma, hs_norm_c0, phi, phi0, row_norm_bound, row_norm_sq};
use lqbe_core::operator::{assemble, nullspace_report, spectral_gap, symmetrize, DiscreteOperator, GammaMode};
use lqbe_core::quadrature::QuadratureConfig;
use lqbe_core::spherical::{
    calibrate_lambda, evolve_3d_with, from_radial, theta_coefficients, AggregateRow, RadialOperator3d, RadialR,
    SphericalField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::failure::{CliResult, Failure};
use crate::output::{float, OutDir, Table};

const SPECTRUM_HEAD: usize = 10;

fn operator(cfg: &RunConfig) -> CliResult<DiscreteOperator> {
    let grid = build_grid(&cfg.grid())?;
    Ok(assemble(&grid, &cfg.quadrature, cfg.gamma_mode)?)
}

/// The configured initial profile on the operator's grid.
fn initial(cfg: &RunConfig, op: &DiscreteOperator) -> CliResult<(String, Vec<f64>)> {
    let data = cfg.initial_data()?;
    let mut f0 = data.sample(&op.grid)?;
    if cfg.remove_equilibrium() {
        f0 = remove_equilibrium(&f0, &op.grid)?;
    }
    Ok((data.label(), f0))
}

/// `points` values log-spaced over `[lo, hi]`, with both ends exact.
fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = points - 1;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => (a + (b - a) * i as f64 / last as f64).exp(),
        })
        .collect()
}

#[derive(Serialize)]
struct CutoffRow {
    tail_cutoff: f64,
    c0: f64,
    half_cutoff_value: f64,
    truncation_estimate: f64,
}

#[derive(Serialize)]
struct C0Summary {
    c0: f64,
    tail_cutoff: f64,
    convergence: Vec<CutoffRow>,
    /// Largest relative change between consecutive cutoffs.
    max_relative_change: f64,
}

pub fn kernels(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let q = &cfg.quadrature;
    let s = &cfg.kernels;
    let mut table = Table::with_header("k,phi,phi0,gamma,row_norm,bound_rhs");
    for k in log_grid(s.k_min, s.k_max, s.points) {
        let row = [
            k,
            phi(k)?,
            phi0(k)?,
            gamma(k, q)?,
            row_norm_sq(k, q)?,
            row_norm_bound(k),
        ];
        table.push_floats(Vec::new(), &row);
    }
    out.csv("kernels.csv", &table)?;

    let c0 = hs_norm_c0(q)?.value;
    let convergence = s
        .cutoffs
        .iter()
        .map(|&tail_cutoff| {
            let h = hs_norm_c0(&QuadratureConfig { tail_cutoff, ..*q })?;
            Ok(CutoffRow {
                tail_cutoff,
                c0: h.value,
                half_cutoff_value: h.half_cutoff_value,
                truncation_estimate: h.truncation_estimate,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let max_relative_change = convergence
        .windows(2)
        .map(|w| ((w[1].c0 - w[0].c0) / w[1].c0).abs())
        .fold(0.0, f64::max);
    info!("C0 = {c0} at cutoff {}", q.tail_cutoff);
    out.json(
        "c0_norm.json",
        &C0Summary {
            c0,
            tail_cutoff: q.tail_cutoff,
            convergence,
            max_relative_change,
        },
    )
}

struct Rung {
    n: usize,
    k_min: f64,
    k_max: f64,
    c_star: f64,
    null_residual: f64,
    uncorrected_min: f64,
    cosine: f64,
    head: Vec<f64>,
}

fn rung(cfg: &RunConfig, n: usize) -> CliResult<Rung> {
    let grid = build_grid(&cfg.grid().with_n(n))?;
    let op = assemble(&grid, &cfg.quadrature, cfg.gamma_mode)?;
    let sym = symmetrize(&op)?;
    let gap = spectral_gap(&sym)?;
    let null = nullspace_report(&op, &sym)?;
    Ok(Rung {
        n,
        k_min: grid.k_min,
        k_max: grid.k_max,
        c_star: gap.c_star,
        null_residual: op.null_residual(),
        uncorrected_min: null.min_eigenvalue,
        cosine: null.cosine,
        head: gap.spectrum_head,
    })
}

#[derive(Serialize)]
struct SpectrumSummary {
    ladder: Vec<usize>,
    c_star: Vec<f64>,
    /// `|C*(N_fine) - C*(N_coarse)| / C*(N_fine)` over the two finest grids.
    finest_variation: Option<f64>,
}

pub fn spectrum(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let ladder = &cfg.spectrum.ladder;
    let rungs = std::thread::scope(|s| {
        let handles: Vec<_> = ladder.iter().map(|&n| s.spawn(move || rung(cfg, n))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("spectrum worker panicked"))
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut header: Vec<String> = [
        "n",
        "k_min",
        "k_max",
        "gamma_mode",
        "c_star",
        "null_residual",
        "uncorrected_min",
        "cosine",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=SPECTRUM_HEAD).map(|i| format!("lambda_{i}")));
    let mut table = Table::new(&header);
    let mode = match cfg.gamma_mode {
        GammaMode::Quadrature => "quadrature",
        GammaMode::KernelConsistent => "kernel-consistent",
    };
    for r in &rungs {
        let mut row = vec![r.n.to_string(), float(r.k_min), float(r.k_max), mode.to_string()];
        row.extend([r.c_star, r.null_residual, r.uncorrected_min, r.cosine].map(float));
        row.extend((0..SPECTRUM_HEAD).map(|i| r.head.get(i).map_or_else(String::new, |&v| float(v))));
        table.push(row);
        if r.c_star <= 0.0 {
            warn!("C* = {} on N = {} is not positive", r.c_star, r.n);
        }
    }
    out.csv("spectrum.csv", &table)?;

    let mut order: Vec<&Rung> = rungs.iter().collect();
    order.sort_by_key(|r| r.n);
    let finest_variation = match order.as_slice() {
        [.., a, b] => Some(((b.c_star - a.c_star) / b.c_star).abs()),
        _ => None,
    };
    out.json(
        "spectrum.json",
        &SpectrumSummary {
            ladder: ladder.clone(),
            c_star: rungs.iter().map(|r| r.c_star).collect(),
            finest_variation,
        },
    )
}

fn diag_table(prefix_header: &[&str], runs: &[(Vec<String>, &Diagnostics)]) -> Table {
    let mut header: Vec<&str> = prefix_header.to_vec();
    header.extend(DiagRow::CSV_HEADER.split(','));
    header.push("dissipation");
    let mut table = Table::new(&header);
    for (prefix, diag) in runs {
        for row in &diag.rows {
            let mut values = row.csv_fields().to_vec();
            values.push(row.dissipation);
            table.push_floats(prefix.clone(), &values);
        }
    }
    table
}

fn final_state_table(op: &DiscreteOperator, f: &[f64]) -> Table {
    let mut table = Table::with_header("k,f");
    for (&k, &v) in op.grid.nodes.iter().zip(f) {
        table.push_floats(Vec::new(), &[k, v]);
    }
    table
}

#[derive(Serialize)]
struct EvolveSummary {
    initial: String,
    scheme: String,
    steps: usize,
    t_final: f64,
    energy_drift: f64,
    c0_drift: f64,
    min_f: f64,
    dist_eq_initial: f64,
    dist_eq_final: f64,
    dissipation: f64,
}

fn evolve_summary(label: String, cfg: &RunConfig, diag: &Diagnostics) -> CliResult<EvolveSummary> {
    let (first, last) = match (diag.rows.first(), diag.rows.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(lqbe_core::Error::InsufficientData("no diagnostics recorded".into()).into()),
    };
    let drift = |get: fn(&DiagRow) -> f64| {
        diag.rows
            .iter()
            .map(|r| (get(r) - get(first)).abs())
            .fold(0.0, f64::max)
    };
    let solver = cfg.solver();
    Ok(EvolveSummary {
        initial: label,
        steps: solver.steps(),
        scheme: solver.scheme,
        t_final: last.t,
        energy_drift: drift(|r| r.energy),
        c0_drift: drift(|r| r.c0),
        min_f: diag.rows.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min),
        dist_eq_initial: first.dist_eq,
        dist_eq_final: last.dist_eq,
        dissipation: last.dissipation,
    })
}

pub fn evolve(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let op = operator(cfg)?;
    let (label, f0) = initial(cfg, &op)?;
    let (state, diag) = evolve_with(&f0, &op, &cfg.solver(), &SchemeRegistry::default())?;
    out.csv("diagnostics.csv", &diag_table(&[], &[(Vec::new(), &diag)]))?;
    out.csv("final_state.csv", &final_state_table(&op, &state.f))?;
    out.json("summary.json", &evolve_summary(label, cfg, &diag)?)
}

#[derive(Serialize)]
struct DecaySummary {
    initial: String,
    fit_window: (f64, f64),
    slope: f64,
    intercept: f64,
    r2: f64,
    fit_rows: usize,
    min_f: f64,
    /// Which decay hypothesis the data appear to satisfy, before any
    /// equilibrium component is removed.
    classification: Option<InitialDataReport>,
}

pub fn decay_study(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let op = operator(cfg)?;
    let data = cfg.initial_data()?;
    let raw = data.sample(&op.grid)?;
    let classification = match classify_initial_data(&raw, &op.grid) {
        Ok(r) => Some(r),
        Err(e) => {
            warn!("initial data not classified: {e}");
            None
        }
    };
    let (label, f0) = initial(cfg, &op)?;
    let solver = cfg.solver();
    let registry = SchemeRegistry::default();

    let (run, eps_rows) = std::thread::scope(|s| {
        let run = s.spawn(|| evolve_with(&f0, &op, &solver, &registry));
        let eps = s.spawn(|| experiment_no_uniform_decay(&op, &solver, &cfg.decay.eps_list));
        (
            run.join().expect("decay worker panicked"),
            eps.join().expect("eps worker panicked"),
        )
    });
    let (_, diag) = run?;
    let eps_rows = eps_rows?;
    out.csv("diagnostics.csv", &diag_table(&[], &[(Vec::new(), &diag)]))?;

    let mut table = Table::with_header("eps,t_half");
    for r in &eps_rows {
        table.push_floats(Vec::new(), &[r.eps, r.t_half]);
    }
    out.csv("eps_table.csv", &table)?;

    let DecayFit {
        slope,
        intercept,
        r2,
        rows,
    } = decay_fit(&diag, cfg.decay.fit_window)?;
    info!("decay slope {slope} over {rows} rows");
    out.json(
        "summary.json",
        &DecaySummary {
            initial: label,
            fit_window: cfg.decay.fit_window,
            slope,
            intercept,
            r2,
            fit_rows: rows,
            min_f: diag.rows.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min),
            classification,
        },
    )
}

#[derive(Serialize)]
struct ThreeDSummary {
    initial: String,
    #[serde(rename = "L_max")]
    l_max: usize,
    seed: u64,
    lambda: f64,
    theta_residual: f64,
    energy_drift: f64,
    mass_drift: f64,
    decay_constant: f64,
    distance_fit: Option<DecayFit>,
    theta_coefficients: Vec<f64>,
}

pub fn three_d(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let params = cfg.physics;
    let op = operator(cfg)?;
    let (label, f0) = initial(cfg, &op)?;
    let radial = RadialR::from_k_grid(&op.grid, &params);
    let settings = &cfg.three_d;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = settings.amplitude;
    let mut field = SphericalField::zeros(params, settings.l_max, radial.clone());
    for (i, mode) in field.modes.iter_mut().enumerate() {
        let a = if i == 0 { 1.0 } else { rng.random_range(-amp..=amp) };
        let f: Vec<f64> = f0.iter().map(|v| a * v).collect();
        mode.radial = from_radial(&f, &radial.nodes, &params)?;
    }

    let lambda = calibrate_lambda(params.r_of(1.0), &params, &cfg.quadrature)?;
    let theta_residual = RadialOperator3d::new(&radial, &params, lambda)?.theta_residual()?;
    let run = evolve_3d_with(&field, &op, &cfg.solver(), &SchemeRegistry::default())?;

    out.json("field_initial.json", &field)?;
    out.json("field_final.json", &run.field)?;
    out.json("theta.json", &run.theta)?;
    let per_mode: Vec<(Vec<String>, &Diagnostics)> = run
        .modes
        .iter()
        .map(|m| (vec![m.ell.to_string(), m.m.to_string()], &m.diagnostics))
        .collect();
    out.csv("modes.csv", &diag_table(&["ell", "m"], &per_mode))?;
    let mut table = Table::with_header(AggregateRow::CSV_HEADER);
    for row in &run.aggregate {
        table.push_floats(Vec::new(), &row.csv_fields());
    }
    out.csv("aggregate.csv", &table)?;

    let first = run.aggregate[0];
    let drift = |get: fn(&AggregateRow) -> f64| {
        let scale = get(&first).abs().max(f64::MIN_POSITIVE);
        run.aggregate
            .iter()
            .map(|a| (get(a) - get(&first)).abs() / scale)
            .fold(0.0, f64::max)
    };
    let series: Vec<(f64, f64)> = run.aggregate.iter().map(|a| (a.t, a.dist_sq.sqrt())).collect();
    let floor = 1e3 * f64::EPSILON * series[0].1;
    let distance_fit = match power_law_fit(&series, settings.fit_window, floor) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warn!("distance to the stationary state not fitted: {e}");
            None
        }
    };
    out.json(
        "summary.json",
        &ThreeDSummary {
            initial: label,
            l_max: settings.l_max,
            seed: cfg.seed,
            lambda,
            theta_residual,
            energy_drift: drift(|a| a.energy),
            mass_drift: drift(|a| a.mass),
            decay_constant: run.decay_constant,
            distance_fit,
            theta_coefficients: theta_coefficients(&field)?,
        },
    )
}

pub fn verify(cfg: &RunConfig, out: &OutDir) -> CliResult<()> {
    let ctx = Context::new(cfg.seed);
    let outcomes = acceptance::run(&ctx, &[]);
    let mut report = String::new();
    for o in &outcomes {
        let line = o.line();
        println!("{line}");
        report.push_str(&line);
        report.push('\n');
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let total = outcomes.len();
    let tally = format!("{} of {total} criteria passed", total - failed);
    println!("{tally}");
    report.push_str(&tally);
    report.push('\n');
    out.text("verify.txt", &report)?;
    if failed > 0 {
        return Err(Failure::Acceptance { failed, total });
    }
    Ok(())
}
