use std::sync::OnceLock;

use lqbe_core::grid::{build_grid, GridSpec};
use lqbe_core::kernels::hs_norm_c0;
use lqbe_core::operator::{apply, assemble, dirichlet_form, project_p, DiscreteOperator, GammaMode};
use lqbe_core::quadrature::QuadratureConfig;
use proptest::prelude::*;

fn op() -> &'static DiscreteOperator {
    static OP: OnceLock<DiscreteOperator> = OnceLock::new();
    OP.get_or_init(|| {
        let grid = build_grid(&GridSpec::default().with_n(200)).unwrap();
        assemble(&grid, &QuadratureConfig::default(), GammaMode::KernelConsistent).unwrap()
    })
}

fn c0_norm() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| hs_norm_c0(&QuadratureConfig::default()).unwrap().value)
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn continuity_constant_bounds_the_operator(f in vector()) {
        let op = op();
        let ef = apply(op, &f).unwrap();
        let lhs = op.inv_gamma_norm(&ef);
        let rhs = (1.0 + 2.0 * c0_norm()) * op.gamma_norm(&f);
        prop_assert!(lhs <= rhs, "{lhs} > {rhs}");
    }

    #[test]
    fn energy_is_annihilated(f in vector()) {
        let op = op();
        let ef = apply(op, &f).unwrap();
        let scale: f64 = op.energy_weights.iter().zip(&ef).map(|(e, v)| (e * v).abs()).sum();
        prop_assert!(op.energy(&ef).abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn form_is_non_negative_and_satisfies_cauchy_schwarz(f in vector(), g in vector()) {
        let op = op();
        let ff = dirichlet_form(op, &f, &f).unwrap();
        let gg = dirichlet_form(op, &g, &g).unwrap();
        let fg = dirichlet_form(op, &f, &g).unwrap();
        prop_assert!(ff >= -1e-10 * op.grid.dot(&f, &f));
        prop_assert!(fg.abs() <= 0.5 * ff + 0.5 * gg + 1e-10);
    }

    #[test]
    fn form_vanishes_on_the_equilibrium_direction(c in -5.0f64..5.0, f in vector()) {
        let op = op();
        let (_, pf) = project_p(&f, &op.grid).unwrap();
        let h: Vec<f64> = op.phi_vec.iter().map(|p| c * p).collect();
        let hf = dirichlet_form(op, &h, &f).unwrap();
        let scale = dirichlet_form(op, &f, &f).unwrap().abs().max(1.0);
        prop_assert!(hf.abs() <= 1e-9 * scale * c.abs().max(1.0));
        let (c0, _) = project_p(&pf, &op.grid).unwrap();
        let (c0f, _) = project_p(&f, &op.grid).unwrap();
        prop_assert!((c0 - c0f).abs() <= 1e-12 * c0f.abs().max(1.0));
    }
}
