//! Dense discretization of `E(f) = -Γ f + 2∫K(·,k')f(k')dk'` on a radial
//! grid, its quadratic form, the projection onto `φ₀` and the spectral gap
//! of the symmetrized, rank-one-corrected form.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::interp::Pchip;
use crate::kernels::{gamma, kernel_k_unchecked, phi_unchecked};
use crate::quadrature::QuadratureConfig;

/// Tolerance for semidefiniteness checks of assembled matrices.
pub const EIG_TOL: f64 = 1e-8;

/// How the loss frequency `Γ` is sampled on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// `Γ(k_i)` by adaptive quadrature.
    Quadrature,
    /// `Γ_i = (2/φ_i) Σ_j K_ij w_j φ_j`, which makes `E_h φ = 0` and
    /// `Σ_i w_i φ_i (E_h f)_i = 0` hold to round-off.
    #[default]
    KernelConsistent,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: RadialGrid,
    pub gamma_vec: Vec<f64>,
    pub kernel_mat: DMatrix<f64>,
    pub gamma_mode: GammaMode,
    /// `e_i = w_i φ(k_i)`, the density of the conserved energy.
    pub energy_weights: Vec<f64>,
    /// `φ(k_i)`.
    pub phi_vec: Vec<f64>,
    /// `2 K_ij w_j`, the matrix of the gain term `T₂`.
    gain: DMatrix<f64>,
}

/// Builds `E_h` on `grid`. Rows of the kernel matrix are filled in parallel.
pub fn assemble(grid: &RadialGrid, cfg: &QuadratureConfig, mode: GammaMode) -> Result<DiscreteOperator> {
    let n = grid.len();
    let nodes = &grid.nodes;
    let mut buf = vec![0.0; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel_k_unchecked(nodes[i], nodes[j]);
        }
    });
    let kernel_mat = DMatrix::from_row_slice(n, n, &buf);
    let scale = kernel_mat.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            let diff = (kernel_mat[(i, j)] - kernel_mat[(j, i)]).abs();
            if diff > 4.0 * f64::EPSILON * scale {
                return Err(Error::SymmetryViolation { i, j, diff });
            }
        }
    }

    let phi_vec: Vec<f64> = nodes.iter().map(|&k| phi_unchecked(k)).collect();
    let gamma_vec = match mode {
        GammaMode::Quadrature => nodes.par_iter().map(|&k| gamma(k, cfg)).collect::<Result<Vec<f64>>>()?,
        GammaMode::KernelConsistent => (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|j| kernel_mat[(i, j)] * grid.weights[j] * phi_vec[j]).sum();
                2.0 * s / phi_vec[i]
            })
            .collect(),
    };
    if let Some(index) = gamma_vec.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gamma_vec",
            index,
        });
    }

    let mut gain = kernel_mat.clone();
    for (j, mut col) in gain.column_iter_mut().enumerate() {
        col *= 2.0 * grid.weights[j];
    }
    let energy_weights = grid.weights.iter().zip(&phi_vec).map(|(w, p)| w * p).collect();
    Ok(DiscreteOperator {
        grid: grid.clone(),
        gamma_vec,
        kernel_mat,
        gamma_mode: mode,
        energy_weights,
        phi_vec,
        gain,
    })
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `T₂ f = 2 Σ_j K_ij w_j f_j`.
    pub fn gain(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(f.len())?;
        let v = &self.gain * DVector::from_column_slice(f);
        Ok(v.as_slice().to_vec())
    }

    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// Dense `E_h = -diag(Γ) + T₂`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = self.gain.clone();
        for (i, g) in self.gamma_vec.iter().enumerate() {
            m[(i, i)] -= g;
        }
        m
    }

    /// `max_i Σ_j |2 K_ij w_j|`.
    pub fn gain_inf_norm(&self) -> f64 {
        self.gain
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_i |(E_h φ)_i| / max_i |Γ_i φ_i|`.
    pub fn null_residual(&self) -> f64 {
        let e = apply(self, &self.phi_vec).unwrap_or_default();
        let num = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let den = self
            .gamma_vec
            .iter()
            .zip(&self.phi_vec)
            .fold(0.0f64, |m, (g, p)| m.max((g * p).abs()));
        num / den
    }

    /// Discrete conserved energy `Σ e_i f_i`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.energy_weights.iter().zip(f).map(|(e, v)| e * v).sum()
    }

    /// `(Σ w_i Γ_i f_i²)^{1/2}`.
    pub fn gamma_norm(&self, f: &[f64]) -> f64 {
        self.grid
            .weights
            .iter()
            .zip(&self.gamma_vec)
            .zip(f)
            .map(|((w, g), v)| w * g * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ w_i f_i² / Γ_i)^{1/2}`.
    pub fn inv_gamma_norm(&self, f: &[f64]) -> f64 {
        self.grid
            .weights
            .iter()
            .zip(&self.gamma_vec)
            .zip(f)
            .map(|((w, g), v)| w * v * v / g)
            .sum::<f64>()
            .sqrt()
    }
}

/// `(E_h f)_i = -Γ_i f_i + 2 Σ_j K_ij w_j f_j`.
pub fn apply(op: &DiscreteOperator, f: &[f64]) -> Result<Vec<f64>> {
    let mut out = op.gain(f)?;
    for ((o, g), v) in out.iter_mut().zip(&op.gamma_vec).zip(f) {
        *o -= g * v;
    }
    Ok(out)
}

/// `⟨-E_h f, g⟩ = -Σ_i w_i g_i (E_h f)_i`.
pub fn dirichlet_form(op: &DiscreteOperator, f: &[f64], g: &[f64]) -> Result<f64> {
    op.grid.check_len(g.len())?;
    let ef = apply(op, f)?;
    Ok(-op.grid.dot(&ef, g))
}

/// The triple-product representation of `⟨-E f, g⟩`,
/// `∫∫ φ(k+k')φ(k')φ(k) A_f A_g dk dk'` with
/// `A_f = Q f(k) + Q f(k') - Q f(k+k')` and `Q f(k) = sinh(k) f(k)/k`,
/// evaluated with the tensor-product grid rule. Off-grid values `f(k+k')`
/// come from monotone cubic interpolation and vanish past `k_max`.
pub fn triple_form(f: &[f64], g: &[f64], grid: &RadialGrid) -> Result<f64> {
    grid.check_len(f.len())?;
    grid.check_len(g.len())?;
    let pf = Pchip::new(&grid.nodes, f)?;
    let pg = Pchip::new(&grid.nodes, g)?;
    let q = |k: f64, v: f64| k.sinh() * v / k;
    let qf: Vec<f64> = grid.nodes.iter().zip(f).map(|(&k, &v)| q(k, v)).collect();
    let qg: Vec<f64> = grid.nodes.iter().zip(g).map(|(&k, &v)| q(k, v)).collect();
    let n = grid.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = grid.nodes[i];
            let mut acc = 0.0;
            for j in 0..n {
                let k2 = grid.nodes[j];
                let s = k + k2;
                let (fs, gs) = if s < grid.k_max {
                    (pf.eval(s), pg.eval(s))
                } else {
                    (0.0, 0.0)
                };
                let af = qf[i] + qf[j] - q(s, fs);
                let ag = qg[i] + qg[j] - q(s, gs);
                let mu = phi_unchecked(s) * phi_unchecked(k2) * phi_unchecked(k);
                acc += grid.weights[j] * mu * af * ag;
            }
            grid.weights[i] * acc
        })
        .collect();
    Ok(rows.iter().sum())
}

/// `c₀(f) = Σ w_i f_i φ₀(k_i)`, with `φ₀` normalized on the grid (see
/// [`RadialGrid::phi0_vec`]); it differs from the continuum normalization
/// by the grid's quadrature error in `‖φ‖₂`.
pub fn c0_functional(f: &[f64], grid: &RadialGrid) -> Result<f64> {
    grid.check_len(f.len())?;
    Ok(grid.dot(f, &grid.phi0_vec()))
}

/// `(c₀(f), c₀(f) φ₀)`.
pub fn project_p(f: &[f64], grid: &RadialGrid) -> Result<(f64, Vec<f64>)> {
    let c0 = c0_functional(f, grid)?;
    let pf = grid.phi0_vec().into_iter().map(|p| c0 * p).collect();
    Ok((c0, pf))
}

/// `M = I - T + u uᵀ` in the unknown `g_i = √(w_i Γ_i) h_i`, with
/// `u_i = φ₀(k_i) √w_i / α_i` and `α = √Γ`.
#[derive(Debug, Clone)]
pub struct SymmetrizedForm {
    pub matrix: DMatrix<f64>,
    pub alpha_vec: Vec<f64>,
    pub rank_one: Vec<f64>,
}

impl SymmetrizedForm {
    /// `I - T` without the rank-one correction.
    pub fn uncorrected(&self) -> DMatrix<f64> {
        let u = DVector::from_column_slice(&self.rank_one);
        &self.matrix - &u * u.transpose()
    }
}

pub fn symmetrize(op: &DiscreteOperator) -> Result<SymmetrizedForm> {
    if let Some(index) = op.gamma_vec.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::DegenerateGamma {
            index,
            value: op.gamma_vec[index],
        });
    }
    let n = op.len();
    let alpha_vec: Vec<f64> = op.gamma_vec.iter().map(|g| g.sqrt()).collect();
    let sw: Vec<f64> = op.grid.weights.iter().map(|w| w.sqrt()).collect();
    let scale: Vec<f64> = sw.iter().zip(&alpha_vec).map(|(s, a)| s / a).collect();
    let rank_one: Vec<f64> = op.grid.phi0_vec().iter().zip(&scale).map(|(p, s)| p * s).collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        // Each factor is formed symmetrically in (i, j) so M is exactly symmetric.
        delta - 2.0 * op.kernel_mat[(i, j)] * (scale[i] * scale[j]) + rank_one[i] * rank_one[j]
    });
    Ok(SymmetrizedForm {
        matrix,
        alpha_vec,
        rank_one,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub c_star: f64,
    /// The ten smallest eigenvalues, ascending.
    pub spectrum_head: Vec<f64>,
    pub groundvec: Vec<f64>,
}

/// Eigenvalues ascending with their eigenvectors.
fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if let Some(i) = order.iter().position(|&i| !eig.eigenvalues[i].is_finite()) {
        return Err(Error::NonFinite {
            what: "eigenvalues",
            index: i,
        });
    }
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub fn spectral_gap(sym: &SymmetrizedForm) -> Result<SpectralGap> {
    let (values, vectors) = sorted_eigen(sym.matrix.clone())?;
    let c_star = values[0];
    if c_star <= EIG_TOL {
        warn!("spectral gap {c_star:e} not above {EIG_TOL:e}; grid may be under-resolved");
    }
    Ok(SpectralGap {
        c_star,
        spectrum_head: values.iter().take(10).copied().collect(),
        groundvec: vectors.column(0).iter().copied().collect(),
    })
}

/// Spectrum of the uncorrected form `I - T`, whose kernel is spanned by the
/// image of `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullspaceReport {
    pub min_eigenvalue: f64,
    pub second_eigenvalue: f64,
    /// `|cos|` between the lowest eigenvector and `√(w Γ) φ` on the nodes.
    pub cosine: f64,
}

pub fn nullspace_report(op: &DiscreteOperator, sym: &SymmetrizedForm) -> Result<NullspaceReport> {
    let (values, vectors) = sorted_eigen(sym.uncorrected())?;
    let reference: Vec<f64> = (0..op.len())
        .map(|i| op.grid.weights[i].sqrt() * sym.alpha_vec[i] * op.phi_vec[i])
        .collect();
    let v = vectors.column(0);
    let dot: f64 = v.iter().zip(&reference).map(|(a, b)| a * b).sum();
    let nr = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(NullspaceReport {
        min_eigenvalue: values[0],
        second_eigenvalue: values[1],
        cosine: (dot / (nr * v.norm())).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::kernels::PHI0_SCALE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_op(mode: GammaMode) -> DiscreteOperator {
        let grid = build_grid(&GridSpec::default().with_n(100)).unwrap();
        assemble(&grid, &QuadratureConfig::default(), mode).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn kernel_consistent_identities_are_exact() {
        let op = small_op(GammaMode::KernelConsistent);
        assert!(op.null_residual() <= 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_vec(&mut rng, op.len());
            let ef = apply(&op, &f).unwrap();
            let scale: f64 = op.energy_weights.iter().zip(&ef).map(|(e, v)| (e * v).abs()).sum();
            assert!(op.energy(&ef).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn kernel_matrix_is_exactly_symmetric() {
        let op = small_op(GammaMode::KernelConsistent);
        assert_eq!(op.kernel_mat, op.kernel_mat.transpose());
        let sym = symmetrize(&op).unwrap();
        assert_eq!(sym.matrix, sym.matrix.transpose());
    }

    #[test]
    fn apply_is_linear_and_checks_length() {
        let op = small_op(GammaMode::KernelConsistent);
        let n = op.len();
        assert!(apply(&op, &vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(apply(&op, &[1.0; 3]), Err(Error::DimensionMismatch { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, g) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lhs = apply(&op, &combo).unwrap();
        let (ef, eg) = (apply(&op, &f).unwrap(), apply(&op, &g).unwrap());
        let scale = op.gamma_vec.iter().fold(0.0f64, |m, v| m.max(*v));
        for i in 0..n {
            assert!((lhs[i] - (2.0 * ef[i] - 0.5 * eg[i])).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn projection_properties() {
        let grid = build_grid(&GridSpec::default().with_n(100)).unwrap();
        let phi0 = grid.phi0_vec();
        let (c0, p) = project_p(&phi0, &grid).unwrap();
        assert!((c0 - 1.0).abs() < 1e-14);
        assert!(p.iter().zip(&phi0).all(|(a, b)| (a - b).abs() < 1e-14));
        // the grid normalization agrees with the continuum one to quadrature accuracy
        let continuum = grid.sample(|k| PHI0_SCALE * phi_unchecked(k));
        assert!(continuum.iter().zip(&phi0).all(|(a, b)| (a - b).abs() < 1e-7 * b.abs()));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_vec(&mut rng, grid.len());
        let (c, pf) = project_p(&f, &grid).unwrap();
        let (c2, ppf) = project_p(&pf, &grid).unwrap();
        assert!((c2 - c).abs() < 1e-14);
        assert!(ppf.iter().zip(&pf).all(|(a, b)| (a - b).abs() < 1e-14));
        let orth: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
        let (c3, p3) = project_p(&orth, &grid).unwrap();
        assert!(c3.abs() < 1e-14 && p3.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn symmetrized_form_matches_dirichlet_form() {
        let op = small_op(GammaMode::KernelConsistent);
        let sym = symmetrize(&op).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_vec(&mut rng, op.len());
            let gv = DVector::from_column_slice(&g);
            let quad = gv.dot(&(&sym.matrix * &gv));
            let h: Vec<f64> = (0..op.len())
                .map(|i| g[i] / (sym.alpha_vec[i] * op.grid.weights[i].sqrt()))
                .collect();
            let c0 = c0_functional(&h, &op.grid).unwrap();
            let expect = dirichlet_form(&op, &h, &h).unwrap() + c0 * c0;
            assert!((quad - expect).abs() <= 1e-8 * expect.abs());
        }
    }

    #[test]
    fn degenerate_gamma_is_rejected() {
        let mut op = small_op(GammaMode::KernelConsistent);
        op.gamma_vec[3] = 0.0;
        assert!(matches!(symmetrize(&op), Err(Error::DegenerateGamma { index: 3, .. })));
    }

    #[test]
    fn small_grid_spectrum() {
        let op = small_op(GammaMode::KernelConsistent);
        let sym = symmetrize(&op).unwrap();
        let gap = spectral_gap(&sym).unwrap();
        assert!(gap.c_star > 0.0);
        assert_eq!(gap.spectrum_head.len(), 10);
        assert!(gap.spectrum_head.windows(2).all(|w| w[0] <= w[1]));
        let null = nullspace_report(&op, &sym).unwrap();
        assert!(null.min_eigenvalue.abs() < 1e-8);
        assert!(null.cosine > 0.999);
        assert!(null.second_eigenvalue > 10.0 * null.min_eigenvalue.abs());
    }
}
