//! The JSON run configuration. Sections left out take their defaults; the
//! grid and solver defaults depend on the command, so the echoed config is
//! the resolved one.

use std::path::{Path, PathBuf};

use lqbe_core::evolution::presets::{InitialData, PresetRegistry, Tabulated};
use lqbe_core::evolution::schemes::SchemeRegistry;
use lqbe_core::evolution::SolverConfig;
use lqbe_core::grid::GridSpec;
use lqbe_core::operator::GammaMode;
use lqbe_core::quadrature::QuadratureConfig;
use lqbe_core::spherical::harmonics::MAX_LEGENDRE_DEGREE;
use lqbe_core::spherical::PhysicalParams;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<GridSpec>,
    pub quadrature: QuadratureConfig,
    pub gamma_mode: GammaMode,
    pub solver: Option<SolverConfig>,
    pub physics: PhysicalParams,
    pub initial: InitialSpec,
    pub kernels: KernelsSettings,
    pub spectrum: SpectrumSettings,
    pub decay: DecaySettings,
    #[serde(rename = "3d")]
    pub three_d: ThreeDSettings,
    pub seed: u64,
    /// Not echoed, so that reruns into different directories match.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

/// A named preset such as `bump(0.05)`, or a CSV of `(k, f₀)` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub preset: Option<String>,
    pub csv: Option<PathBuf>,
    /// Subtract `c₀(f₀) φ₀` before evolving.
    pub remove_equilibrium: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsSettings {
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    /// Tail cutoffs of the `C₀` convergence study.
    pub cutoffs: Vec<f64>,
}

impl Default for KernelsSettings {
    fn default() -> Self {
        Self {
            k_min: 1e-3,
            k_max: 50.0,
            points: 121,
            cutoffs: vec![30.0, 60.0, 120.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    /// Values of `N`, coarsest first.
    pub ladder: Vec<usize>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { ladder: vec![200, 400] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySettings {
    pub fit_window: (f64, f64),
    pub eps_list: Vec<f64>,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self {
            fit_window: (10.0, 200.0),
            eps_list: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeDSettings {
    #[serde(rename = "L_max")]
    pub l_max: usize,
    /// Modes other than `(0, 0)` start at `a f₀` with `a` uniform in
    /// `[-amplitude, amplitude]`, drawn from the seed.
    pub amplitude: f64,
    pub fit_window: (f64, f64),
}

impl Default for ThreeDSettings {
    fn default() -> Self {
        Self {
            l_max: 8,
            amplitude: 0.5,
            fit_window: (10.0, 200.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernels,
    Spectrum,
    Evolve,
    DecayStudy,
    ThreeD,
    Verify,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    /// Fills command-dependent defaults and checks every section.
    pub fn resolve(mut self, cmd: Command) -> CliResult<Self> {
        let grid = match cmd {
            Command::DecayStudy => GridSpec::decay_default(),
            Command::ThreeD => GridSpec::decay_default().with_n(200),
            _ => GridSpec::default(),
        };
        self.grid.get_or_insert(grid);
        let solver = match cmd {
            Command::ThreeD => SolverConfig {
                dt: 0.05,
                ..SolverConfig::default()
            },
            _ => SolverConfig::default(),
        };
        self.solver.get_or_insert(solver);
        if self.initial.preset.is_none() && self.initial.csv.is_none() {
            self.initial.preset = Some("exp-decay".into());
        }
        self.initial
            .remove_equilibrium
            .get_or_insert(cmd == Command::DecayStudy);
        self.validate()?;
        Ok(self)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.unwrap_or_default()
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }

    fn validate(&self) -> CliResult<()> {
        self.grid().validate().map_err(Failure::config)?;
        self.quadrature.validate().map_err(Failure::config)?;
        let solver = self.solver();
        solver.validate().map_err(Failure::config)?;
        SchemeRegistry::default().get(&solver.scheme).map_err(Failure::config)?;
        self.physics.validate().map_err(Failure::config)?;
        if self.initial.preset.is_some() && self.initial.csv.is_some() {
            return Err(Failure::config("initial: give either a preset or a csv path, not both"));
        }
        self.initial_data()?;

        let k = &self.kernels;
        if !(k.k_min > 0.0 && k.k_max > k.k_min && k.k_max.is_finite()) {
            return Err(Failure::config(format!(
                "kernels: need 0 < k_min < k_max, got ({}, {})",
                k.k_min, k.k_max
            )));
        }
        if k.points < 2 {
            return Err(Failure::config("kernels: points must be at least 2"));
        }
        for &c in &k.cutoffs {
            QuadratureConfig {
                tail_cutoff: c,
                ..self.quadrature
            }
            .validate()
            .map_err(Failure::config)?;
        }
        if self.spectrum.ladder.is_empty() || self.spectrum.ladder.contains(&0) {
            return Err(Failure::config("spectrum: ladder must hold positive grid sizes"));
        }
        check_window("decay.fit_window", self.decay.fit_window)?;
        if let Some(eps) = self.decay.eps_list.iter().find(|&&e| !(e > 0.0 && 2.0 * e < 1.0)) {
            return Err(Failure::config(format!(
                "decay: eps must satisfy 0 < 2 eps < 1, got {eps}"
            )));
        }
        let t = &self.three_d;
        if t.l_max > MAX_LEGENDRE_DEGREE {
            return Err(Failure::config(format!(
                "3d: L_max {} exceeds {MAX_LEGENDRE_DEGREE}",
                t.l_max
            )));
        }
        if !(t.amplitude >= 0.0 && t.amplitude.is_finite()) {
            return Err(Failure::config(format!(
                "3d: amplitude must be non-negative, got {}",
                t.amplitude
            )));
        }
        check_window("3d.fit_window", t.fit_window)
    }

    /// The configured initial profile.
    pub fn initial_data(&self) -> CliResult<Box<dyn InitialData>> {
        match (&self.initial.preset, &self.initial.csv) {
            (_, Some(path)) => Ok(Box::new(read_table(path)?)),
            (Some(name), None) => PresetRegistry::default().resolve(name).map_err(Failure::config),
            (None, None) => Err(Failure::config("initial: no preset or csv given")),
        }
    }

    pub fn remove_equilibrium(&self) -> bool {
        self.initial.remove_equilibrium.unwrap_or(false)
    }
}

fn check_window(name: &str, (lo, hi): (f64, f64)) -> CliResult<()> {
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Failure::config(format!("{name}: need 0 <= lo < hi, got ({lo}, {hi})")));
    }
    Ok(())
}

/// Reads `(k, f₀)` rows; a first row that does not parse is taken as a header.
fn read_table(path: &Path) -> CliResult<Tabulated> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let (mut k, mut f) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(Failure::config(format!(
                "{}: row {} has {} fields, expected 2",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                k.push(a);
                f.push(b);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(Failure::config(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Tabulated::new(path.display().to_string(), k, f).map_err(Failure::config)
}
