//! Named initial data. A preset is selected by a string such as
//! `exp-decay`, `bump(0.05)` or `power(-0.25)`.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::interp::Pchip;

/// Initial data that can be sampled on any radial grid.
pub trait InitialData: Send + Sync {
    fn label(&self) -> String;
    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>>;
}

/// Builds [`InitialData`] from the numeric arguments of a preset string.
pub trait PresetFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn arity(&self) -> usize;
    fn build(&self, args: &[f64]) -> Result<Box<dyn InitialData>>;
}

/// The equilibrium profile `φ₀`, normalized on the grid.
pub struct Equilibrium;

impl InitialData for Equilibrium {
    fn label(&self) -> String {
        "equilibrium".into()
    }

    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        Ok(grid.phi0_vec())
    }
}

/// `f₀(k) = e^{-k}`: non-negative, with limit 1 at the origin.
pub struct ExpDecay;

impl InitialData for ExpDecay {
    fn label(&self) -> String {
        "exp-decay".into()
    }

    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        Ok(grid.sample(|k| (-k).exp()))
    }
}

/// Indicator of `(ε, 2ε)` scaled to unit discrete `L²` norm.
pub struct Bump {
    pub eps: f64,
}

/// Fewest nodes a bump window must contain.
pub const MIN_WINDOW_NODES: usize = 8;

impl InitialData for Bump {
    fn label(&self) -> String {
        format!("bump({})", self.eps)
    }

    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        let (lo, hi) = (self.eps, 2.0 * self.eps);
        let nodes = grid.count_in(lo, hi);
        if nodes < MIN_WINDOW_NODES {
            return Err(Error::GridResolution {
                lo,
                hi,
                nodes,
                required: MIN_WINDOW_NODES,
            });
        }
        let f = grid.sample(|k| if k > lo && k < hi { 1.0 } else { 0.0 });
        let norm = grid.norm(&f);
        Ok(f.into_iter().map(|v| v / norm).collect())
    }
}

/// `f₀(k) = k^p`.
pub struct Power {
    pub p: f64,
}

impl InitialData for Power {
    fn label(&self) -> String {
        format!("power({})", self.p)
    }

    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        Ok(grid.sample(|k| k.powf(self.p)))
    }
}

/// Tabulated `(k, f₀)` pairs, interpolated monotonically inside the table,
/// held at the first value below it and zero above it.
pub struct Tabulated {
    pub label: String,
    k: Vec<f64>,
    f: Vec<f64>,
    interp: Pchip,
}

impl Tabulated {
    pub fn new(label: impl Into<String>, k: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let interp = Pchip::new(&k, &f)?;
        Ok(Self {
            label: label.into(),
            k,
            f,
            interp,
        })
    }
}

impl InitialData for Tabulated {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        let (first, last) = (self.k[0], self.k[self.k.len() - 1]);
        Ok(grid.sample(|x| {
            if x < first {
                self.f[0]
            } else if x > last {
                0.0
            } else {
                self.interp.eval(x)
            }
        }))
    }
}

struct Fixed<F: Fn() -> Box<dyn InitialData> + Send + Sync> {
    name: &'static str,
    make: F,
}

impl<F: Fn() -> Box<dyn InitialData> + Send + Sync> PresetFactory for Fixed<F> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn arity(&self) -> usize {
        0
    }

    fn build(&self, _args: &[f64]) -> Result<Box<dyn InitialData>> {
        Ok((self.make)())
    }
}

struct BumpFactory;

impl PresetFactory for BumpFactory {
    fn name(&self) -> &'static str {
        "bump"
    }

    fn arity(&self) -> usize {
        1
    }

    fn build(&self, args: &[f64]) -> Result<Box<dyn InitialData>> {
        let eps = args[0];
        if !(eps > 0.0 && 2.0 * eps < 1.0) {
            return Err(Error::InvalidSpec(format!("bump needs 0 < eps < 1/2, got {eps}")));
        }
        Ok(Box::new(Bump { eps }))
    }
}

struct PowerFactory;

impl PresetFactory for PowerFactory {
    fn name(&self) -> &'static str {
        "power"
    }

    fn arity(&self) -> usize {
        1
    }

    fn build(&self, args: &[f64]) -> Result<Box<dyn InitialData>> {
        if !args[0].is_finite() {
            return Err(Error::InvalidSpec(format!(
                "power exponent must be finite, got {}",
                args[0]
            )));
        }
        Ok(Box::new(Power { p: args[0] }))
    }
}

pub struct PresetRegistry {
    factories: Vec<Box<dyn PresetFactory>>,
}

impl Default for PresetRegistry {
    fn default() -> Self {
        let mut r = Self { factories: Vec::new() };
        r.register(Box::new(Fixed {
            name: "equilibrium",
            make: || Box::new(Equilibrium) as Box<dyn InitialData>,
        }));
        r.register(Box::new(Fixed {
            name: "exp-decay",
            make: || Box::new(ExpDecay) as Box<dyn InitialData>,
        }));
        r.register(Box::new(BumpFactory));
        r.register(Box::new(PowerFactory));
        r
    }
}

impl PresetRegistry {
    pub fn register(&mut self, factory: Box<dyn PresetFactory>) {
        self.factories.retain(|f| f.name() != factory.name());
        self.factories.push(factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.iter().map(|f| f.name()).collect()
    }

    /// Parses `name` or `name(a, b, ...)` and builds the preset.
    pub fn resolve(&self, spec: &str) -> Result<Box<dyn InitialData>> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(open) => {
                let inner = spec[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidSpec(format!("unbalanced parentheses in preset '{spec}'")))?;
                let args = inner
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidSpec(format!("bad preset argument '{a}' in '{spec}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                (spec[..open].trim(), args)
            }
            None => (spec, Vec::new()),
        };
        let factory = self
            .factories
            .iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "preset",
                name: name.to_string(),
                known: self.names().join(", "),
            })?;
        if args.len() != factory.arity() {
            return Err(Error::InvalidSpec(format!(
                "preset '{name}' takes {} argument(s), got {}",
                factory.arity(),
                args.len()
            )));
        }
        factory.build(&args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn resolves_all_presets() {
        let grid = build_grid(&GridSpec::decay_default().with_n(200)).unwrap();
        let r = PresetRegistry::default();
        for spec in [
            "equilibrium",
            "exp-decay",
            "bump(0.05)",
            "power(-0.25)",
            " bump( 0.1 ) ",
        ] {
            let f = r.resolve(spec).unwrap().sample(&grid).unwrap();
            assert_eq!(f.len(), grid.len());
            assert!(f.iter().all(|v| v.is_finite()), "{spec}");
        }
        let b = r.resolve("bump(0.1)").unwrap().sample(&grid).unwrap();
        assert!((grid.norm(&b) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_malformed_specs() {
        let r = PresetRegistry::default();
        assert!(matches!(r.resolve("gaussian"), Err(Error::Unknown { .. })));
        assert!(r.resolve("bump").is_err());
        assert!(r.resolve("bump(0.1").is_err());
        assert!(r.resolve("bump(x)").is_err());
        assert!(r.resolve("bump(0.6)").is_err());
        assert!(r.resolve("exp-decay(1)").is_err());
    }

    #[test]
    fn coarse_window_is_rejected() {
        let grid = build_grid(&GridSpec::default().with_n(40)).unwrap();
        let err = Bump { eps: 0.05 }.sample(&grid).unwrap_err();
        assert!(matches!(err, Error::GridResolution { .. }));
    }

    #[test]
    fn tabulated_extends_by_convention() {
        let grid = build_grid(&GridSpec::default().with_n(100)).unwrap();
        let t = Tabulated::new("t", vec![0.01, 1.0, 2.0], vec![3.0, 2.0, 1.0]).unwrap();
        let f = t.sample(&grid).unwrap();
        for (&k, &v) in grid.nodes.iter().zip(&f) {
            if k < 0.01 {
                assert_eq!(v, 3.0);
            } else if k > 2.0 {
                assert_eq!(v, 0.0);
            } else {
                assert!((1.0..=3.0).contains(&v));
            }
        }
    }
}
