use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attractor_bounds::bounds::{Direction, LambdaStrategy};
use attractor_bounds::models::{builtin, lorenz, nine_mode, OdeModel, Quantity};
use attractor_bounds::poly::parse_poly;
use attractor_bounds::sdp::SolverSettings;
use attractor_bounds::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ATTRACTOR_BOUNDS_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Bound,
    BoundLocal,
    Sweep,
    MinBall,
    Simulate,
    ManifoldSearch,
    Verify,
    ExportModel,
}

/// One experiment, read from TOML or assembled from flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub command: Option<CommandKind>,
    /// Built-in model name.
    pub model: Option<String>,
    /// TOML model file; takes precedence over `model`.
    pub model_file: Option<PathBuf>,
    /// Overrides of built-in model parameters.
    pub parameters: BTreeMap<String, f64>,
    /// Registered quantity names or polynomials in `x1..xn`.
    pub quantities: Vec<String>,
    pub direction: Option<Direction>,
    pub degrees: Vec<u32>,
    pub lambda: Option<LambdaStrategy>,
    /// `lo:hi:n` (inclusive, evenly spaced) or a comma list.
    pub lambda_grid: Option<String>,
    /// Region polynomial `g >= 0`; the model's default region when absent.
    pub region: Option<String>,
    pub multiplier_degree: Option<u32>,
    /// Impose the model symmetry on `V`; on by default.
    pub symmetry: Option<bool>,
    pub solver: Option<SolverSettings>,
    /// Table destination; stdout when absent.
    pub output: Option<PathBuf>,
    /// Directory for certificates.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub raw: bool,
    pub no_timing: bool,

    pub x0: Option<Vec<f64>>,
    /// Index into the model's equilibria.
    pub equilibrium: Option<usize>,
    pub h: Option<f64>,
    pub steps: Option<usize>,
    pub stride: Option<usize>,
    pub discard: Option<f64>,
    pub n_perturb: Option<usize>,
    pub amplitude: Option<f64>,
    pub horizon: Option<f64>,
    pub settle_tol: Option<f64>,
    /// Seed the ensemble around this many long-transient states instead of
    /// the base state itself.
    pub transient_bases: Option<usize>,
    pub transient_amplitude: Option<f64>,
    pub transient_lifetime: Option<f64>,

    pub certificate: Option<PathBuf>,
    pub samples: Option<usize>,
    pub half_width: Option<f64>,
}

pub fn config_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| config_err(&path.display().to_string(), e.to_string()))
    }

    /// Fills every unset field of `self` from `base`.
    pub fn or(self, base: ExperimentConfig) -> ExperimentConfig {
        let mut out = self;
        macro_rules! fill {
            ($($f:ident),*) => {$(
                if out.$f.is_none() {
                    out.$f = base.$f;
                }
            )*};
        }
        fill!(
            command,
            model,
            model_file,
            direction,
            lambda,
            lambda_grid,
            region,
            multiplier_degree,
            symmetry,
            solver,
            output,
            out_dir,
            seed,
            x0,
            equilibrium,
            h,
            steps,
            stride,
            discard,
            n_perturb,
            amplitude,
            horizon,
            settle_tol,
            transient_bases,
            transient_amplitude,
            transient_lifetime,
            certificate,
            samples,
            half_width
        );
        if out.parameters.is_empty() {
            out.parameters = base.parameters;
        }
        if out.quantities.is_empty() {
            out.quantities = base.quantities;
        }
        if out.degrees.is_empty() {
            out.degrees = base.degrees;
        }
        out.raw |= base.raw;
        out.no_timing |= base.no_timing;
        out
    }

    pub fn model(&self) -> Result<OdeModel> {
        if let Some(path) = &self.model_file {
            if !self.parameters.is_empty() {
                return Err(config_err("parameters", "only apply to built-in models"));
            }
            return OdeModel::load(path);
        }
        let name = self
            .model
            .as_deref()
            .ok_or_else(|| config_err("model", "a model or model file is required"))?;
        if self.parameters.is_empty() {
            return builtin(name);
        }
        let base = builtin(name)?;
        let known: Vec<&str> = base.parameters.keys().map(String::as_str).collect();
        for k in self.parameters.keys() {
            if !known.contains(&k.as_str()) {
                return Err(config_err(
                    "parameters",
                    format!(
                        "model {} has no parameter `{k}` (known: {})",
                        base.id,
                        known.join(", ")
                    ),
                ));
            }
        }
        let p = |k: &str| {
            self.parameters
                .get(k)
                .copied()
                .unwrap_or(base.parameters[k])
        };
        match base.id.as_str() {
            "lorenz" => Ok(lorenz(p("sigma"), p("r"), p("beta"))),
            "nine-mode" => Ok(nine_mode(p("alpha"), p("beta"), p("gamma"), p("re"))),
            _ => Err(config_err(
                "parameters",
                format!("model {} is not parameterized", base.id),
            )),
        }
    }

    /// The single quantity of a bound or sweep.
    pub fn quantity(&self, model: &OdeModel) -> Result<Quantity> {
        match self.quantities.as_slice() {
            [q] => resolve_quantity(model, q),
            [] => Err(config_err("quantities", "a quantity is required")),
            _ => Err(config_err(
                "quantities",
                "this command takes exactly one quantity",
            )),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction.unwrap_or(Direction::Upper)
    }

    pub fn degrees(&self) -> Result<Vec<u32>> {
        if self.degrees.is_empty() {
            return Err(config_err("degrees", "at least one degree is required"));
        }
        if let Some(d) = self.degrees.iter().find(|d| **d == 0 || **d % 2 == 1) {
            return Err(config_err(
                "degrees",
                format!("degrees must be even and positive, got {d}"),
            ));
        }
        Ok(self.degrees.clone())
    }

    pub fn solver(&self) -> SolverSettings {
        self.solver.clone().unwrap_or_default()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Explicit `x0`, else the selected equilibrium.
    pub fn base_state(&self, model: &OdeModel) -> Result<Vec<f64>> {
        if let Some(x) = &self.x0 {
            if x.len() != model.dim() {
                return Err(config_err(
                    "x0",
                    format!("expected {} components, got {}", model.dim(), x.len()),
                ));
            }
            return Ok(x.clone());
        }
        let k = self.equilibrium.unwrap_or(0);
        model.equilibria.get(k).cloned().ok_or_else(|| {
            config_err(
                "equilibrium",
                format!(
                    "model {} has {} known equilibria",
                    model.id,
                    model.equilibria.len()
                ),
            )
        })
    }

    pub fn lambda_values(&self) -> Result<Vec<f64>> {
        let spec = self
            .lambda_grid
            .as_deref()
            .ok_or_else(|| config_err("lambda-grid", "a lambda grid is required"))?;
        parse_grid(spec)
    }
}

/// A registered quantity, or an ad hoc polynomial in `x1..xn`.
pub fn resolve_quantity(model: &OdeModel, q: &str) -> Result<Quantity> {
    if let Ok(found) = model.quantity(q) {
        return Ok(found.clone());
    }
    let phi = parse_poly(q, model.dim()).map_err(|e| {
        config_err(
            "quantities",
            format!(
                "`{q}` is neither a quantity of {} nor a polynomial ({e})",
                model.id
            ),
        )
    })?;
    Ok(Quantity {
        name: q.to_string(),
        phi,
        normalization: None,
    })
}

/// `lo:hi:n` gives `n` evenly spaced values including both ends; otherwise a
/// comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: String| config_err("lambda-grid", m);
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("`{s}`: {e}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().map_err(|e| bad(format!("`{n}`: {e}")))?;
            if n == 0 || (n == 1 && lo != hi) || hi < lo {
                return Err(bad(format!("need lo <= hi and n >= 2, got `{spec}`")));
            }
            if n == 1 {
                vec![lo]
            } else {
                (0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                    .collect()
            }
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad(format!("expected lo:hi:n or a list, got `{spec}`"))),
    };
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(bad("values must be positive".into()));
    }
    Ok(values)
}

/// Comma-separated numbers.
pub fn parse_list<T: std::str::FromStr>(field: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| config_err(field, format!("`{}`: {e}", p.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.5,4").unwrap(), vec![0.5, 4.0]);
        assert!(parse_grid("2:1:3").is_err());
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig {
            model: Some("lorenz".into()),
            degrees: vec![2],
            seed: Some(1),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            degrees: vec![4],
            ..Default::default()
        };
        let c = flags.or(file);
        assert_eq!(c.degrees, vec![4]);
        assert_eq!(c.model.as_deref(), Some("lorenz"));
        assert_eq!(c.seed, Some(1));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = toml::from_str::<ExperimentConfig>("modle = \"lorenz\"").unwrap_err();
        assert!(e.to_string().contains("modle"));
    }

    #[test]
    fn parameter_overrides() {
        let c = ExperimentConfig {
            model: Some("lorenz".into()),
            parameters: BTreeMap::from([("r".into(), 10.0)]),
            ..Default::default()
        };
        assert_eq!(c.model().unwrap().parameters["r"], 10.0);
        let bad = ExperimentConfig {
            parameters: BTreeMap::from([("rho".into(), 10.0)]),
            ..c
        };
        assert!(bad.model().is_err());
    }

    #[test]
    fn ad_hoc_quantity() {
        let m = builtin("two-cycle").unwrap();
        assert_eq!(resolve_quantity(&m, "x2").unwrap().name, "x2");
        let q = resolve_quantity(&m, "x1^2 + x2").unwrap();
        assert_eq!(q.normalization, None);
        assert!(resolve_quantity(&m, "x1 +").is_err());
    }
}
