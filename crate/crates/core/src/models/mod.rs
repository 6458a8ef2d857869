//! Polynomial ODE models with their symmetries, scalings, equilibria,
//! registered quantities and top-degree ansatz factors.

mod lorenz;
mod nine_mode;
mod two_cycle;

pub use lorenz::{lorenz, lorenz_monomial, lorenz_standard};
pub use nine_mode::{nine_mode, nine_mode_dissipation_coefficients, nine_mode_standard};
pub use two_cycle::two_cycle;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::defaults::{EQUILIBRIUM_TOL, GROUP_CAP, LAMBDA_MAX_GLOBAL};
use crate::error::{Error, Result};
use crate::poly::{format_poly, parse_poly};
use crate::symmetry::{close_group, SignedPermutation, SymmetryGroup};
use crate::Poly;

/// A named quantity `Phi` to bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantity {
    pub name: String,
    pub phi: Poly,
    /// Reported bounds are divided by this.
    pub normalization: Option<f64>,
}

/// `dx/dt = f(x)` with polynomial `f`.
#[derive(Clone, Debug)]
pub struct OdeModel {
    pub id: String,
    pub var_names: Vec<String>,
    pub f: Vec<Poly>,
    pub parameters: BTreeMap<String, f64>,
    pub generators: Vec<SignedPermutation>,
    pub symmetry: SymmetryGroup,
    /// Solves run in coordinates `x = scale * x~`.
    pub scale: Vec<f64>,
    pub equilibria: Vec<Vec<f64>>,
    /// Homogeneous polynomials whose products span the admissible
    /// highest-degree part of `V` in global problems.
    pub ansatz: Option<Vec<Poly>>,
    pub quantities: Vec<Quantity>,
    /// Default region `g >= 0` for regional problems.
    pub region: Option<Poly>,
    /// Upper end of the golden-section bracket for lambda.
    pub lambda_max: f64,
    /// Extra lambda values always tried in searches.
    pub special_lambdas: Vec<f64>,
}

impl OdeModel {
    pub fn dim(&self) -> usize {
        self.var_names.len()
    }

    /// Largest degree among the components of `f`.
    pub fn degree(&self) -> u32 {
        self.f.iter().filter_map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn quantity(&self, name: &str) -> Result<&Quantity> {
        self.quantities
            .iter()
            .find(|q| q.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "quantity",
                name: name.to_string(),
            })
    }

    /// `f(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.f.iter().map(|p| p.evaluate(x)).collect()
    }

    /// Euclidean norm of `f(x)`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Jacobian of `f` as polynomials, `jac[i][j] = d f_i / d x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Poly>> {
        self.f.iter().map(|p| p.gradient()).collect()
    }

    /// The vector field in solve coordinates: `f~(x~) = f(s x~) / s`.
    pub fn rescaled_field(&self) -> Result<Vec<Poly>> {
        self.f
            .iter()
            .zip(&self.scale)
            .map(|(p, s)| Ok(p.rescale_vars(&self.scale)?.scale(&(1.0 / s))))
            .collect()
    }

    /// Checks the construction invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.f.len() != n || self.scale.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if self.f.len() != n {
                    self.f.len()
                } else {
                    self.scale.len()
                },
            });
        }
        for p in self.f.iter().chain(self.quantities.iter().map(|q| &q.phi)) {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.nvars(),
                });
            }
        }
        if let Some(k) = self.scale.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::NonPositiveScale { index: k });
        }
        if self.symmetry.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.symmetry.dim(),
            });
        }
        for x in &self.equilibria {
            let r = self.residual(x)?;
            if !(r <= EQUILIBRIUM_TOL) {
                return Err(Error::NotEquilibrium { residual: r });
            }
        }
        Ok(())
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            id: self.id.clone(),
            variables: self.var_names.clone(),
            f: self.f.iter().map(format_poly).collect(),
            parameters: self.parameters.clone(),
            generators: self.generators.iter().map(format_generator).collect(),
            scale: Some(self.scale.clone()),
            equilibria: self.equilibria.clone(),
            ansatz: self
                .ansatz
                .as_ref()
                .map(|a| a.iter().map(format_poly).collect()),
            region: self.region.as_ref().map(format_poly),
            lambda_max: Some(self.lambda_max),
            special_lambdas: self.special_lambdas.clone(),
            quantities: self
                .quantities
                .iter()
                .map(|q| QuantityConfig {
                    name: q.name.clone(),
                    phi: format_poly(&q.phi),
                    normalization: q.normalization,
                })
                .collect(),
        }
    }

    pub fn from_config(c: &ModelConfig) -> Result<OdeModel> {
        let n = c.variables.len();
        if n == 0 {
            return Err(cfg("variables", "at least one variable is required"));
        }
        if c.f.len() != n {
            return Err(cfg(
                "f",
                &format!("expected {n} components, found {}", c.f.len()),
            ));
        }
        let parse = |field: &str, s: &str| parse_poly(s, n).map_err(|e| cfg(field, &e.to_string()));
        let f =
            c.f.iter()
                .map(|s| parse("f", s))
                .collect::<Result<Vec<_>>>()?;
        let generators = c
            .generators
            .iter()
            .map(|s| SignedPermutation::parse(s).map_err(|e| cfg("generators", &e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let symmetry = close_group(n, &generators, GROUP_CAP)?;
        let ansatz = match &c.ansatz {
            None => None,
            Some(a) => Some(
                a.iter()
                    .map(|s| parse("ansatz", s))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        if let Some(a) = &ansatz {
            for p in a {
                let homogeneous = p.degree().is_some_and(|d| d > 0 && p.is_homogeneous(d));
                if !homogeneous {
                    return Err(cfg(
                        "ansatz",
                        "factors must be nonconstant homogeneous polynomials",
                    ));
                }
            }
        }
        let quantities = c
            .quantities
            .iter()
            .map(|q| {
                Ok(Quantity {
                    name: q.name.clone(),
                    phi: parse("quantities.phi", &q.phi)?,
                    normalization: q.normalization,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = OdeModel {
            id: c.id.clone(),
            var_names: c.variables.clone(),
            f,
            parameters: c.parameters.clone(),
            generators,
            symmetry,
            scale: c.scale.clone().unwrap_or_else(|| vec![1.0; n]),
            equilibria: c.equilibria.clone(),
            ansatz,
            quantities,
            region: c
                .region
                .as_deref()
                .map(|s| parse("region", s))
                .transpose()?,
            lambda_max: c.lambda_max.unwrap_or(LAMBDA_MAX_GLOBAL),
            special_lambdas: c.special_lambdas.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_config()).map_err(|e| cfg("model", &e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<OdeModel> {
        let c: ModelConfig = toml::from_str(text).map_err(|e| cfg("model", &e.to_string()))?;
        OdeModel::from_config(&c)
    }

    pub fn load(path: &Path) -> Result<OdeModel> {
        OdeModel::from_toml(&std::fs::read_to_string(path)?)
    }
}

fn cfg(field: &str, msg: &str) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.to_string(),
    }
}

fn format_generator(g: &SignedPermutation) -> String {
    let parts: Vec<String> = g.to_one_line().iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(","))
}

/// Serializable form of [`OdeModel`]. Polynomials use the text format with
/// variables `x1..xn`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub variables: Vec<String>,
    pub f: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Signed permutations in one-line form, e.g. `[-1,-2,3]`.
    #[serde(default)]
    pub generators: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<f64>>,
    #[serde(default)]
    pub equilibria: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub special_lambdas: Vec<f64>,
    #[serde(default)]
    pub quantities: Vec<QuantityConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityConfig {
    pub name: String,
    pub phi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
}

/// Names of the built-in models.
pub const BUILTIN: [&str; 3] = ["lorenz", "nine-mode", "two-cycle"];

/// A built-in model at its standard parameters.
pub fn builtin(name: &str) -> Result<OdeModel> {
    match name {
        "lorenz" => Ok(lorenz_standard()),
        "nine-mode" | "nine_mode" | "ninemode" => Ok(nine_mode_standard()),
        "two-cycle" | "two_cycle" | "twocycle" => Ok(two_cycle()),
        _ => Err(Error::Unknown {
            kind: "model",
            name: name.to_string(),
        }),
    }
}

/// Lower-case compact name of a monomial over named variables, e.g. `x2y`.
pub(crate) fn monomial_name(names: &[&str], exps: &[u16]) -> String {
    let mut s = String::new();
    for (v, &e) in names.iter().zip(exps) {
        match e {
            0 => {}
            1 => s.push_str(v),
            _ => s.push_str(&format!("{v}{e}")),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        for name in BUILTIN {
            let m = builtin(name).unwrap();
            m.validate().unwrap();
            let text = m.to_toml().unwrap();
            let back = OdeModel::from_toml(&text).unwrap();
            assert_eq!(back.f, m.f, "{name}");
            assert_eq!(back.quantities, m.quantities);
            assert_eq!(back.symmetry.order(), m.symmetry.order());
            assert_eq!(back.scale, m.scale);
            assert_eq!(back.region, m.region);
            assert_eq!(back.ansatz, m.ansatz);
        }
        assert!(builtin("duffing").is_err());
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = "id = \"m\"\nvariables = [\"x\"]\nf = [\"x1 +* 2\"]\n";
        match OdeModel::from_toml(bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "f"),
            other => panic!("{other:?}"),
        }
        let wrong_eq = "id = \"m\"\nvariables = [\"x\"]\nf = [\"-1 * x1\"]\nequilibria = [[1.0]]\n";
        assert!(matches!(
            OdeModel::from_toml(wrong_eq),
            Err(Error::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn rescaled_field_conjugates_the_flow() {
        let m = two_cycle();
        let g = m.rescaled_field().unwrap();
        let xt = [0.3, -0.2];
        let x: Vec<f64> = xt.iter().zip(&m.scale).map(|(a, s)| a * s).collect();
        let fx = m.eval(&x).unwrap();
        for i in 0..2 {
            let lhs = g[i].evaluate(&xt).unwrap() * m.scale[i];
            assert!((lhs - fx[i]).abs() < 1e-12);
        }
    }
}
