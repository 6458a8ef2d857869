use serde::{Deserialize, Serialize};

use super::Direction;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, OdeModel};
use crate::poly::{format_poly, parse_poly};
use crate::sdp::SolveStatus;
use crate::Poly;

/// Gram matrix diagnostics for one SOS constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    pub constraint: String,
    pub block_sizes: Vec<usize>,
    pub min_eigenvalue: f64,
    pub reconstruction_error: f64,
}

/// SOS multipliers of one region polynomial, in solve coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPair {
    pub s1: String,
    pub s2: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub solve_ms: f64,
}

/// A self-contained proof object for `Phi <= bound` (upper) or
/// `Phi >= -bound` (lower) on the attractor.
///
/// `V`, the multipliers and `c_solve` live in solve coordinates
/// `x = scale * x~` and in units of `Phi / kappa`, so that with
/// `P = sign * Phi(scale * x~) / kappa` and `f~` the rescaled field,
///
/// ```text
/// V - P - sum_j g_j s1_j                          is SOS
/// c_solve - V - lambda f~ . grad V - sum_j g_j s2_j   is SOS
/// s1_j, s2_j                                      are SOS
/// ```
///
/// and `bound = kappa * c_solve`. Polynomials use the text format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub model: ModelConfig,
    pub quantity: String,
    /// `Phi` in original coordinates, without the direction sign.
    pub phi: String,
    pub direction: Direction,
    pub degree: u32,
    pub lambda: f64,
    /// Bound on `sign * Phi` in original units.
    pub bound: f64,
    /// Bound in reporting units: normalized, with the sign restored.
    pub reported: f64,
    pub normalization: Option<f64>,
    pub kappa: f64,
    pub symmetric: bool,
    pub v: String,
    pub c_solve: f64,
    /// Region polynomials `g_j` in original coordinates.
    pub region: Vec<String>,
    pub multipliers: Vec<MultiplierPair>,
    pub gram: Vec<GramSummary>,
    pub solver: SolverStats,
}

impl BoundCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<BoundCertificate> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn ode_model(&self) -> Result<OdeModel> {
        OdeModel::from_config(&self.model)
    }

    pub fn nvars(&self) -> usize {
        self.model.variables.len()
    }

    fn parse(&self, s: &str) -> Result<Poly> {
        parse_poly(s, self.nvars())
    }

    pub fn scale(&self) -> Vec<f64> {
        self.model
            .scale
            .clone()
            .unwrap_or_else(|| vec![1.0; self.nvars()])
    }

    pub fn sign(&self) -> f64 {
        match self.direction {
            Direction::Upper => 1.0,
            Direction::Lower => -1.0,
        }
    }

    /// `P = sign * Phi(scale * x~) / kappa`.
    pub fn phi_solve(&self) -> Result<Poly> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidBoundProblem(
                "certificate kappa must be positive".into(),
            ));
        }
        Ok(self
            .parse(&self.phi)?
            .rescale_vars(&self.scale())?
            .scale(&(self.sign() / self.kappa)))
    }

    pub fn v_solve(&self) -> Result<Poly> {
        self.parse(&self.v)
    }

    pub fn region_solve(&self) -> Result<Vec<Poly>> {
        let s = self.scale();
        self.region
            .iter()
            .map(|g| self.parse(g)?.rescale_vars(&s))
            .collect()
    }

    pub fn multipliers_solve(&self) -> Result<Vec<(Poly, Poly)>> {
        self.multipliers
            .iter()
            .map(|m| Ok((self.parse(&m.s1)?, self.parse(&m.s2)?)))
            .collect()
    }

    /// The two constrained expressions and the multipliers, in solve
    /// coordinates: `(V - P - sum g s1, c - V - lambda f~.grad V - sum g s2, [s..])`.
    pub fn constraint_polynomials(&self) -> Result<(Poly, Poly, Vec<Poly>)> {
        let model = self.ode_model()?;
        let f = model.rescaled_field()?;
        let v = self.v_solve()?;
        let mut first = v.checked_sub(&self.phi_solve()?)?;
        let mut second = Poly::constant(self.nvars(), self.c_solve)
            .checked_sub(&v)?
            .checked_sub(&v.lie_derivative(&f)?.scale(&self.lambda))?;
        let mut mults = Vec::new();
        for (g, (s1, s2)) in self.region_solve()?.iter().zip(self.multipliers_solve()?) {
            first = first.checked_sub(&g.multiply(&s1)?)?;
            second = second.checked_sub(&g.multiply(&s2)?)?;
            mults.push(s1);
            mults.push(s2);
        }
        Ok((first, second, mults))
    }

    /// Copies `V` and multipliers with coefficients in the text format.
    pub(crate) fn encode(p: &Poly) -> String {
        format_poly(p)
    }
}
