use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::certificate::{BoundCertificate, GramSummary, MultiplierPair, SolverStats};
use crate::error::{Error, Result};
use crate::models::{OdeModel, Quantity};
use crate::poly::{format_poly, monomial_basis, Monomial};
use crate::sdp::{self, SolveStatus, SolverSettings};
use crate::soscomp::{
    compile, recover, top_degree_restriction, AffinePolynomial, SosProgram, TopDegree, VarId,
};
use crate::symmetry::{invariant_basis, SymmetryGroup};
use crate::Poly;

/// Which extreme is bounded. Lower bounds are upper bounds on `-Phi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Upper => 1.0,
            Direction::Lower => -1.0,
        }
    }
}

/// Region `{g_j >= 0 for all j}` for the regional formulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// In original coordinates.
    pub g: Vec<Poly>,
    /// Degree of each SOS multiplier; defaults to the degree of `V`.
    pub multiplier_degree: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct BoundProblem {
    pub model: OdeModel,
    pub quantity: Quantity,
    pub direction: Direction,
    /// Degree of `V`.
    pub degree: u32,
    pub region: Option<Region>,
    /// Impose the model symmetry on `V` when `f`, `Phi` and `g` allow it.
    pub symmetrize: bool,
    /// Restrict the top-degree part of `V` in global problems.
    pub top_degree: bool,
    pub settings: SolverSettings,
}

impl BoundProblem {
    pub fn new(model: OdeModel, quantity: Quantity, direction: Direction, degree: u32) -> Self {
        BoundProblem {
            model,
            quantity,
            direction,
            degree,
            region: None,
            symmetrize: true,
            top_degree: true,
            settings: SolverSettings::default(),
        }
    }

    /// Looks up a registered quantity of a model.
    pub fn named(
        model: OdeModel,
        quantity: &str,
        direction: Direction,
        degree: u32,
    ) -> Result<Self> {
        let q = model.quantity(quantity)?.clone();
        Ok(BoundProblem::new(model, q, direction, degree))
    }

    /// Switches to the regional formulation on the model's default region.
    pub fn with_default_region(mut self) -> Result<Self> {
        let g = self.model.region.clone().ok_or_else(|| {
            Error::InvalidBoundProblem(format!("model {} has no default region", self.model.id))
        })?;
        self.region = Some(Region {
            g: vec![g],
            multiplier_degree: None,
        });
        Ok(self)
    }

    pub fn is_regional(&self) -> bool {
        self.region.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.dim();
        if self.degree == 0 || self.degree % 2 == 1 {
            return Err(Error::InvalidBoundProblem(format!(
                "degree of V must be even and positive, got {}",
                self.degree
            )));
        }
        if self.quantity.phi.nvars() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.quantity.phi.nvars(),
            });
        }
        if let Some(r) = &self.region {
            if r.g.is_empty() {
                return Err(Error::InvalidBoundProblem(
                    "region needs at least one polynomial".into(),
                ));
            }
            if let Some(k) = r.multiplier_degree {
                if k % 2 == 1 {
                    return Err(Error::InvalidBoundProblem(format!(
                        "multiplier degree must be even, got {k}"
                    )));
                }
            }
            for g in &r.g {
                if g.nvars() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: g.nvars(),
                    });
                }
            }
        }
        if let Some(k) = self.quantity.normalization {
            if !(k > 0.0) {
                return Err(Error::InvalidBoundProblem(
                    "normalization must be positive".into(),
                ));
            }
        }
        self.settings.validate()
    }

    /// Reporting divisor: the quantity's normalization, or 1.
    pub fn report_scale(&self) -> f64 {
        self.quantity.normalization.unwrap_or(1.0)
    }

    /// Maps a raw bound on `sign * Phi` to reporting units.
    pub fn report(&self, raw: f64) -> f64 {
        self.direction.sign() * raw / self.report_scale()
    }
}

/// The parts of a bound problem that do not depend on `lambda`.
pub(crate) struct Prepared {
    pub nvars: usize,
    pub kappa: f64,
    pub phi: Poly,
    pub g: Vec<Poly>,
    pub group: Option<SymmetryGroup>,
    /// `V` as `(poly, f~ . grad poly)` pairs, one decision variable each.
    pub v_parts: Vec<(Poly, Poly)>,
    pub s_basis: Vec<Monomial>,
}

pub(crate) fn prepare(p: &BoundProblem) -> Result<Prepared> {
    p.validate()?;
    let model = &p.model;
    let n = model.dim();
    let f = model.rescaled_field()?;
    let phi_t = p
        .quantity
        .phi
        .rescale_vars(&model.scale)?
        .scale(&p.direction.sign());
    let kappa = match p.quantity.normalization {
        Some(k) => k,
        None => phi_t.max_abs_coeff(),
    };
    if !(kappa > 0.0) {
        return Err(Error::InvalidBoundProblem(format!(
            "quantity {} is zero",
            p.quantity.name
        )));
    }
    let phi = phi_t.scale(&(1.0 / kappa));
    let g: Vec<Poly> = match &p.region {
        Some(r) => {
            r.g.iter()
                .map(|g| g.rescale_vars(&model.scale))
                .collect::<Result<_>>()?
        }
        None => Vec::new(),
    };

    let sym = &model.symmetry;
    let use_group = p.symmetrize
        && !sym.is_trivial()
        && sym.is_sign_group()
        && sym.is_equivariant(&f)
        && sym.is_invariant(&phi)
        && g.iter().all(|gi| sym.is_invariant(gi));
    let group = use_group.then(|| sym.clone());
    let basis = |d: u32| -> Result<Vec<Monomial>> {
        match &group {
            Some(gr) => invariant_basis(n, d, gr),
            None => Ok(monomial_basis(n, d)),
        }
    };

    let d = p.degree;
    let mut v_polys: Vec<Poly> = Vec::new();
    let restrict = if p.is_regional() || !p.top_degree {
        TopDegree::Unrestricted
    } else {
        top_degree_restriction(model, d, group.as_ref())?
    };
    match restrict {
        TopDegree::Unrestricted => {
            v_polys.extend(basis(d)?.into_iter().map(|m| Poly::monomial(m, 1.0)));
        }
        TopDegree::Span(top) => {
            v_polys.extend(basis(d - 1)?.into_iter().map(|m| Poly::monomial(m, 1.0)));
            // Spans come from the original coordinates; rescaling keeps them
            // homogeneous and cancelling.
            for t in top {
                let t = t.rescale_vars(&model.scale)?;
                let c = t.max_abs_coeff();
                v_polys.push(t.scale(&(1.0 / c)));
            }
        }
    }
    let v_parts = v_polys
        .into_iter()
        .map(|v| {
            let l = v.lie_derivative(&f)?;
            Ok((v, l))
        })
        .collect::<Result<Vec<_>>>()?;
    let s_basis = match &p.region {
        Some(r) => basis(r.multiplier_degree.unwrap_or(d))?,
        None => Vec::new(),
    };
    Ok(Prepared {
        nvars: n,
        kappa,
        phi,
        g,
        group,
        v_parts,
        s_basis,
    })
}

/// Variable bookkeeping of an assembled program.
pub(crate) struct Assembled {
    pub program: SosProgram,
    pub c: VarId,
    pub v: AffinePolynomial,
    pub s: Vec<(AffinePolynomial, AffinePolynomial)>,
}

pub(crate) fn assemble(prep: &Prepared, lambda: f64) -> Result<Assembled> {
    let n = prep.nvars;
    let mut prog = SosProgram::new(n);
    let c = prog.add_var("C");
    let mut v = AffinePolynomial::zero(n);
    let mut lv = AffinePolynomial::zero(n);
    for (k, (p, l)) in prep.v_parts.iter().enumerate() {
        let id = prog.add_var(format!("V{k}"));
        v.add_term(id, p.clone())?;
        lv.add_term(id, l.clone())?;
    }
    let mut first = v.clone();
    first.add_constant(&prep.phi.scale(&-1.0))?;
    let mut second = AffinePolynomial::zero(n);
    second.add_term(c, Poly::one(n))?;
    second.add_scaled(&v, -1.0)?;
    second.add_scaled(&lv, -lambda)?;
    let mut s = Vec::new();
    for (j, g) in prep.g.iter().enumerate() {
        let s1 = prog.add_sos_poly(&format!("s1_{j}"), &prep.s_basis, prep.group.as_ref());
        let s2 = prog.add_sos_poly(&format!("s2_{j}"), &prep.s_basis, prep.group.as_ref());
        first.add_scaled(&s1.map(|p| p.multiply(g))?, -1.0)?;
        second.add_scaled(&s2.map(|p| p.multiply(g))?, -1.0)?;
        s.push((s1, s2));
    }
    match &prep.group {
        Some(gr) => {
            prog.add_sos_symmetric("V - Phi", first, gr);
            prog.add_sos_symmetric("C - V - lambda f.grad V", second, gr);
        }
        None => {
            prog.add_sos("V - Phi", first);
            prog.add_sos("C - V - lambda f.grad V", second);
        }
    }
    prog.minimize(vec![(c, 1.0)]);
    Ok(Assembled {
        program: prog,
        c,
        v,
        s,
    })
}

/// Outcome of one fixed-`lambda` solve.
#[derive(Clone, Debug)]
pub struct InnerSolve {
    pub lambda: f64,
    pub status: SolveStatus,
    /// Raw bound on `sign * Phi` when a certificate was found.
    pub bound: Option<f64>,
    /// The same in reporting units.
    pub reported: Option<f64>,
    pub certificate: Option<BoundCertificate>,
    pub iterations: usize,
    pub solve_ms: f64,
}

/// Minimizes `C` at fixed `lambda`. Unusable solver statuses come back as an
/// [`InnerSolve`] without a certificate rather than as an error.
pub fn solve_at(problem: &BoundProblem, lambda: f64) -> Result<InnerSolve> {
    let prep = prepare(problem)?;
    solve_prepared(problem, &prep, lambda)
}

pub(crate) fn solve_prepared(
    problem: &BoundProblem,
    prep: &Prepared,
    lambda: f64,
) -> Result<InnerSolve> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidBoundProblem(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let asm = assemble(prep, lambda)?;
    let compiled = compile(&asm.program)?;
    let start = Instant::now();
    let sol = sdp::solve(&compiled.problem, &problem.settings)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut out = InnerSolve {
        lambda,
        status: sol.status,
        bound: None,
        reported: None,
        certificate: None,
        iterations: sol.iterations,
        solve_ms,
    };
    if !sol.status.is_usable() {
        return Ok(out);
    }
    let rec = recover(&asm.program, &compiled.layout, &sol)?;
    let c_solve = rec.values[asm.c];
    let bound = prep.kappa * c_solve;
    let v = asm.v.evaluate(&rec.values)?;
    let multipliers = asm
        .s
        .iter()
        .map(|(s1, s2)| {
            Ok(MultiplierPair {
                s1: format_poly(&s1.evaluate(&rec.values)?),
                s2: format_poly(&s2.evaluate(&rec.values)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gram = rec
        .sos
        .iter()
        .map(|s| GramSummary {
            constraint: s.name.clone(),
            block_sizes: s.gram.iter().map(|g| g.basis.len()).collect(),
            min_eigenvalue: if s.gram.is_empty() {
                0.0
            } else {
                s.min_eigenvalue()
            },
            reconstruction_error: s.reconstruction_error,
        })
        .collect();
    let cert = BoundCertificate {
        model: problem.model.to_config(),
        quantity: problem.quantity.name.clone(),
        phi: format_poly(&problem.quantity.phi),
        direction: problem.direction,
        degree: problem.degree,
        lambda,
        bound,
        reported: problem.report(bound),
        normalization: problem.quantity.normalization,
        kappa: prep.kappa,
        symmetric: prep.group.is_some(),
        v: BoundCertificate::encode(&v),
        c_solve,
        region: problem
            .region
            .as_ref()
            .map(|r| r.g.iter().map(format_poly).collect())
            .unwrap_or_default(),
        multipliers,
        gram,
        solver: SolverStats {
            status: sol.status,
            iterations: sol.iterations,
            primal_infeasibility: sol.residuals.primal_infeasibility,
            dual_infeasibility: sol.residuals.dual_infeasibility,
            relative_gap: sol.residuals.relative_gap,
            solve_ms,
        },
    };
    out.bound = Some(bound);
    out.reported = Some(cert.reported);
    out.certificate = Some(cert);
    Ok(out)
}

/// The semidefinite program solved at fixed `lambda`, for inspection or
/// export.
pub fn sdp_at(problem: &BoundProblem, lambda: f64) -> Result<sdp::SdpProblem> {
    let prep = prepare(problem)?;
    Ok(compile(&assemble(&prep, lambda)?.program)?.problem)
}

/// Certificate at fixed `lambda`, or [`Error::NoCertificate`].
pub fn inner_bound(problem: &BoundProblem, lambda: f64) -> Result<BoundCertificate> {
    let r = solve_at(problem, lambda)?;
    r.certificate.ok_or_else(|| {
        Error::NoCertificate(format!(
            "no degree-{} certificate at lambda = {lambda} ({})",
            problem.degree, r.status
        ))
    })
}

/// Raw bound on `sign * Phi` over the region itself, `max_X Phi`, certified
/// by `C - Phi - sum_j g_j s_j` SOS. Any set inside the region obeys it.
pub fn trivial_regional_bound(problem: &BoundProblem) -> Result<Option<f64>> {
    if problem.region.is_none() {
        return Ok(None);
    }
    let prep = prepare(problem)?;
    let n = prep.nvars;
    let dphi = prep.phi.degree().unwrap_or(0);
    let dg = prep.g.iter().filter_map(|g| g.degree()).max().unwrap_or(0);
    let ds = dphi.max(dg).div_ceil(2) * 2;
    let s_basis = match &prep.group {
        Some(gr) => invariant_basis(n, ds, gr)?,
        None => monomial_basis(n, ds),
    };
    let mut prog = SosProgram::new(n);
    let c = prog.add_var("C");
    let mut e = AffinePolynomial::from_constant(prep.phi.scale(&-1.0));
    e.add_term(c, Poly::one(n))?;
    for (j, g) in prep.g.iter().enumerate() {
        let s = prog.add_sos_poly(&format!("s_{j}"), &s_basis, prep.group.as_ref());
        e.add_scaled(&s.map(|p| p.multiply(g))?, -1.0)?;
    }
    match &prep.group {
        Some(gr) => prog.add_sos_symmetric("C - Phi", e, gr),
        None => prog.add_sos("C - Phi", e),
    }
    prog.minimize(vec![(c, 1.0)]);
    let compiled = compile(&prog)?;
    let sol = sdp::solve(&compiled.problem, &problem.settings)?;
    if !sol.status.is_usable() {
        return Ok(None);
    }
    let values = compiled.layout.decision_values(&sol.free);
    Ok(Some(prep.kappa * values[c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lorenz_standard, two_cycle};

    #[test]
    fn lorenz_quadratic_layout() {
        let p = BoundProblem::named(lorenz_standard(), "x", Direction::Upper, 2).unwrap();
        let prep = prepare(&p).unwrap();
        assert!(prep.group.is_none());
        // Degree <= 1 monomials plus the two top-degree forms.
        assert_eq!(prep.v_parts.len(), 4 + 2);
        let asm = assemble(&prep, 0.5).unwrap();
        let c = compile(&asm.program).unwrap();
        assert_eq!(c.layout.n_gram_blocks(), 2);
        let z = BoundProblem::named(lorenz_standard(), "z", Direction::Upper, 2).unwrap();
        let prep = prepare(&z).unwrap();
        assert!(prep.group.is_some());
        // Invariant monomials of degree <= 1 are {1, z}.
        assert_eq!(prep.v_parts.len(), 2 + 2);
    }

    #[test]
    fn regional_program_has_four_sos_constraints() {
        let p = BoundProblem::named(two_cycle(), "xy", Direction::Upper, 4)
            .unwrap()
            .with_default_region()
            .unwrap();
        let prep = prepare(&p).unwrap();
        let asm = assemble(&prep, 3.84).unwrap();
        assert_eq!(asm.program.constraints.len(), 4);
        let mut q = p.clone();
        q.symmetrize = false;
        let prep = prepare(&q).unwrap();
        let c = compile(&assemble(&prep, 3.84).unwrap().program).unwrap();
        assert_eq!(c.layout.n_gram_blocks(), 4);
    }
}
