//! Sum-of-squares programs with affinely parameterized polynomial
//! constraints, and their compilation to standard-form SDPs.
//!
//! A program has scalar decision variables `c_k`, constraints
//! `p_0(x) + sum_k c_k p_k(x)` is SOS, linear equalities and inequalities on
//! the `c_k`, and a linear objective to minimize. [`compile`] turns it into
//! an [`SdpProblem`](crate::sdp::SdpProblem) by matching coefficients of
//! `b(x)^T Q b(x)` against the constraint expression, and [`recover`] maps an
//! SDP solution back to decision values, Gram matrices and residuals.

mod compile;
mod recover;
mod topdeg;

pub use compile::{compile, CompiledSos, ConstraintLayout, GramBlock, Layout};
pub use recover::{recover, GramMatrix, Recovered, RecoveredSos};
pub use topdeg::{top_degree_restriction, top_degree_span, TopDegree};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::poly::{monomial_basis, Monomial};
use crate::symmetry::{sign_blocks, SymmetryGroup};
use crate::Poly;

/// Index of a scalar decision variable.
pub type VarId = usize;

/// `p_0(x) + sum_k c_k p_k(x)` with scalar unknowns `c_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePolynomial {
    pub constant: Poly,
    pub terms: Vec<(VarId, Poly)>,
}

impl AffinePolynomial {
    pub fn zero(nvars: usize) -> Self {
        AffinePolynomial {
            constant: Poly::zero(nvars),
            terms: Vec::new(),
        }
    }

    pub fn from_constant(p: Poly) -> Self {
        AffinePolynomial {
            constant: p,
            terms: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.constant.nvars()
    }

    pub fn add_constant(&mut self, p: &Poly) -> Result<()> {
        self.constant = self.constant.checked_add(p)?;
        Ok(())
    }

    /// Adds `c_var * p`. Zero polynomials are skipped.
    pub fn add_term(&mut self, var: VarId, p: Poly) -> Result<()> {
        if p.nvars() != self.nvars() {
            return Err(Error::DimensionMismatch {
                expected: self.nvars(),
                found: p.nvars(),
            });
        }
        if !p.is_zero() {
            self.terms.push((var, p));
        }
        Ok(())
    }

    /// `self + k * other`.
    pub fn add_scaled(&mut self, other: &AffinePolynomial, k: f64) -> Result<()> {
        self.add_constant(&other.constant.scale(&k))?;
        for (v, p) in &other.terms {
            self.add_term(*v, p.scale(&k))?;
        }
        Ok(())
    }

    /// Applies a linear map to every part, e.g. `p -> f . grad p`.
    pub fn map(&self, mut f: impl FnMut(&Poly) -> Result<Poly>) -> Result<AffinePolynomial> {
        let mut out = AffinePolynomial::from_constant(f(&self.constant)?);
        for (v, p) in &self.terms {
            out.add_term(*v, f(p)?)?;
        }
        Ok(out)
    }

    /// Highest degree over all parts; `None` when every part is zero.
    pub fn degree(&self) -> Option<u32> {
        std::iter::once(&self.constant)
            .chain(self.terms.iter().map(|(_, p)| p))
            .filter_map(|p| p.degree())
            .max()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.terms.iter().map(|(_, p)| p))
            .map(|p| p.max_abs_coeff())
            .fold(0.0, f64::max)
    }

    /// The polynomial obtained by fixing every decision variable.
    pub fn evaluate(&self, values: &[f64]) -> Result<Poly> {
        let mut out = self.constant.clone();
        for (v, p) in &self.terms {
            let c = *values.get(*v).ok_or(Error::DimensionMismatch {
                expected: *v + 1,
                found: values.len(),
            })?;
            if c != 0.0 {
                out = out.checked_add(&p.scale(&c))?;
            }
        }
        Ok(out)
    }

    pub fn is_invariant(&self, group: &SymmetryGroup) -> bool {
        group.is_invariant(&self.constant) && self.terms.iter().all(|(_, p)| group.is_invariant(p))
    }
}

/// `sum_k a_k c_k` compared with `rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub rhs: f64,
}

/// `expr` is a sum of squares.
#[derive(Clone, Debug)]
pub struct SosConstraint {
    pub name: String,
    pub expr: AffinePolynomial,
    /// Sign group used to split the Gram matrix into blocks; the expression
    /// must be invariant under it.
    pub group: Option<SymmetryGroup>,
    /// Gram basis override; defaults to all monomials up to half the degree.
    pub basis: Option<Vec<Monomial>>,
}

/// An SOS program in `nvars` state variables.
#[derive(Clone, Debug)]
pub struct SosProgram {
    nvars: usize,
    var_names: Vec<String>,
    pub constraints: Vec<SosConstraint>,
    pub equalities: Vec<LinearConstraint>,
    /// Constraints `sum a_k c_k >= rhs`.
    pub inequalities: Vec<LinearConstraint>,
    /// Minimized.
    pub objective: Vec<(VarId, f64)>,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            var_names: Vec::new(),
            constraints: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn n_decision(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v]
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    /// A polynomial `sum_m c_m m` with one fresh variable per monomial.
    pub fn add_poly_var(
        &mut self,
        prefix: &str,
        monomials: &[Monomial],
    ) -> (Vec<VarId>, AffinePolynomial) {
        let mut expr = AffinePolynomial::zero(self.nvars);
        let mut ids = Vec::with_capacity(monomials.len());
        for m in monomials {
            let id = self.add_var(format!("{prefix}[{m}]"));
            expr.terms.push((id, Poly::monomial(m.clone(), 1.0)));
            ids.push(id);
        }
        (ids, expr)
    }

    pub fn add_sos(&mut self, name: impl Into<String>, expr: AffinePolynomial) {
        self.constraints.push(SosConstraint {
            name: name.into(),
            expr,
            group: None,
            basis: None,
        });
    }

    /// Like [`add_sos`](Self::add_sos) but with the Gram matrix split into
    /// sign-character blocks of `group`.
    pub fn add_sos_symmetric(
        &mut self,
        name: impl Into<String>,
        expr: AffinePolynomial,
        group: &SymmetryGroup,
    ) {
        let group = (!group.is_trivial()).then(|| group.clone());
        self.constraints.push(SosConstraint {
            name: name.into(),
            expr,
            group,
            basis: None,
        });
    }

    /// Adds a fresh polynomial `s` on the given monomials with the
    /// constraint that `s` is SOS, and returns `s` as an affine expression.
    pub fn add_sos_poly(
        &mut self,
        name: &str,
        monomials: &[Monomial],
        group: Option<&SymmetryGroup>,
    ) -> AffinePolynomial {
        let (_, expr) = self.add_poly_var(name, monomials);
        match group {
            Some(g) => self.add_sos_symmetric(name, expr.clone(), g),
            None => self.add_sos(name, expr.clone()),
        }
        expr
    }

    pub fn add_equality(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) {
        self.equalities.push(LinearConstraint { coeffs, rhs });
    }

    pub fn add_inequality(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) {
        self.inequalities.push(LinearConstraint { coeffs, rhs });
    }

    pub fn minimize(&mut self, objective: Vec<(VarId, f64)>) {
        self.objective = objective;
    }
}

/// Gram matrix parameterization of `b(x)^T Q b(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramTemplate {
    pub basis: Vec<Monomial>,
    /// Partition of basis indices; `Q` is block diagonal across parts.
    pub blocks: Vec<Vec<usize>>,
    /// For each monomial, the Gram entries `(block, i, j)` with `i <= j`
    /// (local indices) whose products `b_i b_j` equal it.
    pub coefficient_map: BTreeMap<Monomial, Vec<(usize, usize, usize)>>,
}

impl GramTemplate {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Single-block Gram template on `basis`.
pub fn sos_template(basis: &[Monomial]) -> GramTemplate {
    template_from_blocks(basis, vec![(0..basis.len()).collect()])
}

/// Gram template on `basis` split into sign-character blocks of `group`.
pub fn sos_template_blocks(basis: &[Monomial], group: &SymmetryGroup) -> Result<GramTemplate> {
    Ok(template_from_blocks(basis, sign_blocks(basis, group)?))
}

fn template_from_blocks(basis: &[Monomial], blocks: Vec<Vec<usize>>) -> GramTemplate {
    let mut map: BTreeMap<Monomial, Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (b, members) in blocks.iter().enumerate() {
        for (i, &gi) in members.iter().enumerate() {
            for (j, &gj) in members.iter().enumerate().skip(i) {
                map.entry(basis[gi].mul(&basis[gj]))
                    .or_default()
                    .push((b, i, j));
            }
        }
    }
    GramTemplate {
        basis: basis.to_vec(),
        blocks,
        coefficient_map: map,
    }
}

/// Default Gram basis for a constraint of degree `deg`.
pub fn default_gram_basis(nvars: usize, deg: u32) -> Vec<Monomial> {
    monomial_basis(nvars, deg / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{close, invariant_basis, SignedPermutation};

    fn lorenz_group() -> SymmetryGroup {
        close(3, &[SignedPermutation::parse("[-1,-2,3]").unwrap()]).unwrap()
    }

    #[test]
    fn template_sizes() {
        let t = sos_template(&monomial_basis(2, 2));
        assert_eq!(t.block_sizes(), vec![6]);
        assert_eq!(t.coefficient_map.len(), 15);
        assert!(t.coefficient_map.keys().all(|m| m.degree() <= 4));
        let one = sos_template(&[Monomial::one(3)]);
        assert_eq!(one.block_sizes(), vec![1]);
        assert_eq!(one.coefficient_map.len(), 1);
    }

    #[test]
    fn lorenz_quadratic_basis_splits_by_character() {
        let g = lorenz_group();
        let full = sos_template_blocks(&monomial_basis(3, 2), &g).unwrap();
        let mut sizes = full.block_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![4, 6]);
        // Every product inside a block is invariant.
        for m in full.coefficient_map.keys() {
            assert!(g.elements().iter().all(|t| t.monomial_sign(m) == 1), "{m}");
        }
        // The invariant monomials all share the trivial character.
        let inv = invariant_basis(3, 2, &g).unwrap();
        assert_eq!(inv.len(), 6);
        assert_eq!(
            sos_template_blocks(&inv, &g).unwrap().block_sizes(),
            vec![6]
        );
    }

    #[test]
    fn affine_evaluation() {
        let x = Poly::var(1, 0);
        let mut a = AffinePolynomial::from_constant(Poly::constant(1, 2.0));
        a.add_term(0, x.clone()).unwrap();
        a.add_term(1, &x * &x).unwrap();
        let p = a.evaluate(&[3.0, -1.0]).unwrap();
        assert_eq!(p.evaluate(&[2.0]).unwrap(), 2.0 + 6.0 - 4.0);
        assert_eq!(a.degree(), Some(2));
    }
    fn solve(p: &SosProgram) -> Recovered {
        let c = compile(p).unwrap();
        let sol = crate::sdp::solve(&c.problem, &crate::sdp::SolverSettings::default()).unwrap();
        assert_eq!(sol.status, crate::sdp::SolveStatus::Optimal);
        recover(p, &c.layout, &sol).unwrap()
    }

    #[test]
    fn trivial_linear_program() {
        let mut p = SosProgram::new(1);
        let c = p.add_var("C");
        p.add_inequality(vec![(c, 1.0)], 5.0);
        p.minimize(vec![(c, 1.0)]);
        let compiled = compile(&p).unwrap();
        assert_eq!(compiled.layout.n_gram_blocks(), 0);
        assert_eq!(compiled.problem.block_sizes, vec![1]);
        let r = solve(&p);
        assert!((r.values[c] - 5.0).abs() < 1e-7);
        assert!(r.sos.is_empty());
    }

    #[test]
    fn univariate_minimum_via_sos() {
        // min of x^4 - 3x^2 + 1 is -5/4; univariate nonnegative = SOS.
        let q = crate::poly::parse_poly("x1^4 - 3*x1^2 + 1", 1).unwrap();
        let mut p = SosProgram::new(1);
        let u = p.add_var("u");
        let v = p.add_var("v");
        let mut e = AffinePolynomial::from_constant(q);
        e.add_term(u, Poly::constant(1, -1.0)).unwrap();
        e.add_term(v, Poly::constant(1, -1.0)).unwrap();
        p.add_sos("p - u - v", e);
        p.add_equality(vec![(u, 1.0), (v, -1.0)], 0.0);
        p.minimize(vec![(u, -1.0)]);
        let r = solve(&p);
        assert!((r.values[u] + 0.625).abs() < 1e-6, "{:?}", r.values);
        assert!((r.values[v] + 0.625).abs() < 1e-6);
        assert!(r.max_reconstruction_error() < 1e-7);
        assert!(r.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn support_errors() {
        let x3 = crate::poly::parse_poly("x1^3 + 1", 1).unwrap();
        let mut p = SosProgram::new(1);
        p.add_sos("odd", AffinePolynomial::from_constant(x3.clone()));
        assert!(matches!(
            compile(&p),
            Err(Error::OddDegree { degree: 3, .. })
        ));
        let mut p = SosProgram::new(1);
        p.constraints.push(SosConstraint {
            name: "narrow".into(),
            expr: AffinePolynomial::from_constant(crate::poly::parse_poly("x1^4 + 1", 1).unwrap()),
            group: None,
            basis: Some(vec![Monomial::one(1), Monomial::var(1, 0)]),
        });
        match compile(&p) {
            Err(Error::Inexpressible { monomial, .. }) => assert_eq!(monomial, "x1^4"),
            other => panic!("{other:?}"),
        }
    }
}
