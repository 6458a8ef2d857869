use std::collections::{BTreeMap, BTreeSet};

use super::{
    default_gram_basis, sos_template, sos_template_blocks, GramTemplate, LinearConstraint,
    SosConstraint, SosProgram, VarId,
};
use crate::defaults::COMPILE_NOISE_REL;
use crate::error::{Error, Result};
use crate::poly::Monomial;
use crate::sdp::{BlockEntry, SdpProblem, SdpRow};

/// Where each part of an [`SosProgram`] landed in the compiled SDP.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// Decision variable `k` equals `substitution[k].0 + sum_j w_j y_j` over
    /// the listed SDP free variables `y_j`.
    pub substitution: Vec<(f64, Vec<(usize, f64)>)>,
    pub constraints: Vec<ConstraintLayout>,
    /// SDP block of each inequality slack.
    pub slack_blocks: Vec<usize>,
    /// Near-zero rows discarded during compilation.
    pub dropped_rows: usize,
    /// Gram basis monomials removed because their squares cannot appear.
    pub pruned_monomials: usize,
    /// Linear equalities implied by coefficients no Gram entry can reach.
    pub implied_equalities: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintLayout {
    pub name: String,
    pub degree: Option<u32>,
    pub basis: Vec<Monomial>,
    pub blocks: Vec<GramBlock>,
    /// SDP rows generated by this constraint.
    pub rows: Vec<usize>,
}

/// One diagonal block of a Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBlock {
    pub sdp_block: usize,
    /// Indices into the constraint's basis.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CompiledSos {
    pub problem: SdpProblem,
    pub layout: Layout,
}

impl Layout {
    /// Decision values from the SDP free variables.
    pub fn decision_values(&self, free: &[f64]) -> Vec<f64> {
        self.substitution
            .iter()
            .map(|(c, ws)| c + ws.iter().map(|&(j, w)| w * free[j]).sum::<f64>())
            .collect()
    }

    pub fn n_gram_blocks(&self) -> usize {
        self.constraints.iter().map(|c| c.blocks.len()).sum()
    }
}

/// Affine content of one coefficient row: `rhs + sum free_j y_j`.
#[derive(Default)]
struct Affine {
    rhs: f64,
    free: BTreeMap<usize, f64>,
}

impl Affine {
    fn magnitude(&self) -> f64 {
        self.free
            .values()
            .fold(self.rhs.abs(), |m, v| m.max(v.abs()))
    }
}

/// Solves the linear equalities for a set of pivot variables, expressing
/// every decision variable through the remaining free ones.
fn eliminate(n: usize, equalities: &[LinearConstraint]) -> Result<Vec<(f64, Vec<(usize, f64)>)>> {
    let m = equalities.len();
    let mut a = vec![vec![0.0; n + 1]; m];
    for (r, eq) in equalities.iter().enumerate() {
        for &(k, v) in &eq.coeffs {
            check_var(k, n)?;
            a[r][k] += v;
        }
        a[r][n] = eq.rhs;
    }
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1.0);
    let tol = 1e-12 * scale;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == m {
            break;
        }
        let (best, mag) = (row..m)
            .map(|r| (r, a[r][col].abs()))
            .fold((row, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if mag <= tol {
            continue;
        }
        a.swap(row, best);
        let p = a[row][col];
        for v in a[row].iter_mut() {
            *v /= p;
        }
        for r in 0..m {
            if r != row && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..=n {
                    let d = f * a[row][c];
                    a[r][c] -= d;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    if a[row..].iter().any(|r| r[n].abs() > tol * 1e3) {
        return Err(Error::InconsistentEqualities);
    }
    let mut is_pivot = vec![None; n];
    for &(r, c) in &pivots {
        is_pivot[c] = Some(r);
    }
    let mut free_index = vec![usize::MAX; n];
    let mut nf = 0;
    for k in 0..n {
        if is_pivot[k].is_none() {
            free_index[k] = nf;
            nf += 1;
        }
    }
    Ok((0..n)
        .map(|k| match is_pivot[k] {
            None => (0.0, vec![(free_index[k], 1.0)]),
            Some(r) => {
                let ws = (0..n)
                    .filter(|&j| is_pivot[j].is_none() && a[r][j].abs() > tol)
                    .map(|j| (free_index[j], -a[r][j]))
                    .collect();
                (a[r][n], ws)
            }
        })
        .collect())
}

fn check_var(k: VarId, n: usize) -> Result<()> {
    if k >= n {
        return Err(Error::InvalidProblem(format!(
            "decision variable {k} out of range (have {n})"
        )));
    }
    Ok(())
}

fn n_free(sub: &[(f64, Vec<(usize, f64)>)]) -> usize {
    sub.iter()
        .flat_map(|(_, ws)| ws.iter().map(|&(j, _)| j + 1))
        .max()
        .unwrap_or(0)
}

/// Coefficient rows of `con.expr` in terms of the free variables.
fn affine_rows(
    con: &SosConstraint,
    sub: &[(f64, Vec<(usize, f64)>)],
    n: usize,
) -> Result<BTreeMap<Monomial, Affine>> {
    let mut affine: BTreeMap<Monomial, Affine> = BTreeMap::new();
    for (m, c) in con.expr.constant.terms() {
        affine.entry(m.clone()).or_default().rhs += c;
    }
    for (k, p) in &con.expr.terms {
        check_var(*k, n)?;
        let (c0, ws) = &sub[*k];
        for (m, c) in p.terms() {
            let row = affine.entry(m.clone()).or_default();
            row.rhs += c * c0;
            for &(j, w) in ws {
                *row.free.entry(j).or_insert(0.0) -= c * w;
            }
        }
    }
    Ok(affine)
}

/// Drops basis monomials `m` whose square `m^2` is missing from `support`
/// and is not the product of two other basis monomials. Their Gram rows
/// vanish in every feasible point, so keeping them only removes the
/// interior of the feasible set.
fn prune_basis(mut basis: Vec<Monomial>, support: &BTreeSet<&Monomial>) -> Vec<Monomial> {
    loop {
        let set: BTreeSet<Monomial> = basis.iter().cloned().collect();
        let keep: Vec<bool> = basis
            .iter()
            .map(|m| {
                let sq = m.mul(m);
                support.contains(&sq)
                    || basis
                        .iter()
                        .any(|a| a != m && sq.divisible_by(a) && set.contains(&quotient(&sq, a)))
            })
            .collect();
        if keep.iter().all(|k| *k) {
            return basis;
        }
        basis = basis
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(m, _)| m)
            .collect();
    }
}

fn quotient(a: &Monomial, b: &Monomial) -> Monomial {
    let e: Vec<u16> = a
        .exponents()
        .iter()
        .zip(b.exponents())
        .map(|(x, y)| x - y)
        .collect();
    Monomial::new(&e)
}

/// Compiled rows of one SOS constraint before SDP assembly.
struct Prepared {
    affine: BTreeMap<Monomial, Affine>,
    noise: f64,
    degree: Option<u32>,
    basis: Vec<Monomial>,
}

/// Rounds of implied-equality elimination before giving up.
const MAX_ELIMINATION_ROUNDS: usize = 16;

/// Compiles `program` into a standard-form SDP.
///
/// Each SOS constraint `e(x)` with Gram basis `b` contributes the rows
/// `coeff_a(b^T Q b) = coeff_a(e)` for every monomial `a`, with one PSD block
/// per sign-character block of the basis. Basis monomials that cannot carry
/// a nonzero Gram row are pruned, coefficients of `e` that no Gram entry
/// reaches become linear equalities, and all linear equalities are
/// eliminated up front. Inequalities get a 1x1 slack block, and the
/// objective is carried by the free variables.
pub fn compile(program: &SosProgram) -> Result<CompiledSos> {
    let n = program.n_decision();
    let mut equalities = program.equalities.clone();
    let mut implied = 0;
    let mut pruned;
    let mut round = 0;
    let (sub, prepared) = loop {
        round += 1;
        let sub = eliminate(n, &equalities)?;
        // Decision variable behind each free variable.
        let mut owner = vec![usize::MAX; n_free(&sub)];
        for (k, (c0, ws)) in sub.iter().enumerate() {
            if *c0 == 0.0 && ws.len() == 1 && ws[0].1 == 1.0 && owner[ws[0].0] == usize::MAX {
                owner[ws[0].0] = k;
            }
        }
        let mut prepared = Vec::new();
        let mut new_eqs = Vec::new();
        pruned = 0;
        for con in &program.constraints {
            if con.expr.nvars() != program.nvars() {
                return Err(Error::DimensionMismatch {
                    expected: program.nvars(),
                    found: con.expr.nvars(),
                });
            }
            let affine = affine_rows(con, &sub, n)?;
            let scale = affine.values().map(Affine::magnitude).fold(0.0, f64::max);
            let noise = COMPILE_NOISE_REL * scale;
            let degree = affine
                .iter()
                .filter(|(_, a)| a.magnitude() > noise)
                .map(|(m, _)| m.degree())
                .max();
            let mut basis = Vec::new();
            if let Some(deg) = degree {
                if deg % 2 == 1 {
                    return Err(Error::OddDegree {
                        constraint: con.name.clone(),
                        degree: deg,
                    });
                }
                let full = con
                    .basis
                    .clone()
                    .unwrap_or_else(|| default_gram_basis(program.nvars(), deg));
                let support: BTreeSet<&Monomial> = affine
                    .iter()
                    .filter(|(_, a)| a.magnitude() > noise)
                    .map(|(m, _)| m)
                    .collect();
                let before = full.len();
                basis = prune_basis(full, &support);
                pruned += before - basis.len();
                let reach: BTreeSet<Monomial> = basis
                    .iter()
                    .flat_map(|a| basis.iter().map(move |b| a.mul(b)))
                    .collect();
                for (m, a) in &affine {
                    if reach.contains(m) || a.magnitude() <= noise {
                        continue;
                    }
                    let coeffs: Vec<(VarId, f64)> = a
                        .free
                        .iter()
                        .filter(|(_, v)| v.abs() > noise)
                        .map(|(&j, &v)| (owner[j], v))
                        .collect();
                    if coeffs.is_empty() {
                        return Err(Error::Inexpressible {
                            constraint: con.name.clone(),
                            monomial: m.to_string(),
                        });
                    }
                    // rhs - sum free_j y_j = 0.
                    new_eqs.push(LinearConstraint { coeffs, rhs: a.rhs });
                }
            }
            prepared.push(Prepared {
                affine,
                noise,
                degree,
                basis,
            });
        }
        if new_eqs.is_empty() {
            break (sub, prepared);
        }
        if round >= MAX_ELIMINATION_ROUNDS || owner.contains(&usize::MAX) {
            return Err(Error::InvalidProblem(
                "implied equalities did not settle".into(),
            ));
        }
        implied += new_eqs.len();
        equalities.extend(new_eqs);
    };
    let nf = n_free(&sub);
    let mut block_sizes = Vec::new();
    let mut rows: Vec<SdpRow> = Vec::new();
    let mut constraints = Vec::new();
    let mut dropped = 0;

    for (con, prep) in program.constraints.iter().zip(prepared) {
        let Prepared {
            affine,
            noise,
            degree,
            basis,
        } = prep;
        let Some(deg) = degree else {
            dropped += affine.len();
            constraints.push(ConstraintLayout {
                name: con.name.clone(),
                degree: None,
                basis: Vec::new(),
                blocks: Vec::new(),
                rows: Vec::new(),
            });
            continue;
        };
        let template: GramTemplate = match &con.group {
            Some(g) => sos_template_blocks(&basis, g)?,
            None => sos_template(&basis),
        };
        let first_block = block_sizes.len();
        let blocks: Vec<GramBlock> = template
            .blocks
            .iter()
            .enumerate()
            .map(|(b, members)| GramBlock {
                sdp_block: first_block + b,
                members: members.clone(),
            })
            .collect();
        block_sizes.extend(template.block_sizes());

        let mut monomials: Vec<&Monomial> = template.coefficient_map.keys().collect();
        for m in affine.keys() {
            if !template.coefficient_map.contains_key(m) {
                monomials.push(m);
            }
        }
        monomials.sort();
        let mut my_rows = Vec::new();
        for m in monomials {
            let gram = template.coefficient_map.get(m);
            let a = affine.get(m);
            match gram {
                None => {
                    let a = a.expect("monomial comes from one of the two maps");
                    if a.magnitude() > noise {
                        return Err(Error::Inexpressible {
                            constraint: con.name.clone(),
                            monomial: m.to_string(),
                        });
                    }
                    dropped += 1;
                }
                Some(entries) => {
                    let mut row = SdpRow::default();
                    for &(b, i, j) in entries {
                        row.entries
                            .push(BlockEntry::new(first_block + b, i, j, 1.0));
                    }
                    if let Some(a) = a {
                        row.rhs = a.rhs;
                        row.free = a
                            .free
                            .iter()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(&j, &v)| (j, v))
                            .collect();
                    }
                    my_rows.push(rows.len());
                    rows.push(row);
                }
            }
        }
        constraints.push(ConstraintLayout {
            name: con.name.clone(),
            degree: Some(deg),
            basis,
            blocks,
            rows: my_rows,
        });
    }

    let mut slack_blocks = Vec::new();
    for ineq in &program.inequalities {
        let block = block_sizes.len();
        block_sizes.push(1);
        slack_blocks.push(block);
        let mut free: BTreeMap<usize, f64> = BTreeMap::new();
        let mut rhs = ineq.rhs;
        for &(k, a) in &ineq.coeffs {
            check_var(k, n)?;
            let (c0, ws) = &sub[k];
            rhs -= a * c0;
            for &(j, w) in ws {
                *free.entry(j).or_insert(0.0) += a * w;
            }
        }
        // sum a_k c_k - s = rhs with s >= 0.
        rows.push(SdpRow {
            entries: vec![BlockEntry::new(block, 0, 0, -1.0)],
            free: free.into_iter().filter(|(_, v)| *v != 0.0).collect(),
            rhs,
        });
    }

    let mut problem = SdpProblem::new(block_sizes, nf);
    for &(k, o) in &program.objective {
        check_var(k, n)?;
        let (c0, ws) = &sub[k];
        problem.objective_offset += o * c0;
        for &(j, w) in ws {
            problem.objective_free[j] += o * w;
        }
    }
    problem.rows = rows;
    problem.validate()?;
    Ok(CompiledSos {
        problem,
        layout: Layout {
            substitution: sub,
            constraints,
            slack_blocks,
            dropped_rows: dropped,
            pruned_monomials: pruned,
            implied_equalities: implied,
        },
    })
}
