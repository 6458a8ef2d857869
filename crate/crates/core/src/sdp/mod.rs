//! Standard-form semidefinite programs with free variables, and a dense
//! primal-dual interior-point solver for them.
//!
//! The primal problem is
//!
//! ```text
//! minimize    sum_b <C_b, X_b> + c_f . y + offset
//! subject to  sum_b <A_ib, X_b> + (B y)_i = b_i     for every row i
//!             X_b PSD,  y free
//! ```
//!
//! and its dual is
//!
//! ```text
//! maximize    b . w + offset
//! subject to  Z_b = C_b - sum_i w_i A_ib  PSD,   B^T w = c_f.
//! ```
//!
//! Matrix data is stored as upper-triangle triplets `(block, i, j, v)` with
//! `i <= j`, each standing for the symmetric pair `A[i][j] = A[j][i] = v`.
//! Hence `<A, X> = sum A_ii X_ii + 2 sum_{i<j} A_ij X_ij`.

mod format;
mod solver;

pub use format::{read_sdp, write_sdp};
pub use solver::solve;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};

/// One upper-triangle entry of a symmetric block matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl BlockEntry {
    pub fn new(block: usize, i: usize, j: usize, value: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        BlockEntry { block, i, j, value }
    }
}

/// One equality constraint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpRow {
    pub entries: Vec<BlockEntry>,
    /// `(free variable index, coefficient)` pairs.
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A standard-form SDP with free variables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub n_free: usize,
    pub rows: Vec<SdpRow>,
    pub objective: Vec<BlockEntry>,
    pub objective_free: Vec<f64>,
    /// Constant added to both objectives.
    pub objective_offset: f64,
}

impl SdpProblem {
    pub fn new(block_sizes: Vec<usize>, n_free: usize) -> Self {
        SdpProblem {
            block_sizes,
            n_free,
            rows: Vec::new(),
            objective: Vec::new(),
            objective_free: vec![0.0; n_free],
            objective_offset: 0.0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Checks index ranges, triangle order and finiteness.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if let Some(b) = self.block_sizes.iter().position(|&n| n == 0) {
            return bad(format!("block {b} has size zero"));
        }
        if self.objective_free.len() != self.n_free {
            return bad(format!(
                "objective has {} free coefficients, problem has {} free variables",
                self.objective_free.len(),
                self.n_free
            ));
        }
        let check_entry = |e: &BlockEntry, what: &str| -> Result<()> {
            let Some(&n) = self.block_sizes.get(e.block) else {
                return bad(format!("{what}: block {} out of range", e.block));
            };
            if e.i > e.j || e.j >= n {
                return bad(format!(
                    "{what}: entry ({}, {}) invalid for block {} of size {n}",
                    e.i, e.j, e.block
                ));
            }
            if !e.value.is_finite() {
                return bad(format!("{what}: non-finite value"));
            }
            Ok(())
        };
        for e in &self.objective {
            check_entry(e, "objective")?;
        }
        if !self.objective_free.iter().all(|v| v.is_finite()) || !self.objective_offset.is_finite()
        {
            return bad("objective: non-finite value".into());
        }
        for (r, row) in self.rows.iter().enumerate() {
            let what = format!("row {r}");
            for e in &row.entries {
                check_entry(e, &what)?;
            }
            for &(k, v) in &row.free {
                if k >= self.n_free || !v.is_finite() {
                    return bad(format!("{what}: bad free entry ({k}, {v})"));
                }
            }
            if !row.rhs.is_finite() {
                return bad(format!("{what}: non-finite right-hand side"));
            }
        }
        Ok(())
    }

    /// Dense symmetric objective matrix of each block.
    pub fn objective_matrices(&self) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&n| DMatrix::zeros(n, n))
            .collect();
        for e in &self.objective {
            add_sym(&mut out[e.block], e.i, e.j, e.value);
        }
        out
    }
}

fn add_sym(m: &mut DMatrix<f64>, i: usize, j: usize, v: f64) {
    m[(i, j)] += v;
    if i != j {
        m[(j, i)] += v;
    }
}

/// Solver tolerances and limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative duality gap for an optimal status.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility for an optimal status.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the PSD boundary taken per step.
    pub step_fraction: f64,
    /// Diagonal shift of the Schur complement, relative to its largest
    /// diagonal entry, used only when the unshifted factorization fails.
    pub regularization: f64,
    /// Keep a per-iteration record in the solution.
    pub log_iterations: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gap_tol: defaults::SDP_GAP_TOL,
            feas_tol: defaults::SDP_FEAS_TOL,
            max_iter: defaults::SDP_MAX_ITER,
            step_fraction: defaults::SDP_STEP_FRACTION,
            regularization: defaults::SDP_REGULARIZATION,
            log_iterations: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gap_tol > 0.0
            && self.feas_tol > 0.0
            && self.max_iter > 0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0
            && self.regularization >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!(
                "invalid solver settings {self:?}"
            )))
        }
    }
}

/// Outcome of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    /// All tolerances met.
    Optimal,
    /// Stopped short of the tolerances but within a factor of 100 of them.
    NearOptimal,
    /// The dual iterates diverge along an approximate Farkas direction.
    PrimalInfeasibleSuspected,
    /// The primal objective diverges to minus infinity.
    DualInfeasibleSuspected,
    /// The Newton system could not be factored or the iterates stalled.
    IllConditioned,
    IterationLimit,
}

impl SolveStatus {
    /// Whether the returned point can be used as a solution.
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::PrimalInfeasibleSuspected => "primal-infeasible-suspected",
            SolveStatus::DualInfeasibleSuspected => "dual-infeasible-suspected",
            SolveStatus::IllConditioned => "ill-conditioned",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative KKT residuals of a primal-dual point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `|b - A(X) - B y| / (1 + |b|)`.
    pub primal_infeasibility: f64,
    /// `|(C - A^T w - Z, c_f - B^T w)| / (1 + |(C, c_f)|)`.
    pub dual_infeasibility: f64,
    /// `max(|p - d|, <X, Z>) / (1 + |p| + |d|)`.
    pub relative_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// `<X, Z>`, for weak-duality checks.
    pub complementarity: f64,
    /// Bound on how far infeasibility can push `p - d` below `<X, Z>`.
    pub infeasibility_slack: f64,
    pub mu: f64,
    pub sigma: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

/// Primal-dual point returned by [`solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Primal block matrices `X_b`.
    pub blocks: Vec<DMatrix<f64>>,
    /// Free variables `y`.
    pub free: Vec<f64>,
    /// Dual multipliers `w`, one per row.
    pub dual: Vec<f64>,
    /// Dual slack matrices `Z_b`.
    pub slack: Vec<DMatrix<f64>>,
    pub residuals: Residuals,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

impl SdpSolution {
    pub fn objective(&self) -> f64 {
        self.residuals.primal_objective
    }

    /// Iteration log as CSV.
    pub fn log_csv(&self) -> String {
        let mut out = String::from(
            "iteration,primal_objective,dual_objective,relative_gap,primal_infeasibility,dual_infeasibility,mu,sigma,step_primal,step_dual\n",
        );
        for r in &self.log {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e},{:.4},{:.6},{:.6}\n",
                r.iteration,
                r.primal_objective,
                r.dual_objective,
                r.relative_gap,
                r.primal_infeasibility,
                r.dual_infeasibility,
                r.mu,
                r.sigma,
                r.step_primal,
                r.step_dual
            ));
        }
        out
    }
}

/// Recomputes the KKT residuals of `(X, y, w, Z)` straight from the problem
/// triplets, without any of the solver's internal data structures.
pub fn kkt_residuals(
    problem: &SdpProblem,
    blocks: &[DMatrix<f64>],
    free: &[f64],
    dual: &[f64],
    slack: &[DMatrix<f64>],
) -> Result<Residuals> {
    let nb = problem.block_sizes.len();
    if blocks.len() != nb || slack.len() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            found: blocks.len().min(slack.len()),
        });
    }
    if free.len() != problem.n_free {
        return Err(Error::DimensionMismatch {
            expected: problem.n_free,
            found: free.len(),
        });
    }
    if dual.len() != problem.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.rows.len(),
            found: dual.len(),
        });
    }

    let entry_value = |m: &DMatrix<f64>, e: &BlockEntry| {
        if e.i == e.j {
            e.value * m[(e.i, e.i)]
        } else {
            e.value * (m[(e.i, e.j)] + m[(e.j, e.i)])
        }
    };

    let mut rp2 = 0.0;
    let mut b2 = 0.0;
    for row in &problem.rows {
        let mut ax = 0.0;
        for e in &row.entries {
            ax += entry_value(&blocks[e.block], e);
        }
        for &(k, v) in &row.free {
            ax += v * free[k];
        }
        rp2 += (row.rhs - ax).powi(2);
        b2 += row.rhs * row.rhs;
    }

    // R_d = C - A^T w - Z.
    let mut rd: Vec<DMatrix<f64>> = problem.objective_matrices();
    let mut c2: f64 = rd.iter().map(|m| m.norm_squared()).sum();
    for (row, &wi) in problem.rows.iter().zip(dual) {
        for e in &row.entries {
            add_sym(&mut rd[e.block], e.i, e.j, -wi * e.value);
        }
    }
    let mut rd2 = 0.0;
    for (r, z) in rd.iter_mut().zip(slack) {
        *r -= z;
        rd2 += r.norm_squared();
    }
    let mut bt_w = problem.objective_free.clone();
    for (row, &wi) in problem.rows.iter().zip(dual) {
        for &(k, v) in &row.free {
            bt_w[k] -= v * wi;
        }
    }
    rd2 += bt_w.iter().map(|v| v * v).sum::<f64>();
    c2 += problem.objective_free.iter().map(|v| v * v).sum::<f64>();

    let mut pobj = problem.objective_offset;
    for e in &problem.objective {
        pobj += entry_value(&blocks[e.block], e);
    }
    pobj += problem
        .objective_free
        .iter()
        .zip(free)
        .map(|(c, y)| c * y)
        .sum::<f64>();
    let dobj = problem.objective_offset
        + problem
            .rows
            .iter()
            .zip(dual)
            .map(|(r, w)| r.rhs * w)
            .sum::<f64>();
    let xz: f64 = blocks.iter().zip(slack).map(|(x, z)| x.dot(z)).sum();

    Ok(Residuals {
        primal_infeasibility: rp2.sqrt() / (1.0 + b2.sqrt()),
        dual_infeasibility: rd2.sqrt() / (1.0 + c2.sqrt()),
        relative_gap: (pobj - dobj).abs().max(xz) / (1.0 + pobj.abs() + dobj.abs()),
        primal_objective: pobj,
        dual_objective: dobj,
    })
}

/// [`kkt_residuals`] of a returned solution.
pub fn verify_solution(problem: &SdpProblem, sol: &SdpSolution) -> Result<Residuals> {
    kkt_residuals(problem, &sol.blocks, &sol.free, &sol.dual, &sol.slack)
}
