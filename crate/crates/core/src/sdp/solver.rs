//! Infeasible-start primal-dual path following with the Nesterov-Todd
//! direction and Mehrotra's predictor-corrector.

use std::cell::OnceCell;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, FullPivLU, LU};

use super::{IterationRecord, Residuals, SdpProblem, SdpSolution, SolveStatus, SolverSettings};
use crate::defaults;
use crate::error::Result;

/// Upper-triangle entries `(i, j, v)` of one row restricted to one block.
type RowBlock = (usize, Vec<(usize, usize, f64)>);

struct Data {
    m: usize,
    nf: usize,
    sizes: Vec<usize>,
    /// For each block, the rows touching it (ascending) with their entries.
    block_rows: Vec<Vec<RowBlock>>,
    bmat: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    cf: DVector<f64>,
    offset: f64,
    norm_b: f64,
    norm_c: f64,
    null: Option<NullSpace>,
}

impl Data {
    fn new(p: &SdpProblem) -> Self {
        let m = p.rows.len();
        let nf = p.n_free;
        let nb = p.block_sizes.len();
        let mut block_rows: Vec<Vec<RowBlock>> = vec![Vec::new(); nb];
        let mut bmat = DMatrix::zeros(m, nf);
        for (r, row) in p.rows.iter().enumerate() {
            for e in &row.entries {
                let list = &mut block_rows[e.block];
                match list.last_mut() {
                    Some((lr, ents)) if *lr == r => ents.push((e.i, e.j, e.value)),
                    _ => list.push((r, vec![(e.i, e.j, e.value)])),
                }
            }
            for &(k, v) in &row.free {
                bmat[(r, k)] += v;
            }
        }
        // Merge repeated entries so each (i, j) appears once per row.
        for list in &mut block_rows {
            for (_, ents) in list.iter_mut() {
                ents.sort_by_key(|a| (a.0, a.1));
                ents.dedup_by(|a, b| {
                    if a.0 == b.0 && a.1 == b.1 {
                        b.2 += a.2;
                        true
                    } else {
                        false
                    }
                });
            }
        }
        let b = DVector::from_iterator(m, p.rows.iter().map(|r| r.rhs));
        let c = p.objective_matrices();
        let cf = DVector::from_vec(p.objective_free.clone());
        let norm_b = b.norm();
        let null = NullSpace::new(&bmat);
        let norm_c = (c.iter().map(|m| m.norm_squared()).sum::<f64>() + cf.norm_squared()).sqrt();
        Data {
            m,
            nf,
            sizes: p.block_sizes.clone(),
            block_rows,
            bmat,
            b,
            c,
            cf,
            offset: p.objective_offset,
            norm_b,
            norm_c,
            null,
        }
    }

    /// `A(X)`.
    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (xb, rows) in x.iter().zip(&self.block_rows) {
            for (r, ents) in rows {
                let mut s = 0.0;
                for &(i, j, v) in ents {
                    s += if i == j {
                        v * xb[(i, i)]
                    } else {
                        v * (xb[(i, j)] + xb[(j, i)])
                    };
                }
                out[*r] += s;
            }
        }
        out
    }

    /// `A^T w`, one symmetric matrix per block.
    fn at_op(&self, w: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (ob, rows) in out.iter_mut().zip(&self.block_rows) {
            for (r, ents) in rows {
                let wr = w[*r];
                if wr == 0.0 {
                    continue;
                }
                for &(i, j, v) in ents {
                    ob[(i, j)] += wr * v;
                    if i != j {
                        ob[(j, i)] += wr * v;
                    }
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = tr(A_i X A_j W)`.
    fn schur(&self, x: &[DMatrix<f64>], w: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut mm = DMatrix::zeros(self.m, self.m);
        let mut k: Vec<f64> = Vec::new();
        for ((xb, wb), rows) in x.iter().zip(w).zip(&self.block_rows) {
            let n = xb.nrows();
            let xs = xb.as_slice();
            let ws = wb.as_slice();
            k.clear();
            k.resize(n * n, 0.0);
            for (ii, (ri, ei)) in rows.iter().enumerate() {
                // K = X A_i W, column-major.
                k.iter_mut().for_each(|v| *v = 0.0);
                for &(p, q, v) in ei {
                    add_outer(
                        &mut k,
                        n,
                        &xs[p * n..(p + 1) * n],
                        &ws[q * n..(q + 1) * n],
                        v,
                    );
                    if p != q {
                        add_outer(
                            &mut k,
                            n,
                            &xs[q * n..(q + 1) * n],
                            &ws[p * n..(p + 1) * n],
                            v,
                        );
                    }
                }
                for (rj, ej) in &rows[ii..] {
                    let mut s = 0.0;
                    for &(r, c, u) in ej {
                        s += if r == c {
                            u * k[r * n + r]
                        } else {
                            u * (k[c * n + r] + k[r * n + c])
                        };
                    }
                    mm[(*ri, *rj)] += s;
                    if ri != rj {
                        mm[(*rj, *ri)] += s;
                    }
                }
            }
        }
        mm
    }
}

/// `K += v * a b^T` for column-major `K` of order `n`.
#[inline]
fn add_outer(k: &mut [f64], n: usize, a: &[f64], b: &[f64], v: f64) {
    for (col, &bs) in b.iter().enumerate() {
        let f = v * bs;
        if f == 0.0 {
            continue;
        }
        let kc = &mut k[col * n..(col + 1) * n];
        for (kv, &av) in kc.iter_mut().zip(a) {
            *kv += f * av;
        }
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn frob_norm_row_block(ents: &[(usize, usize, f64)]) -> f64 {
    ents.iter()
        .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
        .sum::<f64>()
        .sqrt()
}

/// Least-norm correction that restores `A(dX) + B dy = rp` for a search
/// direction after rounding in the Newton solve.
struct Projector {
    /// LU of `[A A^T B; B^T 0]`.
    primal: LU<f64, Dyn, Dyn>,
}

impl Projector {
    fn new(data: &Data) -> Self {
        let eye: Vec<DMatrix<f64>> = data
            .sizes
            .iter()
            .map(|&n| DMatrix::identity(n, n))
            .collect();
        let (m, nf) = (data.m, data.nf);
        let mut k = DMatrix::zeros(m + nf, m + nf);
        k.view_mut((0, 0), (m, m))
            .copy_from(&data.schur(&eye, &eye));
        k.view_mut((0, m), (m, nf)).copy_from(&data.bmat);
        k.view_mut((m, 0), (nf, m))
            .copy_from(&data.bmat.transpose());
        Projector { primal: k.lu() }
    }

    fn apply(&self, data: &Data, st: &State, d: &mut Direction) {
        let (m, nf) = (data.m, data.nf);
        let ep = &st.rp - data.a_op(&d.dx) - &data.bmat * &d.dy;
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(&ep);
        if let Some(sol) = self.primal.solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                let u = sol.rows(0, m).into_owned();
                for (dx, c) in d.dx.iter_mut().zip(data.at_op(&u)) {
                    *dx += c;
                }
                d.dy += sol.rows(m, nf);
            }
        }
    }
}

/// `B = Q1 R` with `Q2` spanning the orthogonal complement of `range(B)`.
struct NullSpace {
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl NullSpace {
    /// `None` when `B` is empty, square or rank deficient.
    fn new(b: &DMatrix<f64>) -> Option<Self> {
        let (m, nf) = b.shape();
        if nf == 0 || nf >= m {
            return None;
        }
        let qr = b.clone().qr();
        let r = qr.r();
        let rmax = (0..nf).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
        if (0..nf).any(|i| !(r[(i, i)].abs() > 1e-12 * rmax)) {
            return None;
        }
        let mut qt = DMatrix::identity(m, m);
        qr.q_tr_mul(&mut qt);
        let q = qt.transpose();
        Some(NullSpace {
            q1: q.columns(0, nf).into_owned(),
            q2: q.columns(nf, m - nf).into_owned(),
            r,
        })
    }
}

enum Method<'a> {
    /// Cholesky of `M`, then the free variables through `B^T M^-1 B`. Used
    /// without free variables or when `B` is rank deficient.
    Schur {
        mfac: Cholesky<f64, Dyn>,
        minv_b: DMatrix<f64>,
        sfac: Option<SFactor>,
    },
    /// Cholesky of `Q2^T M Q2`. Stays definite when `M` alone is singular
    /// and meets `B^T u = r` exactly.
    Null {
        kfac: Cholesky<f64, Dyn>,
        mq1: DMatrix<f64>,
        ns: &'a NullSpace,
    },
}

/// Factored Newton system `[M B; B^T 0]`.
struct Newton<'a> {
    mmat: DMatrix<f64>,
    bmat: &'a DMatrix<f64>,
    method: Method<'a>,
    /// LU of the full saddle-point matrix, built on first need.
    aug: OnceCell<Option<LU<f64, Dyn, Dyn>>>,
}

enum SFactor {
    Chol(Cholesky<f64, Dyn>),
    Lu(FullPivLU<f64, Dyn, Dyn>),
}

impl SFactor {
    fn solve(&self, r: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SFactor::Chol(c) => Some(c.solve(r)),
            SFactor::Lu(l) => l.solve(r),
        }
    }
}

/// Cholesky of `a`, shifting the diagonal by `reg` times its largest entry
/// (growing 1e3-fold per retry) only if the unshifted factorization fails.
fn shifted_cholesky(a: &DMatrix<f64>, reg: f64) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Some(c);
    }
    let n = a.nrows();
    let maxdiag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    let mut delta = reg.max(1e-16) * maxdiag;
    for _ in 0..5 {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Some(c);
        }
        delta *= 1e3;
    }
    None
}

impl<'a> Newton<'a> {
    fn factor(
        mmat: DMatrix<f64>,
        bmat: &'a DMatrix<f64>,
        null: Option<&'a NullSpace>,
        reg: f64,
    ) -> Option<Self> {
        let method = match null {
            Some(ns) => {
                let k = ns.q2.transpose() * (&mmat * &ns.q2);
                let kfac = shifted_cholesky(&sym(k), reg)?;
                Method::Null {
                    kfac,
                    mq1: &mmat * &ns.q1,
                    ns,
                }
            }
            None => {
                let mfac = shifted_cholesky(&mmat, reg)?;
                let nf = bmat.ncols();
                let (minv_b, sfac) = if nf > 0 {
                    let minv_b = mfac.solve(bmat);
                    let s = sym(bmat.transpose() * &minv_b);
                    let sd = (0..nf)
                        .map(|i| s[(i, i)])
                        .fold(0.0f64, f64::max)
                        .max(1e-300);
                    let mut sreg = s.clone();
                    for i in 0..nf {
                        sreg[(i, i)] += 1e-14 * sd;
                    }
                    let sfac = match Cholesky::new(sreg) {
                        Some(c) => SFactor::Chol(c),
                        None => SFactor::Lu(FullPivLU::new(s)),
                    };
                    (minv_b, Some(sfac))
                } else {
                    (DMatrix::zeros(mmat.nrows(), 0), None)
                };
                Method::Schur { mfac, minv_b, sfac }
            }
        };
        Some(Newton {
            mmat,
            bmat,
            method,
            aug: OnceCell::new(),
        })
    }

    fn solve_once(
        &self,
        h: &DVector<f64>,
        r: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        match &self.method {
            Method::Schur { mfac, minv_b, sfac } => {
                let minv_h = mfac.solve(h);
                match sfac {
                    None => Some((minv_h, DVector::zeros(0))),
                    Some(sf) => {
                        let rhs = self.bmat.transpose() * &minv_h - r;
                        let v = sf.solve(&rhs)?;
                        let u = minv_h - minv_b * &v;
                        Some((u, v))
                    }
                }
            }
            Method::Null { kfac, mq1, ns } => {
                // u = Q1 a + Q2 t with R^T a = r.
                let a = ns.r.tr_solve_upper_triangular(r)?;
                let t = kfac.solve(&(ns.q2.transpose() * (h - mq1 * &a)));
                let u = &ns.q1 * &a + &ns.q2 * &t;
                let v =
                    ns.r.solve_upper_triangular(&(ns.q1.transpose() * (h - &self.mmat * &u)))?;
                Some((u, v))
            }
        }
    }

    fn residual(
        &self,
        h: &DVector<f64>,
        r: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        (
            h - &self.mmat * u - self.bmat * v,
            r - self.bmat.transpose() * u,
        )
    }

    fn relative_residual(
        &self,
        h: &DVector<f64>,
        r: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> f64 {
        let (rh, rr) = self.residual(h, r, u, v);
        let scale = h.norm() + r.norm() + self.mmat.norm() * u.norm() + self.bmat.norm() * v.norm();
        (rh.norm() + rr.norm()) / scale.max(1e-300)
    }

    /// The saddle-point system `[M B; B^T 0]` solved directly, which keeps
    /// its accuracy when `B^T M^-1 B` is badly conditioned.
    fn solve_augmented(
        &self,
        h: &DVector<f64>,
        r: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let m = self.mmat.nrows();
        let nf = self.bmat.ncols();
        let lu = self
            .aug
            .get_or_init(|| {
                let mut k = DMatrix::zeros(m + nf, m + nf);
                k.view_mut((0, 0), (m, m)).copy_from(&self.mmat);
                k.view_mut((0, m), (m, nf)).copy_from(self.bmat);
                k.view_mut((m, 0), (nf, m))
                    .copy_from(&self.bmat.transpose());
                Some(LU::new(k))
            })
            .as_ref()?;
        let rhs = DVector::from_iterator(m + nf, h.iter().chain(r.iter()).copied());
        let sol = lu.solve(&rhs)?;
        Some((sol.rows(0, m).into_owned(), sol.rows(m, nf).into_owned()))
    }

    /// Solves `M u + B v = h`, `B^T u = r` with iterative refinement against
    /// the unregularized system, falling back to the saddle-point form when
    /// the Schur-complement solution stays inaccurate.
    fn solve(&self, h: &DVector<f64>, r: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut u, mut v) = self.solve_once(h, r)?;
        for _ in 0..2 {
            let (rh, rr) = self.residual(h, r, &u, &v);
            let (du, dv) = self.solve_once(&rh, &rr)?;
            u += du;
            v += dv;
        }
        let schur_with_free = matches!(&self.method, Method::Schur { sfac: Some(_), .. });
        if schur_with_free && !(self.relative_residual(h, r, &u, &v) <= NEWTON_RESIDUAL_TOL) {
            if let Some((mut ua, mut va)) = self.solve_augmented(h, r) {
                for _ in 0..2 {
                    let (rh, rr) = self.residual(h, r, &ua, &va);
                    let Some((du, dv)) = self.solve_augmented(&rh, &rr) else {
                        break;
                    };
                    ua += du;
                    va += dv;
                }
                if self.relative_residual(h, r, &ua, &va) < self.relative_residual(h, r, &u, &v) {
                    (u, v) = (ua, va);
                }
            }
        }
        if u.iter().chain(v.iter()).all(|x| x.is_finite()) {
            Some((u, v))
        } else {
            None
        }
    }
}

/// Refinement rounds of each search direction against the operator.
const OPERATOR_REFINEMENT: usize = 3;

/// Relative Newton-system residual above which the saddle-point solve is tried.
const NEWTON_RESIDUAL_TOL: f64 = 1e-12;

/// Largest `a` with `L L^T + a D` PSD, or infinity.
fn max_step(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(t1) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(t) = l.solve_lower_triangular(&t1.transpose()) else {
        return 0.0;
    };
    let t = sym(t);
    let lmin = t.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// `W = G G^T` with `W Z W = X` and `G^-1 X G^-T = G^T Z G = diag(lam)`.
struct NtScaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: DVector<f64>,
}

impl NtScaling {
    /// From Cholesky factors `X = L L^T`, `Z = R R^T`: with
    /// `R^T L = U D Q^T`, `G = L Q D^-1/2`.
    fn new(l: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<Self> {
        let svd = (r.transpose() * l).svd(true, true);
        let q = svd.v_t?.transpose();
        let u = svd.u?;
        let d = svd.singular_values;
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let n = d.len();
        let mut g = l * &q;
        for j in 0..n {
            let f = 1.0 / d[j].sqrt();
            g.column_mut(j).scale_mut(f);
        }
        // G^-1 = D^-1/2 U^T R^T, since R^T L Q = U D.
        let mut ginv = u.transpose() * r.transpose();
        for i in 0..n {
            let f = 1.0 / d[i].sqrt();
            ginv.row_mut(i).scale_mut(f);
        }
        let w = sym(&g * g.transpose());
        Some(NtScaling { g, ginv, w, lam: d })
    }
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    w: DVector<f64>,
    z: Vec<DMatrix<f64>>,
}

struct State {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rf: DVector<f64>,
    res: Residuals,
    xz: f64,
    slack: f64,
    /// `b^T w` and `<C, X> + c_f^T y` without the offset.
    bw: f64,
    cx: f64,
    /// `|A^T w + Z|` including the free part `B^T w`.
    atw_z: f64,
    /// `|A(X) + B y|`.
    ax_by: f64,
}

fn evaluate(data: &Data, it: &Iterate) -> State {
    let ax = data.a_op(&it.x);
    let by = &data.bmat * &it.y;
    let ax_by_v = &ax + &by;
    let rp = &data.b - &ax_by_v;
    let atw = data.at_op(&it.w);
    let mut rd = Vec::with_capacity(atw.len());
    let mut atw_z2 = 0.0;
    for ((c, a), z) in data.c.iter().zip(&atw).zip(&it.z) {
        let s = a + z;
        atw_z2 += s.norm_squared();
        rd.push(c - s);
    }
    let btw = data.bmat.transpose() * &it.w;
    atw_z2 += btw.norm_squared();
    let rf = &data.cf - &btw;
    let cx: f64 = data.c.iter().zip(&it.x).map(|(c, x)| c.dot(x)).sum::<f64>() + data.cf.dot(&it.y);
    let bw = data.b.dot(&it.w);
    let pobj = cx + data.offset;
    let dobj = bw + data.offset;
    let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| x.dot(z)).sum();
    let rd2: f64 = rd.iter().map(|m| m.norm_squared()).sum::<f64>() + rf.norm_squared();
    let slack = it.w.dot(&rp).abs()
        + rd.iter()
            .zip(&it.x)
            .map(|(r, x)| r.dot(x))
            .sum::<f64>()
            .abs()
        + rf.dot(&it.y).abs();
    let res = Residuals {
        primal_infeasibility: rp.norm() / (1.0 + data.norm_b),
        dual_infeasibility: rd2.sqrt() / (1.0 + data.norm_c),
        relative_gap: (pobj - dobj).abs().max(xz) / (1.0 + pobj.abs() + dobj.abs()),
        primal_objective: pobj,
        dual_objective: dobj,
    };
    State {
        rp,
        rd,
        rf,
        res,
        xz,
        slack,
        bw,
        cx,
        atw_z: atw_z2.sqrt(),
        ax_by: ax_by_v.norm(),
    }
}

fn merit(r: &Residuals, s: &SolverSettings) -> f64 {
    (r.primal_infeasibility / s.feas_tol)
        .max(r.dual_infeasibility / s.feas_tol)
        .max(r.relative_gap / s.gap_tol)
}

fn initial_point(data: &Data) -> Iterate {
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (b, &n) in data.sizes.iter().enumerate() {
        let nf = n as f64;
        let mut xi = 10.0f64.max(nf.sqrt());
        let mut eta = 10.0f64.max(nf.sqrt()).max(data.c[b].norm());
        for (r, ents) in &data.block_rows[b] {
            let na = frob_norm_row_block(ents);
            xi = xi.max(nf * (1.0 + data.b[*r].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        x.push(DMatrix::identity(n, n) * xi);
        z.push(DMatrix::identity(n, n) * eta);
    }
    Iterate {
        x,
        y: DVector::zeros(data.nf),
        w: DVector::zeros(data.m),
        z,
    }
}

/// Solves `problem` from a cold start.
///
/// The result is deterministic for fixed inputs. Errors are returned only for
/// malformed problems or settings; numerical trouble is reported through
/// [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    problem.validate()?;
    settings.validate()?;
    let (scaled, d) = equilibrate(problem);
    let mut sol = solve_equilibrated(&scaled, settings)?;
    for (w, di) in sol.dual.iter_mut().zip(&d) {
        *w *= di;
    }
    let it = Iterate {
        x: sol.blocks.clone(),
        y: DVector::from_column_slice(&sol.free),
        w: DVector::from_column_slice(&sol.dual),
        z: sol.slack.clone(),
    };
    sol.residuals = evaluate(&Data::new(problem), &it).res;
    Ok(sol)
}

/// Scales each row by a power of two close to the inverse of its norm.
/// `X`, `y` and `Z` are unchanged; the dual of row `i` is `d_i` times the
/// dual of the scaled row.
fn equilibrate(problem: &SdpProblem) -> (SdpProblem, Vec<f64>) {
    let mut scaled = problem.clone();
    let mut d = Vec::with_capacity(problem.rows.len());
    for row in &mut scaled.rows {
        let norm = (row.entries.iter().map(|e| e.value * e.value).sum::<f64>()
            + row.free.iter().map(|f| f.1 * f.1).sum::<f64>())
        .sqrt();
        let di = if norm > 0.0 && norm.is_finite() {
            (-norm.log2().round()).exp2()
        } else {
            1.0
        };
        for e in &mut row.entries {
            e.value *= di;
        }
        for f in &mut row.free {
            f.1 *= di;
        }
        row.rhs *= di;
        d.push(di);
    }
    (scaled, d)
}

fn solve_equilibrated(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    let data = Data::new(problem);
    let projector = Projector::new(&data);
    let ntot: usize = data.sizes.iter().sum();
    let ntot = ntot.max(1) as f64;
    let mut it = initial_point(&data);
    let mut log = Vec::new();
    let mut best: Option<(f64, Iterate, Residuals)> = None;
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut best_iter = 0;
    let gamma = settings.step_fraction;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let st = evaluate(&data, &it);
        let mu = st.xz / ntot;
        let score = merit(&st.res, settings);
        if !score.is_finite() {
            status = SolveStatus::IllConditioned;
            break;
        }
        if best.as_ref().is_none_or(|(s, _, _)| score <= *s) {
            best = Some((score, clone_iterate(&it), st.res));
            best_iter = iter;
        }
        if score <= 1.0 {
            status = SolveStatus::Optimal;
            if settings.log_iterations {
                log.push(record(iter, &st, mu, f64::NAN, 0.0, 0.0));
            }
            break;
        }
        // Past the best iterate, lost accuracy rarely comes back.
        if iter == settings.max_iter || iter >= best_iter + STALL_WINDOW {
            if settings.log_iterations {
                log.push(record(iter, &st, mu, f64::NAN, 0.0, 0.0));
            }
            break;
        }
        // Infeasibility indicators.
        if iter > 5 {
            if st.bw > 0.0 && st.atw_z / st.bw < 1e-8 {
                status = SolveStatus::PrimalInfeasibleSuspected;
                break;
            }
            if st.cx < 0.0 && st.ax_by / (-st.cx) < 1e-8 {
                status = SolveStatus::DualInfeasibleSuspected;
                break;
            }
            let wn = it.w.amax();
            if wn > defaults::SDP_DIVERGENCE * (1.0 + data.norm_c) && st.bw > 0.0 {
                status = SolveStatus::PrimalInfeasibleSuspected;
                break;
            }
            let xn = it.x.iter().map(|m| m.amax()).fold(0.0f64, f64::max);
            if xn > defaults::SDP_DIVERGENCE * (1.0 + data.norm_b) && st.cx < 0.0 {
                status = SolveStatus::DualInfeasibleSuspected;
                break;
            }
        }

        // Factorizations and Nesterov-Todd scaling.
        let mut lx = Vec::with_capacity(it.x.len());
        let mut lz = Vec::with_capacity(it.z.len());
        let mut nt = Vec::with_capacity(it.z.len());
        let mut ok = true;
        for (x, z) in it.x.iter().zip(&it.z) {
            match (Cholesky::new(x.clone()), Cholesky::new(z.clone())) {
                (Some(cx), Some(cz)) => {
                    let (l, r) = (cx.l(), cz.l());
                    match NtScaling::new(&l, &r) {
                        Some(s) => nt.push(s),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                    lx.push(l);
                    lz.push(r);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            status = SolveStatus::IllConditioned;
            break;
        }
        let ws: Vec<DMatrix<f64>> = nt.iter().map(|s| s.w.clone()).collect();
        let mmat = data.schur(&ws, &ws);
        let Some(newton) = Newton::factor(
            mmat,
            &data.bmat,
            data.null.as_ref(),
            settings.regularization,
        ) else {
            status = SolveStatus::IllConditioned;
            break;
        };
        let wrw: Vec<DMatrix<f64>> = ws.iter().zip(&st.rd).map(|(w, r)| sym(w * r * w)).collect();

        // `dX + W dZ W = G (sigma mu V^-1 - V - L_V^-1(corr)) G^T`, and
        // `dX = rc - W rd W + W A^T(dw) W`.
        let direction = |sigma_mu: f64, corr: Option<&[DMatrix<f64>]>| -> Option<Direction> {
            let mut g: Vec<DMatrix<f64>> = Vec::with_capacity(it.x.len());
            for (b, s) in nt.iter().enumerate() {
                let n = s.lam.len();
                let mut t = DMatrix::zeros(n, n);
                for i in 0..n {
                    t[(i, i)] = sigma_mu / s.lam[i] - s.lam[i];
                }
                if let Some(c) = corr {
                    for j in 0..n {
                        for i in 0..n {
                            t[(i, j)] -= 2.0 * c[b][(i, j)] / (s.lam[i] + s.lam[j]);
                        }
                    }
                }
                g.push(sym(&s.g * t * s.g.transpose()) - &wrw[b]);
            }
            let h = &st.rp - data.a_op(&g);
            let (mut dw, mut dy) = newton.solve(&h, &st.rf)?;
            let op = |dw: &DVector<f64>| -> DVector<f64> {
                let t = data.at_op(dw);
                let v: Vec<DMatrix<f64>> =
                    (0..t.len()).map(|b| sym(&ws[b] * &t[b] * &ws[b])).collect();
                data.a_op(&v)
            };
            let hn = h.norm().max(1e-300);
            for _ in 0..OPERATOR_REFINEMENT {
                let eh = &h - op(&dw) - &data.bmat * &dy;
                let er = &st.rf - data.bmat.transpose() * &dw;
                if eh.norm() + er.norm() <= 1e-14 * hn {
                    break;
                }
                let (cw, cy) = newton.solve(&eh, &er)?;
                dw += cw;
                dy += cy;
            }
            let atdw = data.at_op(&dw);
            let mut dz = Vec::with_capacity(g.len());
            let mut dx = Vec::with_capacity(g.len());
            for (b, gb) in g.into_iter().enumerate() {
                dz.push(&st.rd[b] - &atdw[b]);
                dx.push(gb + sym(&ws[b] * &atdw[b] * &ws[b]));
            }
            Some(Direction { dx, dy, dw, dz })
        };

        // Predictor.
        let Some(pred) = direction(0.0, None) else {
            status = SolveStatus::IllConditioned;
            break;
        };
        let ap = step_bound(&lx, &pred.dx).min(1.0);
        let ad = step_bound(&lz, &pred.dz).min(1.0);
        let mut xz_aff = 0.0;
        for b in 0..it.x.len() {
            let xa = &it.x[b] + &pred.dx[b] * ap;
            let za = &it.z[b] + &pred.dz[b] * ad;
            xz_aff += xa.dot(&za);
        }
        let mu_aff = (xz_aff / ntot).max(0.0);
        let sigma = if mu > 0.0 {
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Corrector: the second-order term in the scaled space.
        let corr: Vec<DMatrix<f64>> = nt
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let dxs = &s.ginv * &pred.dx[b] * s.ginv.transpose();
                let dzs = s.g.transpose() * &pred.dz[b] * &s.g;
                sym(dxs * dzs)
            })
            .collect();
        let Some(mut dir) = direction(sigma * mu, Some(&corr)) else {
            status = SolveStatus::IllConditioned;
            break;
        };
        projector.apply(&data, &st, &mut dir);
        let alpha_p = (gamma * step_bound(&lx, &dir.dx)).min(1.0);
        let alpha_d = (gamma * step_bound(&lz, &dir.dz)).min(1.0);

        if settings.log_iterations {
            log.push(record(iter, &st, mu, sigma, alpha_p, alpha_d));
        }

        for b in 0..it.x.len() {
            it.x[b] += &dir.dx[b] * alpha_p;
            it.x[b] = sym(std::mem::replace(&mut it.x[b], DMatrix::zeros(0, 0)));
            it.z[b] += &dir.dz[b] * alpha_d;
            it.z[b] = sym(std::mem::replace(&mut it.z[b], DMatrix::zeros(0, 0)));
        }
        it.y += &dir.dy * alpha_p;
        it.w += &dir.dw * alpha_d;

        if alpha_p.max(alpha_d) < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                status = SolveStatus::IllConditioned;
                iterations = iter + 1;
                break;
            }
        } else {
            stalls = 0;
        }
    }

    // Fall back to the best iterate seen when the run ended badly.
    let (final_it, res) = match status {
        SolveStatus::Optimal
        | SolveStatus::PrimalInfeasibleSuspected
        | SolveStatus::DualInfeasibleSuspected => {
            let st = evaluate(&data, &it);
            (it, st.res)
        }
        _ => {
            let (score, bit, bres) = best.expect("at least one iterate evaluated");
            if score <= 100.0 {
                status = SolveStatus::NearOptimal;
            }
            (bit, bres)
        }
    };

    Ok(SdpSolution {
        status,
        blocks: final_it.x,
        free: final_it.y.iter().copied().collect(),
        dual: final_it.w.iter().copied().collect(),
        slack: final_it.z,
        residuals: res,
        iterations,
        log,
    })
}

/// Iterations without a better merit before the run stops.
const STALL_WINDOW: usize = 8;

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dw: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
}

fn step_bound(ls: &[DMatrix<f64>], ds: &[DMatrix<f64>]) -> f64 {
    ls.iter()
        .zip(ds)
        .map(|(l, d)| max_step(l, d))
        .fold(f64::INFINITY, f64::min)
}

fn clone_iterate(it: &Iterate) -> Iterate {
    Iterate {
        x: it.x.clone(),
        y: it.y.clone(),
        w: it.w.clone(),
        z: it.z.clone(),
    }
}

fn record(iter: usize, st: &State, mu: f64, sigma: f64, ap: f64, ad: f64) -> IterationRecord {
    IterationRecord {
        iteration: iter,
        primal_objective: st.res.primal_objective,
        dual_objective: st.res.dual_objective,
        relative_gap: st.res.relative_gap,
        primal_infeasibility: st.res.primal_infeasibility,
        dual_infeasibility: st.res.dual_infeasibility,
        complementarity: st.xz,
        infeasibility_slack: st.slack,
        mu,
        sigma,
        step_primal: ap,
        step_dual: ad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{verify_solution, BlockEntry, SdpRow};

    fn trace_problem() -> SdpProblem {
        // min tr X s.t. X11 = 1, X 2x2 PSD.
        let mut p = SdpProblem::new(vec![2], 0);
        p.objective = vec![BlockEntry::new(0, 0, 0, 1.0), BlockEntry::new(0, 1, 1, 1.0)];
        p.rows.push(SdpRow {
            entries: vec![BlockEntry::new(0, 0, 0, 1.0)],
            free: vec![],
            rhs: 1.0,
        });
        p
    }

    #[test]
    fn minimal_trace() {
        let p = trace_problem();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective() - 1.0).abs() < 1e-7);
        assert!((s.blocks[0][(0, 0)] - 1.0).abs() < 1e-7);
        assert!(s.blocks[0][(1, 1)].abs() < 1e-7);
    }

    #[test]
    fn scalar_with_free_variable() {
        // min C s.t. C - t = 5, t >= 0.
        let mut p = SdpProblem::new(vec![1], 1);
        p.objective_free = vec![1.0];
        p.rows.push(SdpRow {
            entries: vec![BlockEntry::new(0, 0, 0, -1.0)],
            free: vec![(0, 1.0)],
            rhs: 5.0,
        });
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.free[0] - 5.0).abs() < 1e-6, "{}", s.free[0]);
    }

    #[test]
    fn reported_residuals_match_recomputation() {
        let p = trace_problem();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        let r = verify_solution(&p, &s).unwrap();
        assert!((r.primal_infeasibility - s.residuals.primal_infeasibility).abs() <= 1e-10);
        assert!((r.dual_infeasibility - s.residuals.dual_infeasibility).abs() <= 1e-10);
        assert!((r.relative_gap - s.residuals.relative_gap).abs() <= 1e-10);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // X11 = -1 with X PSD has no solution.
        let mut p = SdpProblem::new(vec![2], 0);
        p.objective = vec![BlockEntry::new(0, 0, 0, 1.0)];
        p.rows.push(SdpRow {
            entries: vec![BlockEntry::new(0, 0, 0, 1.0)],
            free: vec![],
            rhs: -1.0,
        });
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!(!s.status.is_usable(), "{:?}", s.status);
    }

    #[test]
    fn unbounded_problem_is_flagged() {
        // min y with y free and no constraint tying it down beyond X11 - X22 = 0.
        let mut p = SdpProblem::new(vec![2], 1);
        p.objective_free = vec![1.0];
        p.rows.push(SdpRow {
            entries: vec![BlockEntry::new(0, 0, 0, 1.0)],
            free: vec![(0, 1.0)],
            rhs: 0.0,
        });
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert!(!s.status.is_usable(), "{:?}", s.status);
    }
}
