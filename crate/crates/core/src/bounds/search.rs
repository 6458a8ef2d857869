use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::certificate::BoundCertificate;
use super::problem::{prepare, solve_prepared, trivial_regional_bound, BoundProblem, Prepared};
use crate::defaults::{LAMBDA_REL_TOL, LAMBDA_SCAN_MAX, LAMBDA_SCAN_MIN, LAMBDA_SCAN_POINTS};
use crate::error::{Error, Result};
use crate::sdp::SolveStatus;

/// Points of the coarse grid that brackets a golden-section search.
const BRACKET_POINTS: usize = 10;
/// Relative margin below which a regional bound counts as the region bound.
pub const TRIVIAL_TOL: f64 = 1e-6;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// How to search over `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LambdaStrategy {
    /// Geometric bracketing grid on `[lo, hi]`, then golden-section search
    /// between the neighbours of the best point. Suited to convex `C(lambda)`.
    Golden { lo: f64, hi: f64, rel_tol: f64 },
    /// Logarithmic scan, then golden-section refinement around the best
    /// scan point. Suited to non-convex `C(lambda)`.
    ScanRefine {
        lo: f64,
        hi: f64,
        points: usize,
        rel_tol: f64,
    },
    /// Only the listed values.
    Grid { lambdas: Vec<f64> },
}

impl LambdaStrategy {
    /// Golden section on `[1/d, lambda_max]` for global problems, scan and
    /// refine on `[1e-2, 1e3]` for regional ones.
    pub fn default_for(problem: &BoundProblem) -> Self {
        if problem.is_regional() {
            LambdaStrategy::ScanRefine {
                lo: LAMBDA_SCAN_MIN,
                hi: LAMBDA_SCAN_MAX,
                points: LAMBDA_SCAN_POINTS,
                rel_tol: LAMBDA_REL_TOL,
            }
        } else {
            LambdaStrategy::Golden {
                lo: 1.0 / problem.degree as f64,
                hi: problem.model.lambda_max,
                rel_tol: LAMBDA_REL_TOL,
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidBoundProblem(format!("lambda strategy: {m}")));
        match self {
            LambdaStrategy::Golden { lo, hi, rel_tol }
            | LambdaStrategy::ScanRefine {
                lo, hi, rel_tol, ..
            } => {
                if !(*lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return bad("need 0 < lo <= hi");
                }
                if !(*rel_tol > 0.0) {
                    return bad("tolerance must be positive");
                }
            }
            LambdaStrategy::Grid { lambdas } => {
                if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
                    return bad("grid values must be positive");
                }
            }
        }
        if let LambdaStrategy::ScanRefine { points, .. } = self {
            if *points < 2 {
                return bad("a scan needs at least two points");
            }
        }
        Ok(())
    }
}

/// One evaluated `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Bound in reporting units.
    pub bound: Option<f64>,
    /// Raw bound on `sign * Phi`.
    pub raw: Option<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub solve_ms: f64,
}

/// Result of a search over `lambda`.
#[derive(Clone, Debug)]
pub struct LambdaSearch {
    /// Best certificate found, if any `lambda` admitted one.
    pub certificate: Option<BoundCertificate>,
    /// Every evaluated point, sorted by `lambda`.
    pub sweep: Vec<SweepPoint>,
    /// Regional problems: `max Phi` over the region, in reporting units.
    pub trivial: Option<f64>,
}

impl LambdaSearch {
    pub fn lambda(&self) -> Option<f64> {
        self.certificate.as_ref().map(|c| c.lambda)
    }

    /// Certified bound in reporting units: the best certificate, or the
    /// region bound when that is tighter or nothing else was found.
    pub fn reported(&self) -> Option<f64> {
        let cert = self.certificate.as_ref().map(|c| c.reported);
        match (cert, self.trivial) {
            (Some(a), Some(b)) => Some(if a * self.sign() <= b * self.sign() {
                a
            } else {
                b
            }),
            (a, b) => a.or(b),
        }
    }

    /// True when the certificate does not improve on the region bound by
    /// more than `TRIVIAL_TOL`.
    pub fn is_trivial(&self) -> bool {
        let Some(t) = self.trivial else {
            return false;
        };
        match &self.certificate {
            None => true,
            Some(c) => self.sign() * (t - c.reported) <= TRIVIAL_TOL * t.abs().max(1.0),
        }
    }

    fn sign(&self) -> f64 {
        match self.certificate.as_ref().map(|c| c.direction) {
            Some(super::Direction::Lower) => -1.0,
            _ => 1.0,
        }
    }

    pub fn best(&self) -> Result<&BoundCertificate> {
        self.certificate.as_ref().ok_or_else(|| {
            let lo = self.sweep.first().map_or(f64::NAN, |p| p.lambda);
            let hi = self.sweep.last().map_or(f64::NAN, |p| p.lambda);
            Error::NoCertificate(format!(
                "no certificate for any of {} lambda values in [{lo}, {hi}]",
                self.sweep.len()
            ))
        })
    }
}

/// Memoizing evaluator of `lambda -> best raw bound`.
struct Evaluator<'a> {
    problem: &'a BoundProblem,
    prep: Prepared,
    points: BTreeMap<u64, (SweepPoint, Option<BoundCertificate>)>,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a BoundProblem) -> Result<Self> {
        Ok(Evaluator {
            problem,
            prep: prepare(problem)?,
            points: BTreeMap::new(),
        })
    }

    /// Raw bound, or `+inf` without a certificate.
    fn eval(&mut self, lambda: f64) -> Result<f64> {
        let key = lambda.to_bits();
        if let Some((p, _)) = self.points.get(&key) {
            return Ok(p.raw.unwrap_or(f64::INFINITY));
        }
        let r = solve_prepared(self.problem, &self.prep, lambda)?;
        let point = SweepPoint {
            lambda,
            bound: r.reported,
            raw: r.bound,
            status: r.status,
            iterations: r.iterations,
            solve_ms: r.solve_ms,
        };
        let v = point.raw.unwrap_or(f64::INFINITY);
        self.points.insert(key, (point, r.certificate));
        Ok(v)
    }

    fn golden(&mut self, mut a: f64, mut b: f64, rel_tol: f64) -> Result<()> {
        if a >= b {
            self.eval(a)?;
            return Ok(());
        }
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = self.eval(x1)?;
        let mut f2 = self.eval(x2)?;
        while b - a > rel_tol * 0.5 * (a + b) {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = self.eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = self.eval(x2)?;
            }
        }
        Ok(())
    }

    /// Golden search between the neighbours of the best evaluated point.
    fn refine_around_best(&mut self, rel_tol: f64) -> Result<()> {
        let pts: Vec<(f64, f64)> = self
            .points
            .values()
            .map(|(p, _)| (p.lambda, p.raw.unwrap_or(f64::INFINITY)))
            .collect::<Vec<_>>();
        let mut sorted = pts;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(k) = best_index(&sorted) else {
            return Ok(());
        };
        let a = sorted[k.saturating_sub(1)].0;
        let b = sorted[(k + 1).min(sorted.len() - 1)].0;
        self.golden(a, b, rel_tol)
    }

    fn finish(self, trivial: Option<f64>) -> LambdaSearch {
        let mut sweep = Vec::with_capacity(self.points.len());
        let mut best: Option<BoundCertificate> = None;
        for (p, c) in self.points.into_values() {
            if let Some(c) = c {
                if best.as_ref().is_none_or(|b| c.bound < b.bound) {
                    best = Some(c);
                }
            }
            sweep.push(p);
        }
        sweep.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        LambdaSearch {
            certificate: best,
            sweep,
            trivial,
        }
    }
}

fn best_index(pts: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in pts.iter().enumerate() {
        if p.1.is_finite() && best.is_none_or(|b| p.1 < pts[b].1) {
            best = Some(i);
        }
    }
    best
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo * (r * k as f64).exp()
            }
        })
        .collect()
}

/// Searches over `lambda` for the smallest certified bound. The model's
/// special values of `lambda` are always tried as well.
pub fn optimize_lambda(problem: &BoundProblem, strategy: &LambdaStrategy) -> Result<LambdaSearch> {
    strategy.validate()?;
    let mut ev = Evaluator::new(problem)?;
    let grid = match strategy {
        LambdaStrategy::Golden { lo, hi, .. } => geometric(*lo, *hi, BRACKET_POINTS),
        LambdaStrategy::ScanRefine { lo, hi, points, .. } => geometric(*lo, *hi, *points),
        LambdaStrategy::Grid { lambdas } => lambdas.clone(),
    };
    for &l in grid.iter().chain(&problem.model.special_lambdas) {
        ev.eval(l)?;
    }
    match strategy {
        LambdaStrategy::Golden { rel_tol, .. } | LambdaStrategy::ScanRefine { rel_tol, .. } => {
            ev.refine_around_best(*rel_tol)?;
        }
        LambdaStrategy::Grid { .. } => {}
    }
    let trivial = trivial_regional_bound(problem)?.map(|raw| problem.report(raw));
    Ok(ev.finish(trivial))
}

/// Evaluates `grid`, then refines between the neighbours of its best point.
pub(crate) fn refine_from_grid(
    problem: &BoundProblem,
    grid: &[f64],
    rel_tol: f64,
) -> Result<LambdaSearch> {
    let mut ev = Evaluator::new(problem)?;
    for &l in grid {
        ev.eval(l)?;
    }
    ev.refine_around_best(rel_tol)?;
    Ok(ev.finish(None))
}

/// Solves at each listed `lambda`, for plotting `C(lambda)`.
pub fn sweep(problem: &BoundProblem, lambdas: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut ev = Evaluator::new(problem)?;
    for &l in lambdas {
        ev.eval(l)?;
    }
    let mut out: Vec<SweepPoint> = ev.points.into_values().map(|(p, _)| p).collect();
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(out)
}

/// CSV with columns `lambda,C,status`; `C` is empty without a certificate.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("lambda,C,status\n");
    for p in points {
        let c = p.bound.map(|b| format!("{b:.10}")).unwrap_or_default();
        let _ = writeln!(out, "{:.10},{c},{}", p.lambda, p.status);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_hits_endpoints() {
        let g = geometric(0.25, 8.0, 6);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], 0.25);
        assert_eq!(g[5], 8.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn best_index_skips_infeasible() {
        let pts = [
            (0.1, f64::INFINITY),
            (0.2, 3.0),
            (0.3, 2.0),
            (0.4, f64::INFINITY),
        ];
        assert_eq!(best_index(&pts), Some(2));
        assert_eq!(best_index(&[(1.0, f64::INFINITY)]), None);
    }
}
