use serde::{Deserialize, Serialize};

use super::certificate::BoundCertificate;
use super::problem::{BoundProblem, Direction};
use super::search::{optimize_lambda, refine_from_grid, LambdaSearch, LambdaStrategy};
use crate::defaults::{BALL_CENTER_TOL, LAMBDA_REL_TOL};
use crate::error::{Error, Result};
use crate::models::{OdeModel, Quantity};
use crate::poly::parse_poly;
use crate::sdp::SolverSettings;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSettings {
    /// Bracket of the centre height `z0`.
    pub z_lo: f64,
    pub z_hi: f64,
    /// Relative width of the `z0` bracket at which the search stops.
    pub z_rel_tol: f64,
    pub lambda_rel_tol: f64,
    pub solver: SolverSettings,
}

impl BallSettings {
    /// `z0` in `[0, 2 r]` for a model with parameter `r`, else `[0, 2 scale]`.
    pub fn for_model(model: &OdeModel) -> Self {
        let hi = match model.parameters.get("r") {
            Some(r) => 2.0 * r,
            None => 2.0 * model.scale.last().copied().unwrap_or(1.0),
        };
        BallSettings {
            z_lo: 0.0,
            z_hi: hi,
            z_rel_tol: BALL_CENTER_TOL,
            lambda_rel_tol: LAMBDA_REL_TOL,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BallResult {
    pub z0: f64,
    pub radius: f64,
    pub lambda: f64,
    /// Certificate for `x^2 + y^2 + (z - z0)^2 <= radius^2`.
    pub certificate: BoundCertificate,
    /// Every evaluated `(z0, radius)`, sorted by `z0`.
    pub trace: Vec<(f64, f64)>,
}

fn ball_quantity(n: usize, z0: f64) -> Result<Quantity> {
    let phi = parse_poly(
        &format!("x1^2 + x2^2 + x3^2 + {}*x3 + {}", -2.0 * z0, z0 * z0),
        n,
    )?;
    Ok(Quantity {
        name: format!("ball(z0={z0})"),
        phi,
        normalization: None,
    })
}

/// Smallest ball centred at `(0, 0, z0)` that a degree-`d` certificate
/// shows to contain the attractor. Golden-section search over `z0`, each
/// step optimizing `lambda` near the previous optimum.
pub fn min_ball(model: &OdeModel, degree: u32, settings: &BallSettings) -> Result<BallResult> {
    if model.dim() != 3 {
        return Err(Error::InvalidBoundProblem(format!(
            "min_ball needs a three-dimensional model, {} has {} variables",
            model.id,
            model.dim()
        )));
    }
    if !(settings.z_hi > settings.z_lo) || !(settings.z_rel_tol > 0.0) {
        return Err(Error::InvalidBoundProblem(
            "min_ball needs z_lo < z_hi and a positive tolerance".into(),
        ));
    }
    let mut warm: Option<f64> = None;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, f64, BoundCertificate)> = None;
    let mut eval = |z0: f64| -> Result<f64> {
        let mut p = BoundProblem::new(
            model.clone(),
            ball_quantity(model.dim(), z0)?,
            Direction::Upper,
            degree,
        );
        p.settings = settings.solver.clone();
        let mut s: Option<LambdaSearch> = match warm {
            Some(l) => Some(refine_from_grid(
                &p,
                &[0.8 * l, l, 1.25 * l],
                settings.lambda_rel_tol,
            )?),
            None => None,
        };
        if s.as_ref().is_none_or(|s| s.certificate.is_none()) {
            let strategy = match LambdaStrategy::default_for(&p) {
                LambdaStrategy::Golden { lo, hi, .. } => LambdaStrategy::Golden {
                    lo,
                    hi,
                    rel_tol: settings.lambda_rel_tol,
                },
                other => other,
            };
            s = Some(optimize_lambda(&p, &strategy)?);
        }
        let Some(cert) = s.and_then(|s| s.certificate) else {
            trace.push((z0, f64::INFINITY));
            return Ok(f64::INFINITY);
        };
        let c = cert.bound;
        warm = Some(cert.lambda);
        trace.push((z0, c.max(0.0).sqrt()));
        if best.as_ref().is_none_or(|(b, _, _)| c < *b) {
            best = Some((c, z0, cert));
        }
        Ok(c)
    };

    let (mut a, mut b) = (settings.z_lo, settings.z_hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > settings.z_rel_tol * (0.5 * (a + b)).abs().max(1.0) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        }
    }
    let Some((c, z0, certificate)) = best else {
        return Err(Error::NoCertificate(format!(
            "no degree-{degree} ball certificate for any centre"
        )));
    };
    trace.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(BallResult {
        z0,
        radius: c.max(0.0).sqrt(),
        lambda: certificate.lambda,
        certificate,
        trace,
    })
}
