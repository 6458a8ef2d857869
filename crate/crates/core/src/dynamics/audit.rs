use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrate::Trajectory;
use crate::bounds::{BoundCertificate, GramSummary};
use crate::defaults::{AUDIT_BOX, AUDIT_SAMPLES, AUDIT_TOL, SEED};
use crate::error::{Error, Result};
use crate::poly::{parse_poly, PolyEvaluator};
use crate::Poly;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSettings {
    /// Uniform samples drawn from the box.
    pub samples: usize,
    /// Half-width of the box in solve (rescaled) coordinates.
    pub half_width: f64,
    pub seed: u64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            samples: AUDIT_SAMPLES,
            half_width: AUDIT_BOX,
            seed: SEED,
        }
    }
}

/// Smallest value of one constrained polynomial over the samples. Negative
/// margins are violations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub name: String,
    pub box_margin: f64,
    /// Where the box minimum occurs, in original coordinates.
    pub box_argmin: Vec<f64>,
    pub trajectory_margin: Option<f64>,
}

impl ConstraintAudit {
    pub fn worst(&self) -> f64 {
        self.trajectory_margin
            .map_or(self.box_margin, |t| t.min(self.box_margin))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub quantity: String,
    pub degree: u32,
    pub lambda: f64,
    /// Certified bound on `sign * Phi` in original units.
    pub bound: f64,
    pub samples: usize,
    pub trajectory_states: usize,
    /// Margins in units of `Phi / kappa`, in solve coordinates.
    pub constraints: Vec<ConstraintAudit>,
    /// Gram diagnostics recorded with the certificate.
    pub gram: Vec<GramSummary>,
    /// `bound - max sign * Phi` along the trajectory, in original units.
    pub bound_margin: Option<f64>,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates every SOS-constrained expression of `cert` (and each multiplier)
/// at uniform samples over a box and, when given, along a trajectory.
pub fn audit_certificate(
    cert: &BoundCertificate,
    settings: &AuditSettings,
    trajectory: Option<&Trajectory>,
) -> Result<AuditReport> {
    if !(settings.half_width > 0.0) {
        return Err(Error::Config {
            field: "half_width".into(),
            msg: "audit box must have positive width".into(),
        });
    }
    let n = cert.nvars();
    let scale = cert.scale();
    let (first, second, mults) = cert.constraint_polynomials()?;
    let mut named: Vec<(String, Poly)> = vec![
        ("V - Phi".to_string(), first),
        ("C - V - lambda f.grad V".to_string(), second),
    ];
    for (j, pair) in mults.chunks(2).enumerate() {
        named.push((format!("s1[{j}]"), pair[0].clone()));
        named.push((format!("s2[{j}]"), pair[1].clone()));
    }
    let evals: Vec<PolyEvaluator> = named.iter().map(|(_, p)| PolyEvaluator::new(p)).collect();
    let mut scratch = Vec::new();

    let mut box_min = vec![f64::INFINITY; evals.len()];
    let mut box_arg = vec![vec![0.0; n]; evals.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x = vec![0.0; n];
    let w = settings.half_width;
    for _ in 0..settings.samples {
        for xi in x.iter_mut() {
            *xi = rng.random_range(-w..=w);
        }
        for (k, e) in evals.iter().enumerate() {
            let v = e.eval_with(&x, &mut scratch);
            if v < box_min[k] {
                box_min[k] = v;
                box_arg[k].copy_from_slice(&x);
            }
        }
    }

    let mut traj_min: Option<Vec<f64>> = None;
    let mut bound_margin = None;
    if let Some(t) = trajectory {
        if t.states.iter().any(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t
                    .states
                    .iter()
                    .map(|s| s.len())
                    .find(|&l| l != n)
                    .unwrap_or(n),
            });
        }
        let mut mins = vec![f64::INFINITY; evals.len()];
        let phi = PolyEvaluator::new(&parse_poly(&cert.phi, n)?);
        let mut top = f64::NEG_INFINITY;
        for s in &t.states {
            for ((xi, si), c) in x.iter_mut().zip(s).zip(&scale) {
                *xi = si / c;
            }
            for (k, e) in evals.iter().enumerate() {
                mins[k] = mins[k].min(e.eval_with(&x, &mut scratch));
            }
            top = top.max(cert.sign() * phi.eval_with(s, &mut scratch));
        }
        if !t.states.is_empty() {
            traj_min = Some(mins);
            bound_margin = Some(cert.bound - top);
        }
    }

    let constraints: Vec<ConstraintAudit> = named
        .into_iter()
        .enumerate()
        .map(|(k, (name, _))| ConstraintAudit {
            name,
            box_margin: if settings.samples > 0 {
                box_min[k]
            } else {
                f64::INFINITY
            },
            box_argmin: box_arg[k].iter().zip(&scale).map(|(v, c)| v * c).collect(),
            trajectory_margin: traj_min.as_ref().map(|m| m[k]),
        })
        .collect();
    let worst_margin = constraints
        .iter()
        .map(ConstraintAudit::worst)
        .chain(bound_margin)
        .fold(f64::INFINITY, f64::min);
    Ok(AuditReport {
        quantity: cert.quantity.clone(),
        degree: cert.degree,
        lambda: cert.lambda,
        bound: cert.bound,
        samples: settings.samples,
        trajectory_states: trajectory.map_or(0, |t| t.len()),
        constraints,
        gram: cert.gram.clone(),
        bound_margin,
        worst_margin,
        tolerance: AUDIT_TOL,
        passed: worst_margin >= -AUDIT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{Direction, SolverStats};
    use crate::models::lorenz_standard;
    use crate::sdp::SolveStatus;

    fn trivial_certificate() -> BoundCertificate {
        BoundCertificate {
            model: lorenz_standard().to_config(),
            quantity: "zero".into(),
            phi: "0".into(),
            direction: Direction::Upper,
            degree: 2,
            lambda: 1.0,
            bound: 0.0,
            reported: 0.0,
            normalization: None,
            kappa: 1.0,
            symmetric: false,
            v: "0".into(),
            c_solve: 0.0,
            region: vec![],
            multipliers: vec![],
            gram: vec![],
            solver: SolverStats {
                status: SolveStatus::Optimal,
                iterations: 0,
                primal_infeasibility: 0.0,
                dual_infeasibility: 0.0,
                relative_gap: 0.0,
                solve_ms: 0.0,
            },
        }
    }

    #[test]
    fn trivial_certificate_has_zero_margins() {
        let t = Trajectory {
            model: "lorenz".into(),
            h: 0.1,
            states: vec![vec![1.0, 2.0, 3.0], vec![-4.0, 0.5, 20.0]],
            diverged: false,
        };
        let settings = AuditSettings {
            samples: 1000,
            ..Default::default()
        };
        let r = audit_certificate(&trivial_certificate(), &settings, Some(&t)).unwrap();
        assert_eq!(r.constraints.len(), 2);
        for c in &r.constraints {
            assert_eq!(c.box_margin, 0.0);
            assert_eq!(c.trajectory_margin, Some(0.0));
        }
        assert_eq!(r.bound_margin, Some(0.0));
        assert_eq!(r.worst_margin, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn rejects_empty_box() {
        let settings = AuditSettings {
            half_width: 0.0,
            ..Default::default()
        };
        assert!(audit_certificate(&trivial_certificate(), &settings, None).is_err());
    }
}
