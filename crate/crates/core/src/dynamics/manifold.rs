use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::integrate::{first_retained, fmt_num, ExtremaTracker, Rk4, VectorField};
use super::linear::unstable_directions;
use crate::defaults::{EQUILIBRIUM_TOL, MANIFOLD_AMPLITUDE, MANIFOLD_DISCARD, RK4_STEP, SEED};
use crate::error::{Error, Result};
use crate::models::OdeModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSettings {
    /// Ensemble size. The first members are the deterministic seeds along
    /// each unstable direction, both signs.
    pub n_perturb: usize,
    pub amplitude: f64,
    /// Integration time per member.
    pub horizon: f64,
    pub h: f64,
    /// Leading fraction of each member discarded as transient.
    pub discard: f64,
    pub seed: u64,
    /// Quantities to track; empty means every registered quantity.
    pub quantities: Vec<String>,
    /// A member stops once `|f(x)|` falls below this, having settled onto an
    /// equilibrium.
    pub settle_tol: Option<f64>,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        ManifoldSettings {
            n_perturb: 2,
            amplitude: MANIFOLD_AMPLITUDE,
            horizon: 100.0,
            h: RK4_STEP,
            discard: MANIFOLD_DISCARD,
            seed: SEED,
            quantities: Vec::new(),
            settle_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    /// Along the unstable eigendirections of an equilibrium.
    UnstableManifold,
    /// Uniformly random directions around the base state.
    Random,
}

/// Extrema of one quantity over the whole ensemble, in original units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub quantity: String,
    pub normalization: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

impl EnsembleRow {
    pub fn reported_min(&self) -> f64 {
        self.min / self.normalization.unwrap_or(1.0)
    }

    pub fn reported_max(&self) -> f64 {
        self.max / self.normalization.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub model: String,
    pub base: Vec<f64>,
    pub seeding: Seeding,
    pub members: usize,
    pub diverged: usize,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleSummary {
    pub fn row(&self, quantity: &str) -> Option<&EnsembleRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    /// Folds in the extrema of another ensemble over the same model.
    pub fn merge(&mut self, other: &EnsembleSummary) -> Result<()> {
        if other.model != self.model {
            return Err(Error::Config {
                field: "model".into(),
                msg: format!(
                    "cannot merge ensembles of {} and {}",
                    self.model, other.model
                ),
            });
        }
        for o in &other.rows {
            match self.rows.iter_mut().find(|r| r.quantity == o.quantity) {
                Some(r) => {
                    if o.min < r.min {
                        r.min = o.min;
                        r.argmin.clone_from(&o.argmin);
                    }
                    if o.max > r.max {
                        r.max = o.max;
                        r.argmax.clone_from(&o.argmax);
                    }
                }
                None => self.rows.push(o.clone()),
            }
        }
        self.members += other.members;
        self.diverged += other.diverged;
        Ok(())
    }

    /// CSV with columns `quantity,min,max,argmin,argmax`; states are
    /// `;`-separated. Values are normalized unless `raw`.
    pub fn to_csv(&self, raw: bool) -> String {
        let mut out = String::from("quantity,min,max,argmin,argmax\n");
        let state = |s: &[f64]| s.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";");
        for r in &self.rows {
            let (lo, hi) = if raw {
                (r.min, r.max)
            } else {
                (r.reported_min(), r.reported_max())
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.quantity,
                fmt_num(lo),
                fmt_num(hi),
                state(&r.argmin),
                state(&r.argmax)
            );
        }
        out
    }
}

/// Initial states of the ensemble around `base`.
pub fn manifold_seeds(
    model: &OdeModel,
    base: &[f64],
    settings: &ManifoldSettings,
) -> Result<(Seeding, Vec<Vec<f64>>)> {
    let n = model.dim();
    if base.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: base.len(),
        });
    }
    if !(settings.amplitude > 0.0) {
        return Err(Error::Config {
            field: "amplitude".into(),
            msg: "must be positive".into(),
        });
    }
    let span: Vec<Vec<f64>> = if model.residual(base)? <= EQUILIBRIUM_TOL {
        unstable_directions(model, base)?
            .iter()
            // A conjugate pair spans the same real plane as its partner.
            .filter(|d| d.eigenvalue.im >= 0.0)
            .flat_map(|d| d.real_span())
            .map(unit)
            .collect()
    } else {
        Vec::new()
    };
    let seeding = if span.is_empty() {
        Seeding::Random
    } else {
        Seeding::UnstableManifold
    };
    let a = settings.amplitude;
    let shifted =
        |d: &[f64], s: f64| -> Vec<f64> { base.iter().zip(d).map(|(b, v)| b + s * v).collect() };
    let mut seeds = Vec::with_capacity(settings.n_perturb);
    for d in &span {
        for s in [a, -a] {
            if seeds.len() < settings.n_perturb {
                seeds.push(shifted(d, s));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    while seeds.len() < settings.n_perturb {
        let d: Vec<f64> = if span.is_empty() {
            unit((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        } else {
            let mut v = vec![0.0; n];
            for u in &span {
                let c: f64 = StandardNormal.sample(&mut rng);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi += c * ui;
                }
            }
            unit(v)
        };
        seeds.push(shifted(&d, a));
    }
    Ok((seeding, seeds))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

/// Integrates an ensemble of small perturbations of `base` and records the
/// extrema of the registered quantities over all members.
pub fn manifold_search(
    model: &OdeModel,
    base: &[f64],
    settings: &ManifoldSettings,
) -> Result<EnsembleSummary> {
    if !(settings.horizon > 0.0) {
        return Err(Error::Config {
            field: "horizon".into(),
            msg: "must be positive".into(),
        });
    }
    let quantities: Vec<_> = if settings.quantities.is_empty() {
        model.quantities.iter().collect()
    } else {
        settings
            .quantities
            .iter()
            .map(|q| model.quantity(q))
            .collect::<Result<_>>()?
    };
    let (seeding, seeds) = manifold_seeds(model, base, settings)?;
    let mut rk = Rk4::new(VectorField::of(model), settings.h)?;
    let steps = (settings.horizon / settings.h).ceil() as usize;
    let start = first_retained(steps + 1, settings.discard)?;
    let mut trackers: Vec<ExtremaTracker> = quantities
        .iter()
        .map(|q| ExtremaTracker::new(&q.phi))
        .collect();
    let mut diverged = 0;
    for seed in &seeds {
        let mut x = seed.clone();
        for k in 0..=steps {
            if k > 0 && !rk.step(&mut x) {
                diverged += 1;
                break;
            }
            if k >= start {
                let t = k as f64 * settings.h;
                for tr in &mut trackers {
                    tr.observe(t, &x);
                }
            }
            if k > 0
                && settings
                    .settle_tol
                    .is_some_and(|tol| norm(rk.last_rate()) <= tol)
            {
                break;
            }
        }
    }
    let rows = quantities
        .iter()
        .zip(trackers)
        .filter_map(|(q, tr)| {
            tr.finish().map(|e| EnsembleRow {
                quantity: q.name.clone(),
                normalization: q.normalization,
                min: e.min,
                max: e.max,
                argmin: e.argmin,
                argmax: e.argmax,
            })
        })
        .collect();
    Ok(EnsembleSummary {
        model: model.id.clone(),
        base: base.to_vec(),
        seeding,
        members: seeds.len(),
        diverged,
        rows,
    })
}

/// Search for states on long chaotic transients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransientSearch {
    /// Random starts are `reference + amplitude * u`, `u` uniform in the unit box.
    pub amplitude: f64,
    /// A start qualifies if it has not settled by this time.
    pub min_lifetime: f64,
    /// The returned state is the one reached at this time.
    pub sample_time: f64,
    /// `|f(x)|` below which a run counts as settled.
    pub settle_tol: f64,
    pub h: f64,
    pub seed: u64,
    pub max_tries: usize,
}

impl Default for TransientSearch {
    fn default() -> Self {
        TransientSearch {
            amplitude: 0.5,
            min_lifetime: 600.0,
            sample_time: 100.0,
            settle_tol: 1e-4,
            h: RK4_STEP,
            seed: SEED,
            max_tries: 1000,
        }
    }
}

/// Up to `count` states sampled from runs that stay unsettled for at least
/// `min_lifetime`, in the order found.
pub fn long_transient_states(
    model: &OdeModel,
    reference: &[f64],
    count: usize,
    search: &TransientSearch,
) -> Result<Vec<Vec<f64>>> {
    let n = model.dim();
    if reference.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: reference.len(),
        });
    }
    if !(search.sample_time >= 0.0 && search.sample_time <= search.min_lifetime) {
        return Err(Error::Config {
            field: "sample_time".into(),
            msg: "must lie in [0, min_lifetime]".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut rk = Rk4::new(VectorField::of(model), search.h)?;
    let steps = (search.min_lifetime / search.h).ceil() as usize;
    let sample = (search.sample_time / search.h).round() as usize;
    let mut out = Vec::new();
    for _ in 0..search.max_tries {
        if out.len() >= count {
            break;
        }
        let mut x: Vec<f64> = reference
            .iter()
            .map(|r| r + search.amplitude * rng.random_range(-1.0..=1.0))
            .collect();
        let mut kept = None;
        let mut alive = true;
        for k in 1..=steps {
            if !rk.step(&mut x) {
                alive = false;
                break;
            }
            if k == sample {
                kept = Some(x.clone());
            }
            if norm(rk.last_rate()) <= search.settle_tol {
                alive = false;
                break;
            }
        }
        if alive {
            out.push(kept.unwrap_or_else(|| x.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lorenz_standard, two_cycle};

    #[test]
    fn lorenz_seeds_both_halves() {
        let m = lorenz_standard();
        let (s, seeds) = manifold_seeds(&m, &[0.0; 3], &ManifoldSettings::default()).unwrap();
        assert_eq!(s, Seeding::UnstableManifold);
        assert_eq!(seeds.len(), 2);
        for k in 0..3 {
            assert_eq!(seeds[0][k], -seeds[1][k]);
        }
        let norm: f64 = seeds[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - MANIFOLD_AMPLITUDE).abs() < 1e-18);
    }

    #[test]
    fn spiral_seeds_use_real_and_imaginary_parts() {
        let settings = ManifoldSettings {
            n_perturb: 6,
            ..Default::default()
        };
        let (s, seeds) = manifold_seeds(&two_cycle(), &[0.0; 2], &settings).unwrap();
        assert_eq!(s, Seeding::UnstableManifold);
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn non_equilibrium_base_uses_random_seeds() {
        let settings = ManifoldSettings {
            n_perturb: 3,
            amplitude: 0.1,
            ..Default::default()
        };
        let (s, seeds) = manifold_seeds(&lorenz_standard(), &[1.0, 1.0, 1.0], &settings).unwrap();
        assert_eq!(s, Seeding::Random);
        for x in &seeds {
            let d: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt();
            assert!((d - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_summary() {
        let settings = ManifoldSettings {
            n_perturb: 3,
            amplitude: 0.5,
            horizon: 2.0,
            ..Default::default()
        };
        let m = lorenz_standard();
        let a = manifold_search(&m, &[1.0, 2.0, 3.0], &settings).unwrap();
        let b = manifold_search(&m, &[1.0, 2.0, 3.0], &settings).unwrap();
        assert_eq!(a.to_csv(false), b.to_csv(false));
        assert_eq!(a.rows.len(), m.quantities.len());
    }
}
