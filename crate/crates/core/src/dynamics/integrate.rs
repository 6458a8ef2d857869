use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::defaults::DIVERGENCE_CAP;
use crate::error::{Error, Result};
use crate::models::OdeModel;
use crate::poly::{PolyEvaluator, SystemEvaluator};
use crate::Poly;

/// States sampled at a uniform spacing `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: String,
    pub h: f64,
    /// `states[k]` is the state at time `k * h`; `states[0]` is the initial state.
    pub states: Vec<Vec<f64>>,
    /// True when the run stopped early because the state left the cap.
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// CSV with columns `t,<var names>`.
    pub fn to_csv(&self, var_names: &[String]) -> String {
        let mut out = String::from("t");
        for v in var_names {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let _ = write!(out, "{}", fmt_num(self.time(k)));
            for v in s {
                let _ = write!(out, ",{}", fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Compiled right-hand side of an ODE.
#[derive(Clone, Debug)]
pub struct VectorField {
    sys: SystemEvaluator,
}

impl VectorField {
    pub fn new(f: &[Poly]) -> Self {
        VectorField {
            sys: SystemEvaluator::new(f),
        }
    }

    pub fn of(model: &OdeModel) -> Self {
        VectorField::new(&model.f)
    }

    pub fn dim(&self) -> usize {
        self.sys.outputs()
    }

    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) {
        self.sys.eval_into(x, out);
    }
}

/// Classical fourth-order Runge-Kutta with a fixed step.
#[derive(Clone, Debug)]
pub struct Rk4 {
    field: VectorField,
    h: f64,
    cap: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(field: VectorField, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config {
                field: "h".into(),
                msg: format!("step must be positive, got {h}"),
            });
        }
        let n = field.dim();
        Ok(Rk4 {
            field,
            h,
            cap: DIVERGENCE_CAP,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        })
    }

    /// Sets the state norm past which a run counts as divergent.
    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `f` at the state the last step started from.
    pub fn last_rate(&self) -> &[f64] {
        &self.k[0]
    }

    /// Advances `x` by one step. Returns false, leaving `x` unchanged, if the
    /// new state is not finite or exceeds the cap.
    pub fn step(&mut self, x: &mut [f64]) -> bool {
        let h = self.h;
        let [k1, k2, k3, k4] = &mut self.k;
        self.field.eval_into(x, k1);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *t = xi + 0.5 * h * ki;
        }
        self.field.eval_into(&self.tmp, k2);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *t = xi + 0.5 * h * ki;
        }
        self.field.eval_into(&self.tmp, k3);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *t = xi + h * ki;
        }
        self.field.eval_into(&self.tmp, k4);
        let mut norm2 = 0.0;
        for i in 0..x.len() {
            let v = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            self.tmp[i] = v;
            norm2 += v * v;
        }
        if !(norm2.sqrt() <= self.cap) {
            return false;
        }
        x.copy_from_slice(&self.tmp);
        true
    }

    /// Runs `steps` steps from `x0`, keeping every `stride`-th state.
    pub fn run(
        &mut self,
        model: &str,
        x0: &[f64],
        steps: usize,
        stride: usize,
    ) -> Result<Trajectory> {
        check_start(self.field.dim(), x0)?;
        let stride = stride.max(1);
        let mut x = x0.to_vec();
        let mut states = Vec::with_capacity(steps / stride + 1);
        states.push(x.clone());
        let mut diverged = false;
        for s in 1..=steps {
            if !self.step(&mut x) {
                diverged = true;
                break;
            }
            if s % stride == 0 {
                states.push(x.clone());
            }
        }
        Ok(Trajectory {
            model: model.to_string(),
            h: self.h * stride as f64,
            states,
            diverged,
        })
    }
}

fn check_start(n: usize, x0: &[f64]) -> Result<()> {
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config {
            field: "x0".into(),
            msg: "initial state must be finite".into(),
        });
    }
    Ok(())
}

/// `n` RK4 steps of size `h` from `x0`, keeping every state.
pub fn integrate_rk4(model: &OdeModel, x0: &[f64], h: f64, n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::Config {
            field: "steps".into(),
            msg: "need at least one step".into(),
        });
    }
    Rk4::new(VectorField::of(model), h)?.run(&model.id, x0, n, 1)
}

/// Extreme values of a quantity over part of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

/// Running minimum and maximum of one polynomial.
#[derive(Clone, Debug)]
pub(crate) struct ExtremaTracker {
    phi: PolyEvaluator,
    scratch: Vec<f64>,
    best: Option<Extrema>,
}

impl ExtremaTracker {
    pub(crate) fn new(phi: &Poly) -> Self {
        ExtremaTracker {
            phi: PolyEvaluator::new(phi),
            scratch: Vec::new(),
            best: None,
        }
    }

    pub(crate) fn observe(&mut self, t: f64, x: &[f64]) {
        let v = self.phi.eval_with(x, &mut self.scratch);
        match &mut self.best {
            None => {
                self.best = Some(Extrema {
                    min: v,
                    max: v,
                    argmin: x.to_vec(),
                    argmax: x.to_vec(),
                    t_min: t,
                    t_max: t,
                })
            }
            Some(e) => {
                if v < e.min {
                    e.min = v;
                    e.argmin.copy_from_slice(x);
                    e.t_min = t;
                }
                if v > e.max {
                    e.max = v;
                    e.argmax.copy_from_slice(x);
                    e.t_max = t;
                }
            }
        }
    }

    pub(crate) fn finish(self) -> Option<Extrema> {
        self.best
    }
}

/// First retained index after discarding the fraction `discard` of `len`.
pub(crate) fn first_retained(len: usize, discard: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&discard) {
        return Err(Error::Config {
            field: "discard".into(),
            msg: format!("must lie in [0, 1), got {discard}"),
        });
    }
    Ok((discard * len as f64).floor() as usize)
}

/// Minimum and maximum of `phi` over the states left after dropping the
/// leading fraction `discard`.
pub fn trajectory_extrema(traj: &Trajectory, phi: &Poly, discard: f64) -> Result<Extrema> {
    let start = first_retained(traj.len(), discard)?;
    if phi.nvars() != traj.states.first().map_or(phi.nvars(), |s| s.len()) {
        return Err(Error::DimensionMismatch {
            expected: phi.nvars(),
            found: traj.states[0].len(),
        });
    }
    let mut tr = ExtremaTracker::new(phi);
    for (k, s) in traj.states.iter().enumerate().skip(start) {
        tr.observe(traj.time(k), s);
    }
    tr.finish().ok_or(Error::EmptyTrajectory { discard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lorenz_standard;

    fn decay() -> VectorField {
        VectorField::new(&[Poly::var(1, 0).scale(&-1.0)])
    }

    fn decay_error(h: f64) -> f64 {
        let mut rk = Rk4::new(decay(), h).unwrap();
        let mut x = [1.0];
        let n = (1.0 / h).round() as usize;
        for _ in 0..n {
            rk.step(&mut x);
        }
        (x[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn exponential_decay() {
        let e = decay_error(0.01);
        assert!(e < 1e-9, "error {e}");
    }

    #[test]
    fn fourth_order() {
        let ratio = decay_error(0.02) / decay_error(0.01);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn equilibrium_is_fixed() {
        let m = lorenz_standard();
        let t = integrate_rk4(&m, &m.equilibria[1], 0.005, 200).unwrap();
        for s in &t.states {
            for (a, b) in s.iter().zip(&m.equilibria[1]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn divergence_is_flagged() {
        // dx/dt = x^2 blows up at t = 1 from x = 1.
        let f = Poly::var(1, 0).pow(2);
        let mut rk = Rk4::new(VectorField::new(&[f]), 0.01)
            .unwrap()
            .with_cap(1e6);
        let t = rk.run("blowup", &[1.0], 1000, 1).unwrap();
        assert!(t.diverged);
        assert!(t.len() < 1001);
        assert!(t.states.iter().all(|s| s[0].abs() <= 1e6));
    }

    #[test]
    fn extrema_and_discard() {
        let t = Trajectory {
            model: "m".into(),
            h: 1.0,
            states: vec![vec![5.0], vec![-1.0], vec![2.0], vec![0.5]],
            diverged: false,
        };
        let x = Poly::var(1, 0);
        let e = trajectory_extrema(&t, &x, 0.0).unwrap();
        assert_eq!((e.min, e.max, e.t_min, e.t_max), (-1.0, 5.0, 1.0, 0.0));
        let e = trajectory_extrema(&t, &x, 0.5).unwrap();
        assert_eq!((e.min, e.max), (0.5, 2.0));
        let c = trajectory_extrema(&t, &Poly::constant(1, 3.0), 0.0).unwrap();
        assert_eq!((c.min, c.max), (3.0, 3.0));
        assert!(trajectory_extrema(&t, &x, 1.0).is_err());
        let empty = Trajectory {
            states: vec![],
            ..t
        };
        assert!(matches!(
            trajectory_extrema(&empty, &x, 0.0),
            Err(Error::EmptyTrajectory { .. })
        ));
    }

    #[test]
    fn csv_header() {
        let t = Trajectory {
            model: "m".into(),
            h: 0.5,
            states: vec![vec![1.0, 2.0]],
            diverged: false,
        };
        let csv = t.to_csv(&["x".into(), "y".into()]);
        assert!(csv.starts_with("t,x,y\n0.000000000000e0,1.000000000000e0,2.000000000000e0\n"));
    }
}
