use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use attractor_bounds::bounds::{
    min_ball, optimize_lambda, sweep, BallSettings, BoundCertificate, BoundProblem, Direction,
    LambdaStrategy, Region, SweepPoint,
};
use attractor_bounds::defaults::{AUDIT_BOX, AUDIT_SAMPLES, RK4_STEP, SEED};
use attractor_bounds::dynamics::{
    audit_certificate, integrate_rk4, long_transient_states, manifold_search, AuditSettings,
    EnsembleSummary, ManifoldSettings, TransientSearch,
};
use attractor_bounds::models::OdeModel;
use attractor_bounds::poly::parse_poly;
use attractor_bounds::{Error, Result};

use crate::config::{config_err, CommandKind, ExperimentConfig};

/// What a command produced, for the exit status.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Some solve produced no certificate.
    SolverFailure,
    /// A certificate audit found a violation.
    AuditFailure,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let command = cfg
        .command
        .ok_or_else(|| config_err("command", "no command given"))?;
    let (text, outcome) = match command {
        CommandKind::Bound => bound(cfg, false)?,
        CommandKind::BoundLocal => bound(cfg, true)?,
        CommandKind::Sweep => (sweep_table(cfg)?, Outcome::Ok),
        CommandKind::MinBall => ball(cfg)?,
        CommandKind::Simulate => (simulate(cfg)?, Outcome::Ok),
        CommandKind::ManifoldSearch => (ensemble(cfg)?.to_csv(cfg.raw), Outcome::Ok),
        CommandKind::Verify => verify(cfg)?,
        CommandKind::ExportModel => (cfg.model()?.to_toml()?, Outcome::Ok),
    };
    emit(cfg.output.as_deref(), &text)?;
    Ok(outcome)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn problem(
    cfg: &ExperimentConfig,
    model: &OdeModel,
    degree: u32,
    local: bool,
) -> Result<BoundProblem> {
    let q = cfg.quantity(model)?;
    let mut p = BoundProblem::new(model.clone(), q, cfg.direction(), degree);
    p.settings = cfg.solver();
    p.symmetrize = cfg.symmetry.unwrap_or(true);
    if local {
        p = match &cfg.region {
            Some(g) => {
                p.region = Some(Region {
                    g: vec![parse_poly(g, model.dim())?],
                    multiplier_degree: cfg.multiplier_degree,
                });
                p
            }
            None => {
                let mut p = p.with_default_region()?;
                if let Some(r) = &mut p.region {
                    r.multiplier_degree = cfg.multiplier_degree;
                }
                p
            }
        };
    } else if cfg.region.is_some() {
        return Err(config_err(
            "region",
            "only bound-local and sweep take a region",
        ));
    }
    p.validate()?;
    Ok(p)
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.10}")).unwrap_or_default()
}

fn fmt_ms(cfg: &ExperimentConfig, ms: f64) -> String {
    if cfg.no_timing {
        String::new()
    } else {
        format!("{ms:.1}")
    }
}

fn cert_name(cert: &BoundCertificate, local: bool) -> String {
    let q: String = cert
        .quantity
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let dir = match cert.direction {
        Direction::Upper => "upper",
        Direction::Lower => "lower",
    };
    let kind = if local { "-local" } else { "" };
    format!("{}-{q}-{dir}{kind}-d{}.json", cert.model.id, cert.degree)
}

fn write_certificate(
    cfg: &ExperimentConfig,
    cert: &BoundCertificate,
    name: String,
) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(name);
    let mut cert = cert.clone();
    if cfg.no_timing {
        cert.solver.solve_ms = 0.0;
    }
    std::fs::write(&path, cert.to_json()?)?;
    Ok(path)
}

/// Table `degree,bound,lambda,solve_ms,iterations`, one row per degree.
fn bound(cfg: &ExperimentConfig, local: bool) -> Result<(String, Outcome)> {
    let model = cfg.model()?;
    let mut out = String::from("degree,bound,lambda,solve_ms,iterations\n");
    let mut outcome = Outcome::Ok;
    for d in cfg.degrees()? {
        let p = problem(cfg, &model, d, local)?;
        let strategy = cfg
            .lambda
            .clone()
            .unwrap_or_else(|| LambdaStrategy::default_for(&p));
        let s = optimize_lambda(&p, &strategy)?;
        let ms: f64 = s.sweep.iter().map(|pt| pt.solve_ms).sum();
        let iters: usize = s.sweep.iter().map(|pt| pt.iterations).sum();
        let value = s
            .reported()
            .map(|r| if cfg.raw { r * p.report_scale() } else { r });
        match &s.certificate {
            Some(c) => {
                let path = write_certificate(cfg, c, cert_name(c, local))?;
                eprintln!("degree {d}: certificate {}", path.display());
            }
            None => {
                eprintln!("degree {d}: {}", s.best().unwrap_err());
                if value.is_none() {
                    outcome = Outcome::SolverFailure;
                }
            }
        }
        let _ = writeln!(
            out,
            "{d},{},{},{},{iters}",
            fmt_value(value),
            fmt_value(s.lambda()),
            fmt_ms(cfg, ms)
        );
    }
    Ok((out, outcome))
}

/// CSV `lambda,C,status` at a single degree.
fn sweep_table(cfg: &ExperimentConfig) -> Result<String> {
    let model = cfg.model()?;
    let degree = match cfg.degrees()?.as_slice() {
        [d] => *d,
        _ => return Err(config_err("degrees", "sweep takes exactly one degree")),
    };
    let local = cfg.region.is_some();
    let p = problem(cfg, &model, degree, local)?;
    let points = sweep(&p, &cfg.lambda_values()?)?;
    Ok(sweep_csv(
        &points,
        if cfg.raw { p.report_scale() } else { 1.0 },
    ))
}

fn sweep_csv(points: &[SweepPoint], factor: f64) -> String {
    let mut out = String::from("lambda,C,status\n");
    for p in points {
        let _ = writeln!(
            out,
            "{:.10},{},{}",
            p.lambda,
            fmt_value(p.bound.map(|b| b * factor)),
            p.status
        );
    }
    out
}

/// Table `degree,z0,radius,lambda,solve_ms`.
fn ball(cfg: &ExperimentConfig) -> Result<(String, Outcome)> {
    let model = cfg.model()?;
    let mut settings = BallSettings::for_model(&model);
    settings.solver = cfg.solver();
    let mut out = String::from("degree,z0,radius,lambda,solve_ms\n");
    for d in cfg.degrees()? {
        let t = Instant::now();
        let r = min_ball(&model, d, &settings)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        write_certificate(cfg, &r.certificate, format!("{}-ball-d{d}.json", model.id))?;
        let _ = writeln!(
            out,
            "{d},{:.10},{:.10},{:.10},{}",
            r.z0,
            r.radius,
            r.lambda,
            fmt_ms(cfg, ms)
        );
    }
    Ok((out, Outcome::Ok))
}

fn simulate(cfg: &ExperimentConfig) -> Result<String> {
    let model = cfg.model()?;
    let x0 = cfg
        .x0
        .clone()
        .ok_or_else(|| config_err("x0", "simulate needs an initial state"))?;
    let steps = cfg
        .steps
        .ok_or_else(|| config_err("steps", "simulate needs a step count"))?;
    let h = cfg.h.unwrap_or(RK4_STEP);
    let stride = cfg.stride.unwrap_or(1).max(1);
    let mut t = integrate_rk4(&model, &x0, h, steps)?;
    if stride > 1 {
        t.states = t.states.into_iter().step_by(stride).collect();
        t.h *= stride as f64;
    }
    if t.diverged {
        eprintln!("trajectory diverged after {} steps", (t.len() - 1) * stride);
    }
    Ok(t.to_csv(&model.var_names))
}

fn ensemble(cfg: &ExperimentConfig) -> Result<EnsembleSummary> {
    let model = cfg.model()?;
    let base = cfg.base_state(&model)?;
    let defaults = ManifoldSettings::default();
    let settings = ManifoldSettings {
        n_perturb: cfg.n_perturb.unwrap_or(defaults.n_perturb),
        amplitude: cfg.amplitude.unwrap_or(defaults.amplitude),
        horizon: cfg.horizon.unwrap_or(defaults.horizon),
        h: cfg.h.unwrap_or(defaults.h),
        discard: cfg.discard.unwrap_or(defaults.discard),
        seed: cfg.seed.unwrap_or(SEED),
        quantities: cfg.quantities.clone(),
        settle_tol: cfg.settle_tol,
    };
    let Some(k) = cfg.transient_bases else {
        return manifold_search(&model, &base, &settings);
    };
    let mut search = TransientSearch {
        seed: settings.seed,
        h: settings.h,
        ..TransientSearch::default()
    };
    if let Some(a) = cfg.transient_amplitude {
        search.amplitude = a;
    }
    if let Some(l) = cfg.transient_lifetime {
        search.min_lifetime = l;
    }
    let bases = long_transient_states(&model, &base, k, &search)?;
    if bases.len() < k {
        eprintln!("found {} of {k} long-transient states", bases.len());
    }
    let mut total: Option<EnsembleSummary> = None;
    for b in &bases {
        let s = manifold_search(&model, b, &settings)?;
        match &mut total {
            Some(t) => t.merge(&s)?,
            None => total = Some(s),
        }
    }
    total.ok_or_else(|| Error::NoCertificate("no long-transient state found".into()))
}

fn verify(cfg: &ExperimentConfig) -> Result<(String, Outcome)> {
    let path = cfg
        .certificate
        .as_ref()
        .ok_or_else(|| config_err("certificate", "verify needs a certificate file"))?;
    let cert = BoundCertificate::from_json(&std::fs::read_to_string(path)?)?;
    let settings = AuditSettings {
        samples: cfg.samples.unwrap_or(AUDIT_SAMPLES),
        half_width: cfg.half_width.unwrap_or(AUDIT_BOX),
        seed: cfg.seed.unwrap_or(SEED),
    };
    let trajectory = match (&cfg.x0, cfg.steps) {
        (Some(x0), Some(n)) => Some(integrate_rk4(
            &cert.ode_model()?,
            x0,
            cfg.h.unwrap_or(RK4_STEP),
            n,
        )?),
        (None, None) => None,
        _ => return Err(config_err("x0", "a trajectory needs both x0 and steps")),
    };
    let report = audit_certificate(&cert, &settings, trajectory.as_ref())?;
    let outcome = if report.passed {
        Outcome::Ok
    } else {
        Outcome::AuditFailure
    };
    eprintln!(
        "audit {}: worst margin {:.3e}",
        if report.passed { "passed" } else { "FAILED" },
        report.worst_margin
    );
    Ok((report.to_json()? + "\n", outcome))
}
