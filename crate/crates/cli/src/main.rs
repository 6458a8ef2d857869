//! Command-line driver: one experiment per invocation, configured by flags,
//! a TOML file, or both (flags win).

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use attractor_bounds::bounds::{Direction, LambdaStrategy};
use attractor_bounds::defaults::LAMBDA_REL_TOL;
use attractor_bounds::Error;
use clap::{Args, Parser, Subcommand};

use config::{parse_list, CommandKind, ExperimentConfig};
use run::Outcome;

#[derive(Parser)]
#[command(name = "attractor-bounds", version)]
#[command(about = "Bounds on extreme values over attractors of polynomial ODEs")]
struct Cli {
    /// Experiment file (TOML); flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Report raw values instead of normalized ones
    #[arg(long, global = true)]
    raw: bool,

    /// Leave timing columns empty so repeated runs are byte-identical
    #[arg(long, global = true)]
    no_timing: bool,

    /// Write the table here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Directory for certificates [env: ATTRACTOR_BOUNDS_OUT, default: .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Random seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound a quantity over the global attractor, one row per degree
    Bound(BoundArgs),
    /// Bound a quantity over the set attracting a region
    BoundLocal(BoundArgs),
    /// Bound C(lambda) on a grid of lambda values
    Sweep(BoundArgs),
    /// Smallest ball centred on the z axis containing the attractor
    MinBall(ModelArgs),
    /// Integrate one trajectory and print it as CSV
    Simulate(SimulateArgs),
    /// Extrema over trajectories seeded near an equilibrium or state
    ManifoldSearch(ManifoldArgs),
    /// Audit a certificate by sampling
    Verify(VerifyArgs),
    /// Print a model as TOML
    ExportModel(ModelArgs),
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Built-in model: lorenz, nine-mode, two-cycle
    #[arg(long)]
    model: Option<String>,

    /// Model file (TOML)
    #[arg(long)]
    model_file: Option<PathBuf>,

    /// Model parameter override, NAME=VALUE (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,

    /// Polynomial degrees of V, e.g. 2,4,6
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<u32>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Quantity name, or a polynomial in x1..xn
    #[arg(long)]
    phi: Option<String>,

    /// Single degree (same as --degrees D)
    #[arg(long)]
    degree: Option<u32>,

    /// Bound the minimum instead of the maximum
    #[arg(long)]
    lower: bool,

    /// Solve at this lambda only
    #[arg(long)]
    lambda: Option<f64>,

    /// Golden-section search over [lo, hi], as lo:hi
    #[arg(long, value_name = "LO:HI")]
    lambda_range: Option<String>,

    /// Lambda values, lo:hi:n or a comma list
    #[arg(long, value_name = "GRID")]
    lambda_grid: Option<String>,

    /// Region polynomial g >= 0 (bound-local, sweep)
    #[arg(long)]
    region: Option<String>,

    /// Degree of the region multipliers
    #[arg(long)]
    multiplier_degree: Option<u32>,

    /// Do not impose the model symmetry on V
    #[arg(long)]
    no_symmetry: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Initial state, comma-separated
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,

    /// Step size
    #[arg(long)]
    h: Option<f64>,

    /// Number of steps
    #[arg(long)]
    steps: Option<usize>,

    /// Keep every n-th state
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct ManifoldArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Quantities to track, comma-separated (default: all)
    #[arg(long, value_delimiter = ',')]
    phi: Vec<String>,

    /// Base state, comma-separated (default: the chosen equilibrium)
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,

    /// Index of the base equilibrium
    #[arg(long)]
    equilibrium: Option<usize>,

    /// Ensemble size
    #[arg(long)]
    n_perturb: Option<usize>,

    /// Perturbation size
    #[arg(long)]
    amplitude: Option<f64>,

    /// Integration time per member
    #[arg(long)]
    horizon: Option<f64>,

    /// Step size
    #[arg(long)]
    h: Option<f64>,

    /// Leading fraction of each member discarded
    #[arg(long)]
    discard: Option<f64>,

    /// Stop members once |f(x)| falls below this
    #[arg(long)]
    settle_tol: Option<f64>,

    /// Seed around this many long-transient states found from the base
    #[arg(long)]
    transient_bases: Option<usize>,

    /// Random offset from the base when looking for long transients
    #[arg(long)]
    transient_amplitude: Option<f64>,

    /// Minimum lifetime of a long transient
    #[arg(long)]
    transient_lifetime: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Certificate JSON written by bound
    #[arg(long)]
    certificate: Option<PathBuf>,

    /// Uniform box samples
    #[arg(long)]
    samples: Option<usize>,

    /// Half-width of the sampling box in rescaled coordinates
    #[arg(long)]
    half_width: Option<f64>,

    /// Also audit along a trajectory from this state
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,

    /// Trajectory length in steps
    #[arg(long)]
    steps: Option<usize>,
}

fn apply_model(a: ModelArgs, c: &mut ExperimentConfig) -> Result<(), Error> {
    c.model = a.model;
    c.model_file = a.model_file;
    c.degrees = a.degrees;
    for p in a.params {
        let (k, v) = p.split_once('=').ok_or_else(|| {
            config::config_err("param", format!("expected NAME=VALUE, got `{p}`"))
        })?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| config::config_err("param", format!("`{p}`: {e}")))?;
        c.parameters.insert(k.trim().to_string(), v);
    }
    Ok(())
}

fn apply_bound(a: BoundArgs, c: &mut ExperimentConfig) -> Result<(), Error> {
    apply_model(a.model, c)?;
    if let Some(d) = a.degree {
        c.degrees.push(d);
    }
    c.quantities = a.phi.into_iter().collect();
    if a.lower {
        c.direction = Some(Direction::Lower);
    }
    let given = [a.lambda.is_some(), a.lambda_range.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given > 1 {
        return Err(config::config_err(
            "lambda",
            "give at most one of --lambda and --lambda-range",
        ));
    }
    if let Some(l) = a.lambda {
        c.lambda = Some(LambdaStrategy::Grid { lambdas: vec![l] });
    }
    if let Some(r) = a.lambda_range {
        let v: Vec<f64> = parse_list("lambda-range", &r.replace(':', ","))?;
        let [lo, hi] = v[..] else {
            return Err(config::config_err("lambda-range", "expected LO:HI"));
        };
        c.lambda = Some(LambdaStrategy::Golden {
            lo,
            hi,
            rel_tol: LAMBDA_REL_TOL,
        });
    }
    c.lambda_grid = a.lambda_grid;
    c.region = a.region;
    c.multiplier_degree = a.multiplier_degree;
    if a.no_symmetry {
        c.symmetry = Some(false);
    }
    Ok(())
}

fn flags(cli: Cli) -> Result<(ExperimentConfig, Option<PathBuf>), Error> {
    let mut c = ExperimentConfig {
        raw: cli.raw,
        no_timing: cli.no_timing,
        output: cli.output,
        out_dir: cli.out_dir,
        seed: cli.seed,
        ..Default::default()
    };
    let state = |s: Option<String>, field: &str| s.map(|s| parse_list(field, &s)).transpose();
    match cli.command {
        None => {}
        Some(Command::Bound(a)) => {
            c.command = Some(CommandKind::Bound);
            apply_bound(a, &mut c)?;
        }
        Some(Command::BoundLocal(a)) => {
            c.command = Some(CommandKind::BoundLocal);
            apply_bound(a, &mut c)?;
        }
        Some(Command::Sweep(a)) => {
            c.command = Some(CommandKind::Sweep);
            apply_bound(a, &mut c)?;
        }
        Some(Command::MinBall(a)) => {
            c.command = Some(CommandKind::MinBall);
            apply_model(a, &mut c)?;
        }
        Some(Command::ExportModel(a)) => {
            c.command = Some(CommandKind::ExportModel);
            apply_model(a, &mut c)?;
        }
        Some(Command::Simulate(a)) => {
            c.command = Some(CommandKind::Simulate);
            apply_model(a.model, &mut c)?;
            c.x0 = state(a.x0, "x0")?;
            c.h = a.h;
            c.steps = a.steps;
            c.stride = a.stride;
        }
        Some(Command::ManifoldSearch(a)) => {
            c.command = Some(CommandKind::ManifoldSearch);
            apply_model(a.model, &mut c)?;
            c.quantities = a.phi;
            c.x0 = state(a.x0, "x0")?;
            c.equilibrium = a.equilibrium;
            c.n_perturb = a.n_perturb;
            c.amplitude = a.amplitude;
            c.horizon = a.horizon;
            c.h = a.h;
            c.discard = a.discard;
            c.settle_tol = a.settle_tol;
            c.transient_bases = a.transient_bases;
            c.transient_amplitude = a.transient_amplitude;
            c.transient_lifetime = a.transient_lifetime;
        }
        Some(Command::Verify(a)) => {
            c.command = Some(CommandKind::Verify);
            c.certificate = a.certificate;
            c.samples = a.samples;
            c.half_width = a.half_width;
            c.x0 = state(a.x0, "x0")?;
            c.steps = a.steps;
        }
    }
    Ok((c, cli.config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = flags(cli).and_then(|(c, file)| {
        let c = match file {
            Some(path) => c.or(ExperimentConfig::load(&path)?),
            None => c,
        };
        run::run(&c)
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SolverFailure) => ExitCode::from(2),
        Ok(Outcome::AuditFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NoCertificate(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
