//! Every tunable default used by the library and the CLI.
//!
//! Values here are the single source for solver tolerances, search brackets,
//! integration step sizes and sampling counts. The CLI surfaces most of them
//! as flags or config fields.

/// Coefficients with magnitude below this are dropped after `f64` arithmetic.
pub const COEFF_DROP_EPS_F64: f64 = 1e-14;
/// Same, for `f32` polynomials.
pub const COEFF_DROP_EPS_F32: f32 = 1e-6;

/// Maximum number of elements when closing a set of symmetry generators.
pub const GROUP_CAP: usize = 1024;

/// Rows of a compiled SOS constraint whose only content is float noise below
/// this fraction of the constraint's largest coefficient are discarded
/// instead of being reported as inexpressible.
pub const COMPILE_NOISE_REL: f64 = 1e-11;

// SDP solver.

/// Relative duality gap for an `Optimal` status.
pub const SDP_GAP_TOL: f64 = 1e-8;
/// Relative primal and dual infeasibility for an `Optimal` status.
pub const SDP_FEAS_TOL: f64 = 5e-7;
/// Iteration cap.
pub const SDP_MAX_ITER: usize = 200;
/// Fraction of the distance to the PSD boundary taken per step.
pub const SDP_STEP_FRACTION: f64 = 0.98;
/// Diagonal shift of the Schur complement, relative to its largest diagonal
/// entry, applied when the unshifted Cholesky factorization fails. It grows
/// by 1e3 per retry.
pub const SDP_REGULARIZATION: f64 = 1e-12;
/// Dual multipliers growing past this norm (relative to the data) mark the
/// primal as infeasible.
pub const SDP_DIVERGENCE: f64 = 1e9;

// Bound search.

/// Upper end of the golden-section bracket for global problems.
pub const LAMBDA_MAX_GLOBAL: f64 = 8.0;
/// Relative width at which golden-section refinement of lambda stops.
pub const LAMBDA_REL_TOL: f64 = 1e-4;
/// Points in the logarithmic lambda scan for regional problems.
pub const LAMBDA_SCAN_POINTS: usize = 40;
/// Lower end of the logarithmic scan.
pub const LAMBDA_SCAN_MIN: f64 = 1e-2;
/// Upper end of the logarithmic scan.
pub const LAMBDA_SCAN_MAX: f64 = 1e3;
/// Relative tolerance on the ball centre in the minimal-ball search.
pub const BALL_CENTER_TOL: f64 = 2e-4;

// Dynamics.

/// Fixed RK4 step.
pub const RK4_STEP: f64 = 0.005;
/// Trajectories whose state norm exceeds this are truncated and flagged.
pub const DIVERGENCE_CAP: f64 = 1e8;
/// Fraction of a random-initial-condition run discarded as transient.
pub const TRANSIENT_DISCARD: f64 = 0.1;
/// Fraction discarded for unstable-manifold runs.
pub const MANIFOLD_DISCARD: f64 = 0.0;
/// Offset along each unstable eigendirection used to seed manifold runs.
pub const MANIFOLD_AMPLITUDE: f64 = 1e-6;
/// Residual below which a state counts as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

// Certificate audits.

/// Random samples used by an audit.
pub const AUDIT_SAMPLES: usize = 100_000;
/// Half-width of the audit box in solve (rescaled) coordinates.
pub const AUDIT_BOX: f64 = 1.5;
/// Margin below which an audit fails.
pub const AUDIT_TOL: f64 = 1e-6;

/// Seed used when none is given.
pub const SEED: u64 = 20_190_425;
