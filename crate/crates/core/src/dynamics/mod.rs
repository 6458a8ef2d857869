//! Trajectories, unstable manifolds and certificate audits: the empirical
//! side against which computed bounds are judged.
//!
//! [`integrate_rk4`] runs fixed-step classical Runge-Kutta,
//! [`trajectory_extrema`] reads off the extreme values of a quantity,
//! [`manifold_search`] integrates ensembles seeded along the unstable
//! directions of an equilibrium and [`audit_certificate`] re-evaluates the
//! polynomial inequalities behind a bound at sample points.

mod audit;
mod integrate;
mod linear;
mod manifold;

pub use audit::{audit_certificate, AuditReport, AuditSettings, ConstraintAudit};
pub use integrate::{integrate_rk4, trajectory_extrema, Extrema, Rk4, Trajectory, VectorField};
pub use linear::{jacobian_at, unstable_directions, UnstableDirection};
pub use manifold::{
    long_transient_states, manifold_search, manifold_seeds, EnsembleRow, EnsembleSummary,
    ManifoldSettings, Seeding, TransientSearch,
};
