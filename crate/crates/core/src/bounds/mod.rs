//! Bounds on extreme values of a quantity over the global attractor, or over
//! the set attracting a region, via polynomial Lyapunov functions.
//!
//! For fixed `lambda > 0` the bound `Phi <= C` on the attractor follows from
//! a polynomial `V` with `V - Phi` and `C - V - lambda f . grad V` both SOS.
//! In the regional form each condition only has to hold where `g >= 0`,
//! which is relaxed with SOS multipliers. [`inner_bound`] minimizes `C` at a
//! fixed `lambda`, [`optimize_lambda`] searches over `lambda`, and
//! [`min_ball`] finds the smallest ball centred on the z axis that contains
//! the attractor.

mod ball;
mod certificate;
mod problem;
mod search;

pub use ball::{min_ball, BallResult, BallSettings};
pub use certificate::{BoundCertificate, GramSummary, MultiplierPair, SolverStats};
pub use problem::{
    inner_bound, sdp_at, solve_at, trivial_regional_bound, BoundProblem, Direction, InnerSolve,
    Region,
};
pub use search::{
    optimize_lambda, sweep, sweep_csv, LambdaSearch, LambdaStrategy, SweepPoint, TRIVIAL_TOL,
};
