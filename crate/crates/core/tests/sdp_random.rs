//! Random SDPs with a planted primal-dual optimum.
//!
//! Each instance picks complementary `X*, Z*` sharing an eigenbasis, random
//! constraint data and dual multipliers, then sets `b` and `C` so that the
//! planted pair satisfies the KKT conditions. The optimal value is then
//! `b . w*` by construction.

use attractor_bounds::sdp::{self, BlockEntry, SdpProblem, SdpRow, SolveStatus, SolverSettings};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Planted {
    problem: SdpProblem,
    optimum: f64,
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

fn planted(rng: &mut ChaCha8Rng) -> Planted {
    let (sizes, m, nf, ranks) = loop {
        let nb = rng.random_range(1..=3);
        let sizes: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=20)).collect();
        let dim: usize = sizes.iter().map(|n| n * (n + 1) / 2).sum();
        let m = rng.random_range(1..=dim.min(40));
        let nf = rng.random_range(0..=m.saturating_sub(1).min(3));
        let ranks: Vec<usize> = sizes.iter().map(|&n| rng.random_range(0..=n)).collect();
        // Rank bounds under which a random instance is nondegenerate, so
        // both the primal and the dual have interior points.
        let tri = |k: usize| k * (k + 1) / 2;
        let primal: usize = ranks.iter().map(|&r| tri(r)).sum();
        let dual: usize = sizes.iter().zip(&ranks).map(|(&n, &r)| tri(n - r)).sum();
        if primal + nf <= m && dual <= dim - m {
            break (sizes, m, nf, ranks);
        }
    };

    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for (&n, &r) in sizes.iter().zip(&ranks) {
        let q = random_orthogonal(n, rng);
        let dx = DVector::from_fn(n, |i, _| {
            if i < r {
                rng.random_range(0.5..2.0)
            } else {
                0.0
            }
        });
        let dz = DVector::from_fn(n, |i, _| {
            if i >= r {
                rng.random_range(0.5..2.0)
            } else {
                0.0
            }
        });
        xs.push(&q * DMatrix::from_diagonal(&dx) * q.transpose());
        zs.push(&q * DMatrix::from_diagonal(&dz) * q.transpose());
    }
    let y: Vec<f64> = (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut p = SdpProblem::new(sizes.clone(), nf);
    let mut c: Vec<DMatrix<f64>> = zs.clone();
    let mut cf = vec![0.0; nf];
    for i in 0..m {
        let mut row = SdpRow::default();
        let mut ax = 0.0;
        for (b, &n) in sizes.iter().enumerate() {
            for r in 0..n {
                for s in r..n {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    row.entries.push(BlockEntry::new(b, r, s, v));
                    let weight = if r == s { 1.0 } else { 2.0 };
                    ax += weight * v * xs[b][(r, s)];
                    c[b][(r, s)] += w[i] * v;
                    if r != s {
                        c[b][(s, r)] += w[i] * v;
                    }
                }
            }
        }
        for k in 0..nf {
            let v: f64 = rng.random_range(-1.0..1.0);
            row.free.push((k, v));
            ax += v * y[k];
            cf[k] += v * w[i];
        }
        row.rhs = ax;
        p.rows.push(row);
    }
    for (b, cb) in c.iter().enumerate() {
        for r in 0..sizes[b] {
            for s in r..sizes[b] {
                if cb[(r, s)] != 0.0 {
                    p.objective.push(BlockEntry::new(b, r, s, cb[(r, s)]));
                }
            }
        }
    }
    p.objective_free = cf;
    let optimum = p.rows.iter().zip(&w).map(|(r, wi)| r.rhs * wi).sum();
    Planted {
        problem: p,
        optimum,
    }
}

#[test]
fn hundred_planted_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let settings = SolverSettings::default();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let inst = planted(&mut rng);
        let sol = sdp::solve(&inst.problem, &settings).unwrap();
        assert_eq!(
            sol.status,
            SolveStatus::Optimal,
            "instance {k}: {:?}",
            sol.residuals
        );
        let err = (sol.objective() - inst.optimum).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-6,
            "instance {k}: {} vs {}",
            sol.objective(),
            inst.optimum
        );
    }
    eprintln!("worst objective error {worst:e}");
}

#[test]
fn kkt_recomputation_matches_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let inst = planted(&mut rng);
        let sol = sdp::solve(&inst.problem, &SolverSettings::default()).unwrap();
        let r = sdp::verify_solution(&inst.problem, &sol).unwrap();
        assert!((r.primal_infeasibility - sol.residuals.primal_infeasibility).abs() <= 1e-10);
        assert!((r.dual_infeasibility - sol.residuals.dual_infeasibility).abs() <= 1e-10);
        assert!((r.relative_gap - sol.residuals.relative_gap).abs() <= 1e-10);
        assert!(
            (r.primal_objective - sol.residuals.primal_objective).abs()
                <= 1e-10 * (1.0 + r.primal_objective.abs())
        );
    }
}

#[test]
fn weak_duality_along_iterates() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let settings = SolverSettings {
        log_iterations: true,
        ..SolverSettings::default()
    };
    for _ in 0..10 {
        let inst = planted(&mut rng);
        let sol = sdp::solve(&inst.problem, &settings).unwrap();
        assert!(!sol.log.is_empty());
        for r in &sol.log {
            let gap = r.primal_objective - r.dual_objective;
            assert!(r.complementarity >= 0.0);
            assert!(
                gap >= -r.infeasibility_slack - 1e-9 * (1.0 + gap.abs()),
                "{r:?}"
            );
        }
    }
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let settings = SolverSettings {
        log_iterations: true,
        ..SolverSettings::default()
    };
    for _ in 0..5 {
        let inst = planted(&mut rng);
        let a = sdp::solve(&inst.problem, &settings).unwrap();
        let b = sdp::solve(&inst.problem, &settings).unwrap();
        assert_eq!(a.log.len(), b.log.len());
        for (ra, rb) in a.log.iter().zip(&b.log) {
            assert_eq!(ra.primal_objective.to_bits(), rb.primal_objective.to_bits());
            assert_eq!(ra.dual_objective.to_bits(), rb.dual_objective.to_bits());
            assert_eq!(ra.step_primal.to_bits(), rb.step_primal.to_bits());
        }
        assert_eq!(a.blocks, b.blocks);
        assert_eq!(a.dual, b.dual);
    }
}

#[test]
fn export_round_trip_preserves_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let inst = planted(&mut rng);
    let text = sdp::write_sdp(&inst.problem);
    let back = sdp::read_sdp(&text).unwrap();
    assert_eq!(back, inst.problem);
    let sol = sdp::solve(&back, &SolverSettings::default()).unwrap();
    assert!((sol.objective() - inst.optimum).abs() <= 1e-6);
}
