use std::collections::BTreeMap;

use super::{OdeModel, Quantity};
use crate::poly::{vars, Monomial};
use crate::symmetry::{close, SignedPermutation};
use crate::Poly;

/// Upper end of the lambda bracket; optimal values reach the high 40s.
const LAMBDA_MAX: f64 = 100.0;

/// Linear damping coefficients `d_1..d_9` (before division by `Re`).
pub fn nine_mode_dissipation_coefficients(alpha: f64, beta: f64, gamma: f64) -> [f64; 9] {
    let (a2, b2, g2) = (alpha * alpha, beta * beta, gamma * gamma);
    [
        b2,
        4.0 * b2 / 3.0 + g2,
        b2 + g2,
        (3.0 * a2 + 4.0 * b2) / 3.0,
        a2 + b2,
        (3.0 * a2 + 4.0 * b2 + 3.0 * g2) / 3.0,
        a2 + b2 + g2,
        a2 + b2 + g2,
        9.0 * b2,
    ]
}

/// Nine-mode shear flow model in amplitudes `a_1..a_9`:
/// `da_i/dt = -d_i/Re (a_i - delta_i1) + sum_jk N_ijk a_j a_k`.
///
/// Registers the perturbation energy `E = |a - e_1|^2` and the scaled
/// dissipation `D = sum_i d_i a_i^2`.
pub fn nine_mode(alpha: f64, beta: f64, gamma: f64, re: f64) -> OdeModel {
    let a = vars::<f64>(9);
    let q = |i: usize, j: usize| &a[i - 1] * &a[j - 1];
    let d = nine_mode_dissipation_coefficients(alpha, beta, gamma);
    let kag = (alpha * alpha + gamma * gamma).sqrt();
    let kbg = (beta * beta + gamma * gamma).sqrt();
    let kabg = (alpha * alpha + beta * beta + gamma * gamma).sqrt();
    let (a2, b2, g2) = (alpha * alpha, beta * beta, gamma * gamma);
    let abg = alpha * beta * gamma;
    let s6 = 6f64.sqrt();
    let s32 = 1.5f64.sqrt();

    let sum = |terms: Vec<(f64, Poly)>| {
        terms
            .into_iter()
            .fold(Poly::zero(9), |acc, (c, p)| &acc + &p.scale(&c))
    };
    let mut f = vec![
        sum(vec![
            (-s32 * beta * gamma / kabg, q(6, 8)),
            (s32 * beta * gamma / kbg, q(2, 3)),
        ]),
        sum(vec![
            (5.0 * 2f64.sqrt() / (3.0 * 3f64.sqrt()) * g2 / kag, q(4, 6)),
            (-g2 / (s6 * kag), q(5, 7)),
            (-abg / (s6 * kag * kabg), q(5, 8)),
            (-s32 * beta * gamma / kbg, q(1, 3)),
            (-s32 * beta * gamma / kbg, q(3, 9)),
        ]),
        sum(vec![
            (2.0 / s6 * abg / (kag * kbg), q(4, 7)),
            (2.0 / s6 * abg / (kag * kbg), q(5, 6)),
            (
                (b2 * (3.0 * a2 + g2) - 3.0 * g2 * (a2 + g2)) / (s6 * kag * kbg * kabg),
                q(4, 8),
            ),
        ]),
        sum(vec![
            (-alpha / s6, q(1, 5)),
            (-10.0 / (3.0 * s6) * a2 / kag, q(2, 6)),
            (-s32 * abg / (kag * kbg), q(3, 7)),
            (-s32 * a2 * b2 / (kag * kbg * kabg), q(3, 8)),
            (-alpha / s6, q(5, 9)),
        ]),
        sum(vec![
            (alpha / s6, q(1, 4)),
            (a2 / (s6 * kag), q(2, 7)),
            (-abg / (s6 * kag * kabg), q(2, 8)),
            (alpha / s6, q(4, 9)),
            (2.0 / s6 * abg / (kag * kbg), q(3, 6)),
        ]),
        sum(vec![
            (alpha / s6, q(1, 7)),
            (s32 * beta * gamma / kabg, q(1, 8)),
            (10.0 / (3.0 * s6) * (a2 - g2) / kag, q(2, 4)),
            (-2.0 * (2.0f64 / 3.0).sqrt() * abg / (kag * kbg), q(3, 5)),
            (alpha / s6, q(7, 9)),
            (s32 * beta * gamma / kabg, q(8, 9)),
        ]),
        sum(vec![
            (-alpha / s6, q(1, 6)),
            (-alpha / s6, q(6, 9)),
            ((g2 - a2) / (s6 * kag), q(2, 5)),
            (abg / (s6 * kag * kbg), q(3, 4)),
        ]),
        sum(vec![
            (2.0 / s6 * abg / (kag * kabg), q(2, 5)),
            (
                g2 * (3.0 * a2 - b2 + 3.0 * g2) / (s6 * kag * kbg * kabg),
                q(3, 4),
            ),
        ]),
        sum(vec![
            (s32 * beta * gamma / kbg, q(2, 3)),
            (-s32 * beta * gamma / kabg, q(6, 8)),
        ]),
    ];
    for (i, fi) in f.iter_mut().enumerate() {
        *fi = &*fi + &a[i].scale(&(-d[i] / re));
    }
    f[0].add_term(Monomial::one(9), d[0] / re);

    let e1 = {
        let mut p = a[0].clone();
        p.add_term(Monomial::one(9), -1.0);
        p
    };
    let energy = a[1..].iter().fold(&e1 * &e1, |acc, ai| &acc + &(ai * ai));
    let dissipation = a
        .iter()
        .zip(d)
        .fold(Poly::zero(9), |acc, (ai, di)| &acc + &(ai * ai).scale(&di));
    let norm2 = a.iter().fold(Poly::zero(9), |acc, ai| &acc + &(ai * ai));
    let a19 = &a[0] - &a[8];

    let g1 = SignedPermutation::signs(&[1, 1, 1, -1, -1, -1, -1, -1, 1]).expect("valid generator");
    let g2 = SignedPermutation::signs(&[1, -1, -1, 1, 1, -1, -1, -1, 1]).expect("valid generator");
    let symmetry = close(9, &[g1.clone(), g2.clone()]).expect("order-4 group");
    let mut e1v = vec![0.0; 9];
    e1v[0] = 1.0;
    OdeModel {
        id: "nine-mode".into(),
        var_names: (1..=9).map(|i| format!("a{i}")).collect(),
        f,
        parameters: BTreeMap::from([
            ("alpha".into(), alpha),
            ("beta".into(), beta),
            ("gamma".into(), gamma),
            ("re".into(), re),
        ]),
        generators: vec![g1, g2],
        symmetry,
        scale: vec![1.0; 9],
        equilibria: vec![e1v],
        ansatz: Some(vec![norm2, &a19 * &a19]),
        quantities: vec![
            Quantity {
                name: "E".into(),
                phi: energy,
                normalization: None,
            },
            Quantity {
                name: "D".into(),
                phi: dissipation,
                normalization: None,
            },
        ],
        region: None,
        lambda_max: LAMBDA_MAX,
        special_lambdas: Vec::new(),
    }
}

/// `nine_mode(1/2, pi/2, 1, 105)`.
pub fn nine_mode_standard() -> OdeModel {
    nine_mode(0.5, std::f64::consts::FRAC_PI_2, 1.0, 105.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminar_state_is_fixed() {
        let m = nine_mode_standard();
        let mut e1 = [0.0; 9];
        e1[0] = 1.0;
        assert!(m.residual(&e1).unwrap() <= 1e-12);
        assert_eq!(m.quantity("E").unwrap().phi.evaluate(&e1).unwrap(), 0.0);
        let beta2 = std::f64::consts::FRAC_PI_2.powi(2);
        assert!((m.quantity("D").unwrap().phi.evaluate(&e1).unwrap() - beta2).abs() < 1e-14);
    }

    #[test]
    fn damping_coefficients() {
        let d = nine_mode_dissipation_coefficients(0.5, std::f64::consts::FRAC_PI_2, 1.0);
        assert!((d[8] - 22.2066099).abs() < 1e-6);
        assert_eq!(d[6], d[7]);
    }

    #[test]
    fn nonlinearity_conserves_energy_and_a1_minus_a9() {
        // The quadratic part of f is energy conserving and leaves a1 - a9
        // unchanged, at any parameter values.
        for (al, be, ga) in [(0.5, std::f64::consts::FRAC_PI_2, 1.0), (0.7, 1.3, 2.1)] {
            let m = nine_mode(al, be, ga, 50.0);
            let quad: Vec<Poly> = m.f.iter().map(|p| p.homogeneous_part(2)).collect();
            for v in m.ansatz.as_ref().unwrap() {
                let l = v.lie_derivative(&quad).unwrap();
                assert!(l.max_abs_coeff() < 1e-13, "{l:?}");
            }
        }
    }

    #[test]
    fn forcing_only_in_first_component() {
        let m = nine_mode(0.9, 1.1, 0.4, 80.0);
        let one = Monomial::one(9);
        for (i, p) in m.f.iter().enumerate() {
            assert_eq!(p.coeff(&one) != 0.0, i == 0);
            // a_i-independent quadratic terms: no a_i^2 self interaction.
            let mut e = [0u16; 9];
            e[i] = 2;
            assert_eq!(p.coeff(&Monomial::new(&e)), 0.0);
        }
    }
}
