use std::collections::BTreeMap;

use super::{monomial_name, OdeModel, Quantity};
use crate::defaults::LAMBDA_MAX_GLOBAL;
use crate::poly::{monomial_basis, vars, Monomial};
use crate::symmetry::{close, SignedPermutation};
use crate::Poly;

/// Lorenz system `(sigma (y - x), r x - y - x z, x y - beta z)`.
///
/// Registers every monomial `x^l y^m z^n` of degree 1 to 3 as a quantity,
/// normalized by its magnitude at the nonzero equilibria when `r > 1`.
pub fn lorenz(sigma: f64, r: f64, beta: f64) -> OdeModel {
    let v = vars::<f64>(3);
    let (x, y, z) = (&v[0], &v[1], &v[2]);
    let f = vec![
        (y - x).scale(&sigma),
        &(&x.scale(&r) - y) - &(x * z),
        &(x * y) - &z.scale(&beta),
    ];
    let mut equilibria = vec![vec![0.0; 3]];
    if r > 1.0 {
        let a = (beta * (r - 1.0)).sqrt();
        equilibria.push(vec![a, a, r - 1.0]);
        equilibria.push(vec![-a, -a, r - 1.0]);
    }
    let quantities = monomial_basis(3, 3)
        .into_iter()
        .filter(|m| m.degree() > 0)
        .map(|m| {
            let e = m.exponents();
            lorenz_monomial(e[0] as u32, e[1] as u32, e[2] as u32, beta, r)
        })
        .collect();
    let gen = SignedPermutation::from_one_line(&[-1, -2, 3]).expect("valid generator");
    let symmetry = close(3, std::slice::from_ref(&gen)).expect("order-2 group");
    OdeModel {
        id: "lorenz".into(),
        var_names: vec!["x".into(), "y".into(), "z".into()],
        f,
        parameters: BTreeMap::from([
            ("beta".into(), beta),
            ("r".into(), r),
            ("sigma".into(), sigma),
        ]),
        generators: vec![gen],
        symmetry,
        scale: vec![25.0; 3],
        equilibria,
        ansatz: Some(vec![x.clone(), &(y * y) + &(z * z)]),
        quantities,
        region: None,
        lambda_max: LAMBDA_MAX_GLOBAL,
        special_lambdas: vec![1.0 / beta],
    }
}

/// `lorenz(10, 28, 8/3)`.
pub fn lorenz_standard() -> OdeModel {
    lorenz(10.0, 28.0, 8.0 / 3.0)
}

/// The quantity `x^l y^m z^n`, normalized by `(sqrt(beta (r - 1)))^(l+m) (r - 1)^n`.
pub fn lorenz_monomial(l: u32, m: u32, n: u32, beta: f64, r: f64) -> Quantity {
    let exps = [l as u16, m as u16, n as u16];
    let normalization = (r > 1.0)
        .then(|| (beta * (r - 1.0)).sqrt().powi((l + m) as i32) * (r - 1.0).powi(n as i32));
    Quantity {
        name: monomial_name(&["x", "y", "z"], &exps),
        phi: Poly::monomial(Monomial::new(&exps), 1.0),
        normalization,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    #[test]
    fn equilibria_at_standard_parameters() {
        let m = lorenz_standard();
        let a = 6.0 * 2f64.sqrt();
        assert_eq!(m.equilibria.len(), 3);
        assert!((m.equilibria[1][0] - a).abs() < 1e-12);
        for x in &m.equilibria {
            assert!(m.residual(x).unwrap() <= 1e-9);
        }
        assert_eq!(m.eval(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn quantities_and_normalizers() {
        let m = lorenz_standard();
        assert_eq!(m.quantities.len(), 19);
        let q = m.quantity("xyz").unwrap();
        let a = 6.0 * 2f64.sqrt();
        assert!((q.normalization.unwrap() - a * a * 27.0).abs() < 1e-9);
        assert_eq!(
            m.quantity("x2y").unwrap().phi,
            parse_poly("x1^2*x2", 3).unwrap()
        );
        assert_eq!(m.quantity("z").unwrap().normalization, Some(27.0));
    }

    #[test]
    fn footnote_certificate_identity() {
        // V = -z + x^2/(2 sigma), lambda = 1/beta, Phi = -z, C = 0: both
        // conditions reduce to nonnegative multiples of x^2.
        let m = lorenz_standard();
        let (sigma, beta) = (10.0, 8.0 / 3.0);
        let v = parse_poly(&format!("-1*x3 + {}*x1^2", 1.0 / (2.0 * sigma)), 3).unwrap();
        let phi = parse_poly("-1*x3", 3).unwrap();
        let first = v.checked_sub(&phi).unwrap();
        assert_eq!(first, parse_poly("0.05*x1^2", 3).unwrap());
        let lie = v.lie_derivative(&m.f).unwrap();
        let second = v
            .scale(&-1.0)
            .checked_sub(&lie.scale(&(1.0 / beta)))
            .unwrap();
        let expected =
            parse_poly(&format!("{}*x1^2", 1.0 / beta - 1.0 / (2.0 * sigma)), 3).unwrap();
        assert!(second.max_coeff_diff(&expected) < 1e-15);
    }
}
