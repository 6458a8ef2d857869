use std::collections::BTreeMap;

use super::{OdeModel, Quantity};
use crate::defaults::LAMBDA_MAX_GLOBAL;
use crate::poly::vars;
use crate::symmetry::{close, SignedPermutation};
use crate::Poly;

/// Planar system with two attracting limit cycles separated by a repelling
/// one: `(y - x (x^2 - 2)(x^2 - 1)(x^2 - 1/4), -x)`.
///
/// The default region is the disk of radius 4/5, which holds the inner
/// cycle and misses the repelling one.
pub fn two_cycle() -> OdeModel {
    let v = vars::<f64>(2);
    let (x, y) = (&v[0], &v[1]);
    let one = Poly::one(2);
    let x2 = x * x;
    let factor = &(&(x * &(&x2 - &one.scale(&2.0))) * &(&x2 - &one)) * &(&x2 - &one.scale(&0.25));
    let f = vec![y - &factor, -x];
    let region = &one.scale(&0.64) - &(&x2 + &(y * y));
    let gen = SignedPermutation::from_one_line(&[-1, -2]).expect("valid generator");
    let symmetry = close(2, std::slice::from_ref(&gen)).expect("order-2 group");
    let q = |name: &str, phi: Poly| Quantity {
        name: name.into(),
        phi,
        normalization: None,
    };
    OdeModel {
        id: "two-cycle".into(),
        var_names: vec!["x".into(), "y".into()],
        f,
        parameters: BTreeMap::new(),
        generators: vec![gen],
        symmetry,
        scale: vec![1.6; 2],
        equilibria: vec![vec![0.0, 0.0]],
        ansatz: None,
        quantities: vec![q("x2", x2.clone()), q("xy", x * y), q("y2", y * y)],
        region: Some(region),
        lambda_max: LAMBDA_MAX_GLOBAL,
        special_lambdas: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    #[test]
    fn structure() {
        let m = two_cycle();
        assert_eq!(m.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.f[0].degree(), Some(7));
        assert_eq!(m.f[1].degree(), Some(1));
        assert_eq!(
            m.region
                .as_ref()
                .unwrap()
                .evaluate(&[0.8, 0.0])
                .unwrap()
                .abs()
                < 1e-15,
            true
        );
        // x (x^2-2)(x^2-1)(x^2-1/4) = x^7 - 3.25 x^5 + 2.75 x^3 - 0.5 x
        let expected = parse_poly("x2 - x1^7 + 3.25*x1^5 - 2.75*x1^3 + 0.5*x1", 2).unwrap();
        assert!(m.f[0].max_coeff_diff(&expected) < 1e-15);
    }
}
