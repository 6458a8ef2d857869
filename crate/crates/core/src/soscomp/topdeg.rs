use crate::error::{Error, Result};
use crate::models::OdeModel;
use crate::poly::{homogeneous_basis, Monomial};
use crate::symmetry::{orbit_average, SymmetryGroup};
use crate::Poly;

/// Admissible highest-degree part of `V`.
#[derive(Clone, Debug, PartialEq)]
pub enum TopDegree {
    /// Any degree-`d` form.
    Unrestricted,
    /// Linear combinations of these degree-`d` forms.
    Span(Vec<Poly>),
}

/// Degree-`d` forms of `V` whose contribution to `f . grad V` cancels at
/// the top degree, built from the model's ansatz factors.
///
/// When the top-degree part of `f` has odd degree there is nothing to
/// cancel and the result is [`TopDegree::Unrestricted`]. Models without an
/// ansatz and with even-degree `f` are rejected.
pub fn top_degree_restriction(
    model: &OdeModel,
    d: u32,
    group: Option<&SymmetryGroup>,
) -> Result<TopDegree> {
    if d % 2 == 1 {
        return Err(Error::InvalidBoundProblem(format!(
            "degree of V must be even, got {d}"
        )));
    }
    if model.degree() % 2 == 1 {
        return Ok(TopDegree::Unrestricted);
    }
    match &model.ansatz {
        Some(factors) => Ok(TopDegree::Span(top_degree_span(
            model.dim(),
            factors,
            d,
            group,
        )?)),
        None => Err(Error::NoAnsatz(model.id.clone())),
    }
}

/// Linearly independent products of `factors` (homogeneous, nonconstant)
/// with total degree `d`, orbit-averaged over `group` when given.
pub fn top_degree_span(
    nvars: usize,
    factors: &[Poly],
    d: u32,
    group: Option<&SymmetryGroup>,
) -> Result<Vec<Poly>> {
    let mut degs = Vec::with_capacity(factors.len());
    for p in factors {
        match p.degree() {
            Some(k) if k > 0 && p.is_homogeneous(k) && p.nvars() == nvars => degs.push(k),
            _ => {
                return Err(Error::InvalidProblem(
                    "ansatz factors must be nonconstant homogeneous polynomials".into(),
                ))
            }
        }
    }
    let mut products = Vec::new();
    let mut powers = vec![0u32; factors.len()];
    collect_products(factors, &degs, d, 0, &mut powers, &mut products);

    let mut out: Vec<Poly> = Vec::new();
    let basis = homogeneous_basis(nvars, d);
    let mut echelon: Vec<(usize, Vec<f64>)> = Vec::new();
    for p in products {
        let p = match group {
            Some(g) if !g.is_trivial() => orbit_average(&p, g)?,
            _ => p,
        };
        if p.is_zero() {
            continue;
        }
        if independent(&coefficients(&p, &basis), &mut echelon) {
            out.push(p);
        }
    }
    Ok(out)
}

fn collect_products(
    factors: &[Poly],
    degs: &[u32],
    left: u32,
    k: usize,
    powers: &mut Vec<u32>,
    out: &mut Vec<Poly>,
) {
    if k == factors.len() {
        if left == 0 {
            let nvars = factors.first().map_or(0, Poly::nvars);
            let mut p = Poly::one(nvars);
            for (f, &e) in factors.iter().zip(powers.iter()) {
                p = &p * &f.pow(e);
            }
            out.push(p);
        }
        return;
    }
    let mut e = 0;
    while e * degs[k] <= left {
        powers[k] = e;
        collect_products(factors, degs, left - e * degs[k], k + 1, powers, out);
        e += 1;
    }
    powers[k] = 0;
}

fn coefficients(p: &Poly, basis: &[Monomial]) -> Vec<f64> {
    basis.iter().map(|m| p.coeff(m)).collect()
}

/// Reduces `v` against the echelon rows and appends it if a pivot remains.
fn independent(v: &[f64], echelon: &mut Vec<(usize, Vec<f64>)>) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut v = v.to_vec();
    for (pivot, row) in echelon.iter() {
        let f = v[*pivot];
        if f != 0.0 {
            for (a, b) in v.iter_mut().zip(row) {
                *a -= f * b;
            }
        }
    }
    let (k, mag) =
        v.iter().enumerate().fold(
            (0, 0.0f64),
            |b, (i, x)| if x.abs() > b.1 { (i, x.abs()) } else { b },
        );
    if mag <= 1e-10 * scale {
        return false;
    }
    let p = v[k];
    for a in v.iter_mut() {
        *a /= p;
    }
    echelon.push((k, v));
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lorenz_standard, nine_mode_standard, two_cycle};
    use crate::poly::parse_poly;

    fn span(t: TopDegree) -> Vec<Poly> {
        match t {
            TopDegree::Span(v) => v,
            TopDegree::Unrestricted => panic!("expected a span"),
        }
    }

    #[test]
    fn lorenz_spans() {
        let m = lorenz_standard();
        let s2 = span(top_degree_restriction(&m, 2, Some(&m.symmetry)).unwrap());
        assert_eq!(s2.len(), 2);
        assert!(s2.contains(&parse_poly("x1^2", 3).unwrap()));
        assert!(s2.contains(&parse_poly("x2^2 + x3^2", 3).unwrap()));
        let s4 = span(top_degree_restriction(&m, 4, Some(&m.symmetry)).unwrap());
        assert_eq!(s4.len(), 3);
        // Without symmetry, odd powers of x survive.
        assert_eq!(span(top_degree_restriction(&m, 4, None).unwrap()).len(), 3);
        assert_eq!(span(top_degree_restriction(&m, 6, None).unwrap()).len(), 4);
    }

    #[test]
    fn nine_mode_span() {
        let m = nine_mode_standard();
        let s = span(top_degree_restriction(&m, 4, Some(&m.symmetry)).unwrap());
        assert_eq!(s.len(), 3);
        assert_eq!(
            span(top_degree_restriction(&m, 2, Some(&m.symmetry)).unwrap()).len(),
            2
        );
    }

    #[test]
    fn restricted_forms_cancel_at_top_degree() {
        for m in [lorenz_standard(), nine_mode_standard()] {
            for d in [2, 4, 6] {
                for v in span(top_degree_restriction(&m, d, None).unwrap()) {
                    let l = v.lie_derivative(&m.f).unwrap();
                    let top = l.homogeneous_part(d + 1);
                    assert!(
                        top.max_abs_coeff() <= 1e-12 * v.max_abs_coeff(),
                        "{} d={d}",
                        m.id
                    );
                }
            }
        }
    }

    #[test]
    fn odd_field_is_unrestricted_and_missing_ansatz_is_an_error() {
        let m = two_cycle();
        assert_eq!(
            top_degree_restriction(&m, 4, None).unwrap(),
            TopDegree::Unrestricted
        );
        let mut q = lorenz_standard();
        q.ansatz = None;
        assert!(matches!(
            top_degree_restriction(&q, 4, None),
            Err(Error::NoAnsatz(_))
        ));
    }
}
