use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::defaults::EQUILIBRIUM_TOL;
use crate::error::{Error, Result};
use crate::models::OdeModel;

/// An eigenpair of the Jacobian with positive real part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnstableDirection {
    pub eigenvalue: Complex64,
    /// Unit vector; the largest component is real and positive.
    pub direction: Vec<Complex64>,
}

impl UnstableDirection {
    pub fn is_real(&self) -> bool {
        self.eigenvalue.im == 0.0
    }

    /// Real vectors spanning the direction: one for a real eigenvalue, the
    /// real and imaginary parts for a complex one.
    pub fn real_span(&self) -> Vec<Vec<f64>> {
        let re: Vec<f64> = self.direction.iter().map(|c| c.re).collect();
        if self.is_real() {
            return vec![re];
        }
        let im: Vec<f64> = self.direction.iter().map(|c| c.im).collect();
        vec![re, im]
    }
}

/// Jacobian of `f` at `x`, from the exact polynomial derivatives.
pub fn jacobian_at(model: &OdeModel, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let jac = model.jacobian();
    let mut j = DMatrix::zeros(n, n);
    for (r, row) in jac.iter().enumerate() {
        for (c, p) in row.iter().enumerate() {
            j[(r, c)] = p.evaluate(x)?;
        }
    }
    Ok(j)
}

/// Eigenpairs of the Jacobian at the equilibrium `x` with positive real
/// part, sorted by decreasing real part then decreasing imaginary part.
///
/// Both members of a complex pair are returned. A repeated eigenvalue
/// contributes one direction per independent eigenvector, so a defective
/// eigenvalue yields fewer directions than its multiplicity.
pub fn unstable_directions(model: &OdeModel, x: &[f64]) -> Result<Vec<UnstableDirection>> {
    let residual = model.residual(x)?;
    if !(residual <= EQUILIBRIUM_TOL) {
        return Err(Error::NotEquilibrium { residual });
    }
    let j = jacobian_at(model, x)?;
    let n = j.nrows();
    let scale = j.norm().max(1.0);
    let tol = 1e-8 * scale;

    let mut eigs: Vec<Complex64> = j.complex_eigenvalues().iter().copied().collect();
    // Eigenvalues of a real matrix that are real up to rounding are made real.
    for e in &mut eigs {
        if e.im.abs() <= tol {
            e.im = 0.0;
        }
    }
    eigs.retain(|e| e.re > tol);
    eigs.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let mut distinct: Vec<Complex64> = Vec::new();
    for e in eigs {
        if distinct.iter().all(|d| (d - e).norm() > 1e-6 * scale) {
            distinct.push(e);
        }
    }

    let jc: DMatrix<Complex64> = j.map(|v| Complex64::new(v, 0.0));
    let mut out = Vec::new();
    for lam in distinct {
        let shifted = &jc - DMatrix::<Complex64>::identity(n, n) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.as_ref().expect("right singular vectors requested");
        let smax = svd.singular_values.max().max(1.0);
        let mut found = false;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s <= 1e-6 * smax {
                let v: Vec<Complex64> = vt.row(k).iter().map(|c| c.conj()).collect();
                out.push(UnstableDirection {
                    eigenvalue: lam,
                    direction: normalize(v),
                });
                found = true;
            }
        }
        if !found {
            let k = svd.singular_values.imin();
            let v: Vec<Complex64> = vt.row(k).iter().map(|c| c.conj()).collect();
            out.push(UnstableDirection {
                eigenvalue: lam,
                direction: normalize(v),
            });
        }
    }
    Ok(out)
}

fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let k = (0..v.len())
        .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
        .unwrap_or(0);
    let phase = if v.is_empty() || v[k].norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        v[k].conj() / v[k].norm()
    };
    for c in &mut v {
        *c = *c * phase / norm;
    }
    if let Some(c) = v.get_mut(k) {
        c.im = 0.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lorenz_standard, two_cycle, ModelConfig};

    #[test]
    fn lorenz_origin_has_one_unstable_direction() {
        let m = lorenz_standard();
        let d = unstable_directions(&m, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.len(), 1);
        let (s, r) = (10.0f64, 28.0f64);
        let want = (-(s + 1.0) + ((s - 1.0).powi(2) + 4.0 * s * r).sqrt()) / 2.0;
        assert!((d[0].eigenvalue.re - want).abs() < 1e-10);
        assert_eq!(d[0].eigenvalue.im, 0.0);
        // J v = lambda v.
        let j = jacobian_at(&m, &[0.0; 3]).unwrap();
        let v: Vec<f64> = d[0].direction.iter().map(|c| c.re).collect();
        for r in 0..3 {
            let jv: f64 = (0..3).map(|c| j[(r, c)] * v[c]).sum();
            assert!((jv - want * v[r]).abs() < 1e-9);
        }
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn two_cycle_origin_is_a_repelling_spiral() {
        let d = unstable_directions(&two_cycle(), &[0.0, 0.0]).unwrap();
        assert_eq!(d.len(), 2);
        for e in &d {
            assert!(e.eigenvalue.re > 0.0);
            assert!(e.eigenvalue.im != 0.0);
            assert_eq!(e.real_span().len(), 2);
        }
        assert!((d[0].eigenvalue - d[1].eigenvalue.conj()).norm() < 1e-12);
    }

    #[test]
    fn stable_node_has_none() {
        let c = ModelConfig {
            id: "decay".into(),
            variables: vec!["x".into()],
            f: vec!["-x1".into()],
            ..Default::default()
        };
        let m = OdeModel::from_config(&c).unwrap();
        assert!(unstable_directions(&m, &[0.0]).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_equilibrium() {
        let m = lorenz_standard();
        assert!(matches!(
            unstable_directions(&m, &[1.0, 0.0, 0.0]),
            Err(Error::NotEquilibrium { .. })
        ));
    }
}
