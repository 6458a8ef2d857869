use nalgebra::DMatrix;

use super::{Layout, SosProgram};
use crate::error::{Error, Result};
use crate::poly::Monomial;
use crate::sdp::SdpSolution;
use crate::Poly;

/// One diagonal block of a recovered Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub basis: Vec<Monomial>,
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

/// Certificate data for one SOS constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredSos {
    pub name: String,
    pub gram: Vec<GramMatrix>,
    /// `b^T Q b` assembled from the Gram blocks.
    pub sigma: Poly,
    /// The constraint expression at the recovered decision values.
    pub target: Poly,
    /// Largest coefficient mismatch between `sigma` and `target`.
    pub reconstruction_error: f64,
}

impl RecoveredSos {
    pub fn min_eigenvalue(&self) -> f64 {
        self.gram
            .iter()
            .map(|g| g.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovered {
    pub values: Vec<f64>,
    pub objective: f64,
    pub sos: Vec<RecoveredSos>,
}

impl Recovered {
    pub fn max_reconstruction_error(&self) -> f64 {
        self.sos
            .iter()
            .map(|s| s.reconstruction_error)
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sos
            .iter()
            .map(RecoveredSos::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// Maps an SDP solution of `compile(program)` back to the program.
pub fn recover(program: &SosProgram, layout: &Layout, sol: &SdpSolution) -> Result<Recovered> {
    if layout.constraints.len() != program.constraints.len() {
        return Err(Error::DimensionMismatch {
            expected: program.constraints.len(),
            found: layout.constraints.len(),
        });
    }
    let values = layout.decision_values(&sol.free);
    let objective = program.objective.iter().map(|&(k, o)| o * values[k]).sum();
    let mut sos = Vec::with_capacity(layout.constraints.len());
    for (con, lay) in program.constraints.iter().zip(&layout.constraints) {
        let target = con.expr.evaluate(&values)?;
        let mut sigma = Poly::zero(program.nvars());
        let mut gram = Vec::with_capacity(lay.blocks.len());
        for block in &lay.blocks {
            let q = sol
                .blocks
                .get(block.sdp_block)
                .ok_or(Error::DimensionMismatch {
                    expected: block.sdp_block + 1,
                    found: sol.blocks.len(),
                })?
                .clone();
            let basis: Vec<Monomial> = block
                .members
                .iter()
                .map(|&k| lay.basis[k].clone())
                .collect();
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    sigma.add_term(basis[i].mul(&basis[j]), q[(i, j)]);
                }
            }
            gram.push(GramMatrix {
                min_eigenvalue: min_eig(&q),
                basis,
                matrix: q,
            });
        }
        sos.push(RecoveredSos {
            name: con.name.clone(),
            reconstruction_error: sigma.max_coeff_diff(&target),
            gram,
            sigma,
            target,
        });
    }
    Ok(Recovered {
        values,
        objective,
        sos,
    })
}
