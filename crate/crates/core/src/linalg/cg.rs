use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::mul_vec;
use crate::config::TOLERANCES;
use crate::error::{Error, Result};

/// Jacobi-preconditioned conjugate gradients for real SPD systems.
///
/// Stops at relative residual `TOLERANCES.cg_tolerance` or after
/// `cg_iteration_factor * sqrt(n)` iterations, whichever comes first.
pub fn conjugate_gradient(a: &CsrMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    let max_iter = (TOLERANCES.cg_iteration_factor * (n as f64).sqrt()).ceil() as usize;
    let mut diag = DVector::from_element(n, 1.0);
    for (i, j, &v) in a.triplet_iter() {
        if i == j && v > 0.0 {
            diag[i] = v;
        }
    }
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z = r.component_div(&diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..max_iter {
        let ap = mul_vec(a, &p);
        let curvature = p.dot(&ap);
        if !(curvature > 0.0) {
            return Err(Error::Solver("conjugate gradients hit non-positive curvature".into()));
        }
        let step = rz / curvature;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        if r.norm() <= TOLERANCES.cg_tolerance * b_norm {
            return Ok(x);
        }
        z = r.component_div(&diag);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not reach {:e} in {max_iter} iterations",
        TOLERANCES.cg_tolerance
    )))
}
