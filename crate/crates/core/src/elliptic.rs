//! Discrete Dirichlet and Neumann solution maps, the trace lift and the weak
//! conormal derivative.
//!
//! `weak_conormal` returns the boundary rows of `K u`. For a discretely
//! harmonic `u` this is the weak conormal derivative; for other `u` it is the
//! generalized conormal `a_t(u, phi_b)`, which callers can detect through
//! [`interior_residual`].

use std::sync::OnceLock;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use crate::assembly::{embed_k, trace, BoundaryDual, BoundaryField, SparseOperator};
use crate::config::TOLERANCES;
use crate::error::{Error, Result};
use crate::linalg::{self, BandedLu, Scalar};
use crate::mesh::TriMesh;

/// Bulk vector with boundary entries `g` and zero interior entries.
pub fn lift<T: Scalar>(mesh: &TriMesh, g: &BoundaryField<T>) -> DVector<T> {
    let mut u = DVector::from_element(mesh.num_vertices(), T::zero());
    for (b, &v) in mesh.boundary_vertices().iter().enumerate() {
        u[v] = g[b];
    }
    u
}

/// Boundary rows of `K u`.
pub fn weak_conormal<T: Scalar>(mesh: &TriMesh, k: &SparseOperator<T>, u: &DVector<T>) -> BoundaryDual<T> {
    let ku = k.apply(u);
    BoundaryDual(DVector::from_iterator(
        mesh.num_boundary(),
        mesh.boundary_vertices().iter().map(|&v| ku[v]),
    ))
}

/// Max-norm of `K u` over the interior rows.
pub fn interior_residual<T: Scalar>(mesh: &TriMesh, k: &SparseOperator<T>, u: &DVector<T>) -> f64 {
    let ku = k.apply(u);
    mesh.interior_vertices()
        .iter()
        .map(|&v| ku[v].modulus())
        .fold(0.0, f64::max)
}

/// Cached factorizations of one bulk matrix, shared by the Dirichlet,
/// Neumann and conormal maps.
pub struct EllipticSolver<T: Scalar = f64> {
    k: SparseOperator<T>,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    k_ib: CsrMatrix<T>,
    k_inf_norm: f64,
    interior_lu: OnceLock<BandedLu<T>>,
    full_lu: OnceLock<BandedLu<T>>,
}

impl<T: Scalar> EllipticSolver<T> {
    pub fn new(mesh: &TriMesh, k: SparseOperator<T>) -> Self {
        let boundary = mesh.boundary_vertices().to_vec();
        let interior = mesh.interior_vertices().to_vec();
        let k_ib = linalg::extract_block(k.matrix(), &interior, &boundary);
        let mut rows = vec![0.0; k.nrows()];
        for (i, _, v) in k.matrix().triplet_iter() {
            rows[i] += v.modulus();
        }
        let k_inf_norm = rows.into_iter().fold(0.0, f64::max);
        EllipticSolver {
            k,
            boundary,
            interior,
            k_ib,
            k_inf_norm,
            interior_lu: OnceLock::new(),
            full_lu: OnceLock::new(),
        }
    }

    pub fn matrix(&self) -> &SparseOperator<T> {
        &self.k
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary.len()
    }

    fn interior_factor(&self) -> Result<&BandedLu<T>> {
        if let Some(lu) = self.interior_lu.get() {
            return Ok(lu);
        }
        let block = linalg::extract_block(self.k.matrix(), &self.interior, &self.interior);
        let lu = BandedLu::factor(&block).map_err(|e| {
            Error::Solver(format!(
                "interior block factorization failed ({e}); check the coercivity of the family"
            ))
        })?;
        Ok(self.interior_lu.get_or_init(|| lu))
    }

    fn full_factor(&self) -> Result<&BandedLu<T>> {
        if let Some(lu) = self.full_lu.get() {
            return Ok(lu);
        }
        let lu = BandedLu::factor(self.k.matrix())?;
        Ok(self.full_lu.get_or_init(|| lu))
    }

    /// Discretely harmonic extension of `g`: trace `g`, zero interior residual.
    pub fn solve_dirichlet(&self, g: &BoundaryField<T>) -> Result<DVector<T>> {
        let n = self.k.nrows();
        let mut u = DVector::from_element(n, T::zero());
        for (b, &v) in self.boundary.iter().enumerate() {
            u[v] = g[b];
        }
        if !self.interior.is_empty() {
            let rhs = -linalg::mul_vec(&self.k_ib, g.values());
            let ui = self.interior_factor()?.solve(&rhs);
            for (i, &v) in self.interior.iter().enumerate() {
                u[v] = ui[i];
            }
        }
        let ku = self.k.apply(&u);
        let residual = self.interior.iter().map(|&v| ku[v].modulus()).fold(0.0, f64::max);
        self.check(residual, &u, 0.0)?;
        Ok(u)
    }

    /// Solution of `K u = embed_k(F)`.
    pub fn solve_neumann(&self, f: &BoundaryDual<T>) -> Result<DVector<T>> {
        let mut rhs = DVector::from_element(self.k.nrows(), T::zero());
        for (b, &v) in self.boundary.iter().enumerate() {
            rhs[v] = f[b];
        }
        self.solve_bulk(&rhs)
    }

    /// Solution of `K u = rhs` for an arbitrary bulk functional.
    pub fn solve_bulk(&self, rhs: &DVector<T>) -> Result<DVector<T>> {
        let u = self.full_factor()?.solve(rhs);
        let residual = (self.k.apply(&u) - rhs).iter().map(|z| z.modulus()).fold(0.0, f64::max);
        let rhs_norm = rhs.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        self.check(residual, &u, rhs_norm)?;
        Ok(u)
    }

    pub fn weak_conormal(&self, u: &DVector<T>) -> BoundaryDual<T> {
        let ku = self.k.apply(u);
        BoundaryDual(DVector::from_iterator(
            self.boundary.len(),
            self.boundary.iter().map(|&v| ku[v]),
        ))
    }

    fn check(&self, residual: f64, u: &DVector<T>, rhs_norm: f64) -> Result<()> {
        let u_norm = u.iter().map(|z| z.modulus()).fold(0.0, f64::max);
        let scale = self.k_inf_norm * u_norm + rhs_norm;
        if !residual.is_finite() || residual > TOLERANCES.residual * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!(
                "residual {residual:e} exceeds tolerance relative to scale {scale:e}"
            )));
        }
        Ok(())
    }
}

pub fn solve_dirichlet<T: Scalar>(mesh: &TriMesh, k: &SparseOperator<T>, g: &BoundaryField<T>) -> Result<DVector<T>> {
    EllipticSolver::new(mesh, k.clone()).solve_dirichlet(g)
}

pub fn solve_neumann<T: Scalar>(mesh: &TriMesh, k: &SparseOperator<T>, f: &BoundaryDual<T>) -> Result<DVector<T>> {
    EllipticSolver::new(mesh, k.clone()).solve_neumann(f)
}

/// Dirichlet solve of a real symmetric positive definite system by conjugate
/// gradients on the interior block.
pub fn solve_dirichlet_cg(mesh: &TriMesh, k: &SparseOperator, g: &BoundaryField) -> Result<DVector<f64>> {
    let interior = mesh.interior_vertices();
    let boundary = mesh.boundary_vertices();
    let mut u = lift(mesh, g);
    if interior.is_empty() {
        return Ok(u);
    }
    let kii = linalg::extract_block(k.matrix(), interior, interior);
    let kib = linalg::extract_block(k.matrix(), interior, boundary);
    let rhs = -linalg::mul_vec(&kib, g.values());
    let ui = linalg::conjugate_gradient(&kii, &rhs)?;
    for (i, &v) in interior.iter().enumerate() {
        u[v] = ui[i];
    }
    Ok(u)
}

/// `trace(solve_neumann(F))`, the inverse DtN applied to `F`.
pub fn neumann_trace<T: Scalar>(mesh: &TriMesh, solver: &EllipticSolver<T>, f: &BoundaryDual<T>) -> Result<BoundaryField<T>> {
    Ok(trace(mesh, &solver.solve_bulk(&embed_k(mesh, f))?))
}
