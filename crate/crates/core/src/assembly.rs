//! P1 assembly of the bulk form matrices, the boundary mass matrix and the
//! embedding of boundary functionals into bulk functionals.
//!
//! Triangle integrals use the 3-point edge-midpoint rule (exact for degree 2),
//! so mass entries and stiffness entries with constant coefficients are exact
//! on affine elements. Coefficients are sampled at the quadrature points.

use std::io::{self, Write};
use std::ops::{Deref, Index};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::CsrMatrix;
use num_complex::Complex64;

use crate::coeffs::{preset_laplace_shift, CoefficientFamily, Time};
use crate::error::{Error, Result};
use crate::linalg::{self, dense, Scalar};
use crate::mesh::TriMesh;

/// Function space a vector or operator side lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Nodal values of bulk P1 functions (H1).
    Bulk,
    /// Functionals against bulk hat functions.
    BulkDual,
    /// Nodal values on the boundary (H^{1/2} or L2 representatives).
    BoundaryTrace,
    /// Functionals against boundary hat functions (H^{-1/2} representatives).
    BoundaryDual,
}

/// Sparse matrix tagged with its domain and codomain spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T: Scalar = f64> {
    matrix: CsrMatrix<T>,
    domain: Space,
    codomain: Space,
}

impl<T: Scalar> SparseOperator<T> {
    pub fn new(matrix: CsrMatrix<T>, domain: Space, codomain: Space) -> Self {
        SparseOperator {
            matrix,
            domain,
            codomain,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn domain(&self) -> Space {
        self.domain
    }

    pub fn codomain(&self) -> Space {
        self.codomain
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        linalg::mul_vec(&self.matrix, x)
    }

    pub fn transpose(&self) -> Self {
        SparseOperator {
            matrix: linalg::transpose(&self.matrix),
            domain: self.domain,
            codomain: self.codomain,
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        linalg::sparse_to_dense(&self.matrix)
    }

    /// `self * rhs`; the codomain of `rhs` must be the domain of `self`.
    pub fn compose(&self, rhs: &SparseOperator<T>) -> Result<SparseOperator<T>> {
        if rhs.codomain != self.domain {
            return Err(Error::Unsupported(format!(
                "cannot compose {:?} -> {:?} after {:?} -> {:?}",
                self.domain, self.codomain, rhs.domain, rhs.codomain
            )));
        }
        Ok(SparseOperator {
            matrix: &self.matrix * &rhs.matrix,
            domain: rhs.domain,
            codomain: self.codomain,
        })
    }

    /// Matrix Market coordinate dump (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()>
    where
        T: MarketEntry,
    {
        writeln!(out, "%%MatrixMarket matrix coordinate {} general", T::FIELD)?;
        writeln!(out, "% domain {:?} codomain {:?}", self.domain, self.codomain)?;
        writeln!(out, "{} {} {}", self.matrix.nrows(), self.matrix.ncols(), self.matrix.nnz())?;
        for (i, j, v) in self.matrix.triplet_iter() {
            writeln!(out, "{} {} {}", i + 1, j + 1, v.entry())?;
        }
        Ok(())
    }
}

/// Scalar formatting for Matrix Market output.
pub trait MarketEntry {
    const FIELD: &'static str;
    fn entry(&self) -> String;
}

impl MarketEntry for f64 {
    const FIELD: &'static str = "real";
    fn entry(&self) -> String {
        format!("{self:e}")
    }
}

impl MarketEntry for Complex64 {
    const FIELD: &'static str = "complex";
    fn entry(&self) -> String {
        format!("{:e} {:e}", self.re, self.im)
    }
}

macro_rules! boundary_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T: Scalar = f64>(pub DVector<T>);

        impl<T: Scalar> $name<T> {
            pub fn zeros(n: usize) -> Self {
                $name(DVector::from_element(n, T::zero()))
            }

            pub fn unit(n: usize, b: usize) -> Self {
                let mut v = DVector::from_element(n, T::zero());
                v[b] = T::one();
                $name(v)
            }

            pub fn values(&self) -> &DVector<T> {
                &self.0
            }

            pub fn into_inner(self) -> DVector<T> {
                self.0
            }
        }

        impl<T: Scalar> Deref for $name<T> {
            type Target = DVector<T>;
            fn deref(&self) -> &DVector<T> {
                &self.0
            }
        }

        impl<T: Scalar> Index<usize> for $name<T> {
            type Output = T;
            fn index(&self, i: usize) -> &T {
                &self.0[i]
            }
        }
    };
}

boundary_vector!(
    /// Nodal values at the boundary vertices, in boundary order.
    BoundaryField
);
boundary_vector!(
    /// Coefficients `F_b = <F, phi_b>` against the boundary hat functions.
    BoundaryDual
);

/// Bulk matrix `K(t)` with `K_pq = a_t(phi_q, phi_p)`.
pub fn assemble_form(mesh: &TriMesh, family: &CoefficientFamily, t: Time) -> Result<SparseOperator> {
    let n = mesh.num_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (tri, &nodes) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(tri);
        let grads = mesh.hat_gradients(tri);
        let w = mesh.signed_area(tri) / 3.0;
        let mut local = [[0.0f64; 3]; 3];
        for e in 0..3 {
            let (p0, p1) = (e, (e + 1) % 3);
            let x = (pts[p0] + pts[p1]) * 0.5;
            let s = family.eval(t, &x).map_err(|err| Error::Evaluation {
                x: x.x,
                y: x.y,
                message: err.to_string(),
            })?;
            let mut phi = [0.0; 3];
            phi[p0] = 0.5;
            phi[p1] = 0.5;
            for p in 0..3 {
                for q in 0..3 {
                    local[p][q] += w
                        * (grads[p].dot(&(s.a * grads[q]))
                            + s.b.dot(&grads[q]) * phi[p]
                            + s.c.dot(&grads[p]) * phi[q]
                            + s.d * phi[p] * phi[q]);
                }
            }
        }
        if family.is_symmetric() {
            for p in 0..3 {
                for q in 0..p {
                    local[p][q] = local[q][p];
                }
            }
        }
        for p in 0..3 {
            for q in 0..3 {
                triplets.push((nodes[p], nodes[q], local[p][q]));
            }
        }
    }
    Ok(SparseOperator::new(
        linalg::csr_from_triplets(n, n, &triplets),
        Space::Bulk,
        Space::BulkDual,
    ))
}

/// Boundary mass matrix `M_d` in boundary-DOF numbering (exact on straight edges).
pub fn assemble_boundary_mass(mesh: &TriMesh) -> SparseOperator {
    let nb = mesh.num_boundary();
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for e in mesh.boundary_edges() {
        let len = (mesh.vertices()[e.j] - mesh.vertices()[e.i]).norm();
        let (bi, bj) = (
            mesh.boundary_slot(e.i).expect("boundary edge vertex"),
            mesh.boundary_slot(e.j).expect("boundary edge vertex"),
        );
        triplets.push((bi, bi, len / 3.0));
        triplets.push((bj, bj, len / 3.0));
        triplets.push((bi, bj, len / 6.0));
        triplets.push((bj, bi, len / 6.0));
    }
    SparseOperator::new(
        linalg::csr_from_triplets(nb, nb, &triplets),
        Space::BoundaryTrace,
        Space::BoundaryDual,
    )
}

/// Gram matrix of the H1 inner product `int grad u . grad v + u v`.
pub fn assemble_h1_gram(mesh: &TriMesh) -> SparseOperator {
    let family = preset_laplace_shift(-1.0).expect("valid preset");
    assemble_form(mesh, &family, Time::At(0.0)).expect("constant coefficients never fail")
}

/// `K + coef * T^T M_d T` where `T` selects the boundary trace.
pub fn add_boundary_mass<T: Scalar>(
    mesh: &TriMesh,
    k: &SparseOperator<f64>,
    coef: T,
) -> SparseOperator<T> {
    let n = k.nrows();
    let mut triplets: Vec<(usize, usize, T)> = k
        .matrix()
        .triplet_iter()
        .map(|(i, j, &v)| (i, j, T::from_real(v)))
        .collect();
    let mass = assemble_boundary_mass(mesh);
    let bv = mesh.boundary_vertices();
    for (bi, bj, &m) in mass.matrix().triplet_iter() {
        triplets.push((bv[bi], bv[bj], coef * T::from_real(m)));
    }
    SparseOperator::new(linalg::csr_from_triplets(n, n, &triplets), k.domain(), k.codomain())
}

/// Complex matrix of the shifted form `a_t(u, v) - lambda (u, v)_{L2(boundary)}`.
pub fn assemble_form_shifted(
    mesh: &TriMesh,
    family: &CoefficientFamily,
    t: Time,
    lambda: Complex64,
) -> Result<SparseOperator<Complex64>> {
    check_sector(lambda)?;
    let k = assemble_form(mesh, family, t)?;
    Ok(add_boundary_mass(mesh, &k, -lambda))
}

pub(crate) fn check_sector(lambda: Complex64) -> Result<()> {
    if lambda.re > 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::Domain(format!(
            "lambda = {lambda} must satisfy Re(lambda) <= 0"
        )));
    }
    Ok(())
}

/// Bulk functional `k(F)`: boundary entries carry `F`, interior entries vanish.
pub fn embed_k<T: Scalar>(mesh: &TriMesh, f: &BoundaryDual<T>) -> DVector<T> {
    let mut out = DVector::from_element(mesh.num_vertices(), T::zero());
    for (b, &v) in mesh.boundary_vertices().iter().enumerate() {
        out[v] = f[b];
    }
    out
}

/// Boundary trace of a bulk nodal vector.
pub fn trace<T: Scalar>(mesh: &TriMesh, u: &DVector<T>) -> BoundaryField<T> {
    BoundaryField(DVector::from_iterator(
        mesh.num_boundary(),
        mesh.boundary_vertices().iter().map(|&v| u[v]),
    ))
}

/// Boundary mass matrix with its dense Cholesky factor, converting between
/// boundary fields and boundary duals.
#[derive(Debug, Clone)]
pub struct BoundaryMass {
    sparse: SparseOperator,
    dense: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl BoundaryMass {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let sparse = assemble_boundary_mass(mesh);
        let dense = sparse.to_dense();
        let chol = dense::cholesky(&dense)?;
        Ok(BoundaryMass { sparse, dense, chol })
    }

    pub fn sparse(&self) -> &SparseOperator {
        &self.sparse
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// `M_d g`: the dual of an L2 boundary function.
    pub fn to_dual(&self, g: &BoundaryField) -> BoundaryDual {
        BoundaryDual(self.sparse.apply(g))
    }

    /// `M_d^{-1} F`: the L2 representative of a dual.
    pub fn to_field(&self, f: &BoundaryDual) -> BoundaryField {
        BoundaryField(self.chol.solve(f.values()))
    }

    pub fn l2_norm(&self, g: &BoundaryField) -> f64 {
        g.dot(&self.sparse.apply(g)).max(0.0).sqrt()
    }

    pub fn inner(&self, g: &BoundaryField, h: &BoundaryField) -> f64 {
        g.dot(&self.sparse.apply(h))
    }
}
