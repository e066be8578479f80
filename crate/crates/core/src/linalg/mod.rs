//! Linear algebra kernels: sparse storage helpers, the banded direct solver,
//! conjugate gradients and the dense routines shared by verification code.

mod band;
mod cg;
pub mod dense;
mod sparse;

pub use band::{reverse_cuthill_mckee, BandedLu};
pub use cg::conjugate_gradient;
pub use sparse::{
    csr_from_triplets, extract_block, max_abs, mul_vec, sparse_to_dense, transpose,
};

/// Scalar type accepted by the generic solvers (`f64` or `Complex64`).
pub trait Scalar: nalgebra::ComplexField<RealField = f64> + Copy {}
impl<T: nalgebra::ComplexField<RealField = f64> + Copy> Scalar for T {}
