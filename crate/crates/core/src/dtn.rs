//! The Dirichlet-to-Neumann operator `A(t)` of a coefficient family and its
//! calculus: application, dense materialization, inverse, resolvent, adjoint
//! and negative fractional powers.
//!
//! `A(t)` maps boundary values to boundary duals. Its L2 realization acting
//! on boundary fields is `M^{-1} S` with `S` the DtN matrix and `M` the
//! boundary mass matrix; fractional powers refer to that realization.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{
    add_boundary_mass, assemble_form, check_sector, embed_k, trace, BoundaryDual, BoundaryField,
    BoundaryMass, SparseOperator,
};
use crate::coeffs::{CoefficientFamily, Time};
use crate::config::TOLERANCES;
use crate::elliptic::EllipticSolver;
use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::mesh::TriMesh;

const RESOLVENT_CACHE_LIMIT: usize = 64;

/// Method for `A^{-theta}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionalMethod {
    /// Resolvent quadrature of the Balakrishnan integral.
    Balakrishnan,
    /// Generalized eigendecomposition; symmetric operators only.
    Spectral,
}

/// Generalized eigenpairs `S v = mu M v` with `V^T M V = I`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Shifted bulk solvers keyed by the bits of `lambda`.
type ResolventCache = HashMap<(u64, u64), Arc<EllipticSolver<Complex64>>>;

pub struct DtnOperator {
    mesh: Arc<TriMesh>,
    family: CoefficientFamily,
    time: Time,
    mass: Arc<BoundaryMass>,
    solver: EllipticSolver<f64>,
    matrix: OnceLock<DMatrix<f64>>,
    matrix_lu: OnceLock<LU<f64, Dyn, Dyn>>,
    spectrum: OnceLock<Spectrum>,
    resolvents: Mutex<ResolventCache>,
}

impl fmt::Debug for DtnOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DtnOperator")
            .field("family", &self.family.name())
            .field("time", &self.time)
            .field("boundary_dofs", &self.mesh.num_boundary())
            .finish()
    }
}

impl DtnOperator {
    pub fn new(mesh: Arc<TriMesh>, family: CoefficientFamily, time: Time) -> Result<Self> {
        let mass = Arc::new(BoundaryMass::new(&mesh)?);
        Self::with_mass(mesh, family, time, mass)
    }

    /// Reuses an already factored boundary mass matrix of the same mesh.
    pub fn with_mass(
        mesh: Arc<TriMesh>,
        family: CoefficientFamily,
        time: Time,
        mass: Arc<BoundaryMass>,
    ) -> Result<Self> {
        let k = assemble_form(&mesh, &family, time)?;
        Ok(Self::from_parts(mesh, family, time, mass, k))
    }

    fn from_parts(
        mesh: Arc<TriMesh>,
        family: CoefficientFamily,
        time: Time,
        mass: Arc<BoundaryMass>,
        k: SparseOperator,
    ) -> Self {
        let solver = EllipticSolver::new(&mesh, k);
        DtnOperator {
            mesh,
            family,
            time,
            mass,
            solver,
            matrix: OnceLock::new(),
            matrix_lu: OnceLock::new(),
            spectrum: OnceLock::new(),
            resolvents: Mutex::new(HashMap::new()),
        }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn time(&self) -> Time {
        self.time
    }

    pub fn mass(&self) -> &Arc<BoundaryMass> {
        &self.mass
    }

    /// Bulk matrix `K(t)`.
    pub fn bulk_matrix(&self) -> &SparseOperator {
        self.solver.matrix()
    }

    pub fn solver(&self) -> &EllipticSolver<f64> {
        &self.solver
    }

    pub fn num_boundary(&self) -> usize {
        self.mesh.num_boundary()
    }

    /// `A(t) g`: weak conormal of the discretely harmonic extension of `g`.
    pub fn apply(&self, g: &BoundaryField) -> Result<BoundaryDual> {
        if let Some(s) = self.matrix.get() {
            return Ok(BoundaryDual(s * g.values()));
        }
        let u = self.solver.solve_dirichlet(g)?;
        Ok(self.solver.weak_conormal(&u))
    }

    /// Dense DtN matrix `S`, column `b` being `A(t) e_b`.
    pub fn matrix(&self) -> Result<&DMatrix<f64>> {
        if let Some(s) = self.matrix.get() {
            return Ok(s);
        }
        let nb = self.num_boundary();
        if nb > TOLERANCES.dense_cap {
            return Err(Error::Size(format!(
                "{nb} boundary DOFs exceed the dense cap {}; use apply instead",
                TOLERANCES.dense_cap
            )));
        }
        let mut s = DMatrix::zeros(nb, nb);
        for b in 0..nb {
            let u = self.solver.solve_dirichlet(&BoundaryField::unit(nb, b))?;
            s.set_column(b, self.solver.weak_conormal(&u).values());
        }
        Ok(self.matrix.get_or_init(|| s))
    }

    /// `A(t)^{-1} F`, the trace of the Neumann solution with data `F`.
    pub fn inverse_apply(&self, f: &BoundaryDual) -> Result<BoundaryField> {
        let u = self.solver.solve_neumann(f)?;
        Ok(trace(&self.mesh, &u))
    }

    fn resolvent_solver(&self, lambda: Complex64) -> Result<Arc<EllipticSolver<Complex64>>> {
        let key = (lambda.re.to_bits(), lambda.im.to_bits());
        if let Some(s) = self.resolvents.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let shifted = add_boundary_mass(&self.mesh, self.solver.matrix(), -lambda);
        let solver = Arc::new(EllipticSolver::new(&self.mesh, shifted));
        let mut cache = self.resolvents.lock().expect("cache lock");
        if cache.len() >= RESOLVENT_CACHE_LIMIT {
            cache.clear();
        }
        Ok(cache.entry(key).or_insert(solver).clone())
    }

    /// `(A(t) - lambda)^{-1} F` through the shifted bulk problem.
    pub fn resolvent_apply(
        &self,
        lambda: Complex64,
        f: &BoundaryDual<Complex64>,
    ) -> Result<BoundaryField<Complex64>> {
        check_sector(lambda)?;
        let solver = self.resolvent_solver(lambda)?;
        let u = solver.solve_bulk(&embed_k(&self.mesh, f))?;
        Ok(trace(&self.mesh, &u))
    }

    /// Dense `(S - lambda M)^{-1}`, mapping duals to fields.
    pub fn resolvent_matrix(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        check_sector(lambda)?;
        let s = self.matrix()?;
        let shifted = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
            Complex64::new(s[(i, j)], 0.0) - lambda * self.mass.dense()[(i, j)]
        });
        let n = s.nrows();
        shifted
            .lu()
            .solve(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Solver(format!("S - lambda M is singular at lambda = {lambda}")))
    }

    /// Operator of the adjoint family; its matrix is `S^T`.
    pub fn adjoint(&self) -> Result<DtnOperator> {
        DtnOperator::with_mass(
            self.mesh.clone(),
            self.family.adjoint(),
            self.time,
            self.mass.clone(),
        )
    }

    /// Declared symmetric, or numerically symmetric to 1e-12 relative.
    pub fn is_symmetric(&self) -> Result<bool> {
        if self.family.is_symmetric() {
            return Ok(true);
        }
        let s = self.matrix()?;
        Ok((s - s.transpose()).amax() <= 1e-12 * s.amax())
    }

    /// Generalized eigenpairs of `(S, M)` for symmetric operators.
    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(sp) = self.spectrum.get() {
            return Ok(sp);
        }
        if !self.is_symmetric()? {
            return Err(Error::Unsupported(
                "spectral calculus needs a symmetric DtN matrix".into(),
            ));
        }
        let s = dense::symmetric_part(self.matrix()?);
        let (values, vectors) = dense::generalized_symmetric_eigen(&s, self.mass.dense())?;
        Ok(self.spectrum.get_or_init(|| Spectrum { values, vectors }))
    }

    fn matrix_lu(&self) -> Result<&LU<f64, Dyn, Dyn>> {
        if let Some(lu) = self.matrix_lu.get() {
            return Ok(lu);
        }
        let lu = self.matrix()?.clone().lu();
        Ok(self.matrix_lu.get_or_init(|| lu))
    }

    /// `S^{-1} X` with the dense factorization.
    pub fn dense_inverse(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.matrix_lu()?
            .solve(x)
            .ok_or_else(|| Error::Solver("DtN matrix is singular".into()))
    }

    /// `A^{-theta} M^{-1} F`: the negative fractional power of the L2
    /// realization applied to the L2 representative of `F`.
    pub fn fractional_power_apply(
        &self,
        theta: f64,
        f: &BoundaryDual,
        method: FractionalMethod,
    ) -> Result<BoundaryField> {
        let rhs = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        let out = self.fractional_power_on(theta, &rhs, method)?;
        Ok(BoundaryField(out.column(0).into_owned()))
    }

    /// Dense matrix of `A^{-theta}` acting on boundary fields.
    pub fn fractional_power_matrix(&self, theta: f64, method: FractionalMethod) -> Result<DMatrix<f64>> {
        self.fractional_power_on(theta, self.mass.dense(), method)
    }

    /// `A^{-theta} M^{-1} R` for a block of dual columns `R`.
    pub fn fractional_power_on(
        &self,
        theta: f64,
        rhs: &DMatrix<f64>,
        method: FractionalMethod,
    ) -> Result<DMatrix<f64>> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid("theta", "must lie in ]0, 1["));
        }
        match method {
            FractionalMethod::Spectral => {
                let sp = self.spectrum()?;
                let scaled = DVector::from_iterator(
                    sp.values.len(),
                    sp.values.iter().map(|&mu| mu.powf(-theta)),
                );
                let coeffs = sp.vectors.transpose() * rhs;
                Ok(&sp.vectors * DMatrix::from_diagonal(&scaled) * coeffs)
            }
            FractionalMethod::Balakrishnan => self.balakrishnan(theta, rhs),
        }
    }

    /// `sin(theta pi)/pi int_R e^{(1-theta)s} (S + e^s M)^{-1} R ds` by
    /// composite Gauss-Legendre on `[-s_max, s_max]`, plus the two tails from
    /// the Neumann series of `(rho + A)^{-1}` near `rho = 0` and `rho = inf`.
    fn balakrishnan(&self, theta: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = self.matrix()?;
        let m = self.mass.dense();
        let s_max = TOLERANCES.balakrishnan_s_max;
        let per_unit = TOLERANCES.balakrishnan_points_per_unit;
        let (gx, gw) = dense::gauss_legendre(per_unit);
        let cells = (2.0 * s_max).round() as usize;
        let nodes: Vec<(f64, f64)> = (0..cells)
            .flat_map(|c| {
                let mid = -s_max + c as f64 + 0.5;
                gx.iter().zip(gw.iter()).map(move |(&x, &w)| (mid + 0.5 * x, 0.5 * w))
            })
            .collect();
        let terms: Vec<Result<DMatrix<f64>>> = nodes
            .par_iter()
            .map(|&(sv, w)| {
                let shifted = s + m * sv.exp();
                shifted
                    .lu()
                    .solve(rhs)
                    .map(|x| x * (w * ((1.0 - theta) * sv).exp()))
                    .ok_or_else(|| Error::Solver("S + rho M is singular".into()))
            })
            .collect();
        let mut total = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for term in terms {
            total += term?;
        }

        let mass_solve = |x: &DMatrix<f64>| -> DMatrix<f64> { self.mass_chol_solve(x) };
        // rho < e^{-s_max}: (rho + A)^{-1} = sum_k (-rho)^k A^{-(k+1)}
        let mut power = self.dense_inverse(rhs)?;
        for k in 0..3 {
            let kk = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += &power * (sign * (-(kk + 1.0 - theta) * s_max).exp() / (kk + 1.0 - theta));
            power = self.dense_inverse(&(m * &power))?;
        }
        // rho > e^{s_max}: (rho + A)^{-1} = sum_k (-1)^k A^k rho^{-(k+1)}
        let mut power = mass_solve(rhs);
        for k in 0..3 {
            let kk = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += &power * (sign * (-(kk + theta) * s_max).exp() / (kk + theta));
            power = mass_solve(&(s * &power));
        }
        Ok(total * ((theta * PI).sin() / PI))
    }

    fn mass_chol_solve(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for mut col in out.column_iter_mut() {
            let field = self.mass.to_field(&BoundaryDual(col.clone_owned()));
            col.copy_from(field.values());
        }
        out
    }

    /// `dtn-matrix` dump: dense matrix as CSV, row-major, boundary order.
    pub fn write_matrix_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let s = self.matrix()?;
        let write = |out: &mut W| -> io::Result<()> {
            for i in 0..s.nrows() {
                let row: Vec<String> = (0..s.ncols()).map(|j| format!("{:.15e}", s[(i, j)])).collect();
                writeln!(out, "{}", row.join(","))?;
            }
            Ok(())
        };
        write(&mut out)?;
        Ok(())
    }
}
