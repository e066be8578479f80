//! Independent references: modified Bessel functions by power series, the
//! DtN spectrum of the shifted Laplacian on the unit disk, exact modal decay
//! and a dense Schur complement.

use nalgebra::DMatrix;

use crate::assembly::SparseOperator;
use crate::error::{Error, Result};

const SERIES_RANGE: f64 = 30.0;
const DENSE_SCHUR_CAP: usize = 2000;

/// Modified Bessel function of the first kind `I_k(x)` by its power series.
pub fn bessel_i(k: u32, x: f64) -> Result<f64> {
    if !(0.0..=SERIES_RANGE).contains(&x) {
        return Err(Error::Domain(format!(
            "bessel series needs 0 <= x <= {SERIES_RANGE}, got {x}"
        )));
    }
    let half = 0.5 * x;
    // leading term (x/2)^k / k!
    let mut term = 1.0;
    for j in 1..=k {
        term *= half / j as f64;
    }
    if term == 0.0 {
        return Ok(0.0);
    }
    let q = half * half;
    let mut sum = term;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= q / (m as f64 * (m + k) as f64);
        sum += term;
        if term < 1e-16 * sum {
            return Ok(sum);
        }
    }
}

/// `mu_k = kappa I_k'(kappa) / I_k(kappa)` with `kappa = sqrt(-lambda)`: the
/// eigenvalue of the DtN operator of `-Delta - lambda` on the unit disk for
/// the Fourier mode `cos(k theta)`.
pub fn disk_dtn_eigenvalue(lambda: f64, k: u32) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::invalid("lambda", "must be negative"));
    }
    let kappa = (-lambda).sqrt();
    let ik = bessel_i(k, kappa)?;
    let below = bessel_i(if k == 0 { 1 } else { k - 1 }, kappa)?;
    let derivative = below - k as f64 / kappa * ik;
    Ok(kappa * derivative / ik)
}

/// `exp(-mu_k t)`, the decay of mode `k` under `du/dt + A u = 0`.
pub fn exact_mode_decay(lambda: f64, k: u32, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    Ok((-disk_dtn_eigenvalue(lambda, k)? * t).exp())
}

/// `K_bb - K_bi K_ii^{-1} K_ib` by dense LU. `boundary` lists the boundary
/// indices in the order used for the rows and columns of the result.
pub fn dense_schur_dtn(k: &SparseOperator, boundary: &[usize]) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if n > DENSE_SCHUR_CAP {
        return Err(Error::Size(format!(
            "dense Schur complement limited to {DENSE_SCHUR_CAP} unknowns, got {n}"
        )));
    }
    let full = k.to_dense();
    let mut is_boundary = vec![false; n];
    for &b in boundary {
        is_boundary[b] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], cols[j])])
    };
    let kbb = block(boundary, boundary);
    if interior.is_empty() {
        return Ok(kbb);
    }
    let kii = block(&interior, &interior);
    let kib = block(&interior, boundary);
    let kbi = block(boundary, &interior);
    let x = kii
        .lu()
        .solve(&kib)
        .ok_or_else(|| Error::Solver("interior block is singular".into()))?;
    Ok(kbb - kbi * x)
}
