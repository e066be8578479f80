//! Dense routines at boundary size: generalized symmetric eigenproblems,
//! Gram-weighted operator norms and Gauss-Legendre rules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::Scalar;
use crate::error::{Error, Result};

pub fn cholesky(gram: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    gram.clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("Gram matrix is not symmetric positive definite".into()))
}

/// Symmetric part `(A + A^T) / 2`.
pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Solves `A v = mu B v` for symmetric `A` and SPD `B`.
///
/// Eigenvalues are returned ascending; the eigenvector columns are
/// `B`-orthonormal (`V^T B V = I`).
pub fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let chol = cholesky(b)?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.ncols()))
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    let c = symmetric_part(&(&linv * a * linv.transpose()));
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let w = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    let vectors = linv.transpose() * w;
    Ok((values, vectors))
}

/// Largest singular value of `C^{1/2} A D^{-1/2}`: the norm of `A` from the
/// space with Gram `D` into the space with Gram `C`.
///
/// Square roots are realized by Cholesky factors, which give the same norm.
pub fn opnorm<T: Scalar>(
    a: &DMatrix<T>,
    domain_gram: &DMatrix<f64>,
    codomain_gram: &DMatrix<f64>,
) -> Result<f64> {
    let lc = cholesky(codomain_gram)?.l();
    let ld = cholesky(domain_gram)?.l();
    // ||x||_D = ||L_D^T x||, so A maps y = L_D^T x to L_C^T A L_D^{-T} y.
    let ld_t = ld.transpose();
    let ld_t_inv = ld_t
        .solve_upper_triangular(&DMatrix::identity(ld.nrows(), ld.ncols()))
        .ok_or_else(|| Error::Solver("singular domain Gram factor".into()))?;
    let left: DMatrix<T> = lc.transpose().map(T::from_real);
    let right: DMatrix<T> = ld_t_inv.map(T::from_real);
    let b = left * a * right;
    Ok(spectral_norm(&b))
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm<T: Scalar>(a: &DMatrix<T>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Eigenvalues of a general real matrix.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    a.clone().complex_eigenvalues().iter().copied().collect()
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(32);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 62 monomial
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((approx - 2.0 / 63.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(5);
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((approx - (1f64.exp() - (-1f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn opnorm_basic_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((opnorm(&id, &id, &id).unwrap() - 1.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((opnorm(&d, &i2, &i2).unwrap() - 3.0).abs() < 1e-14);
        // scaling the codomain Gram by 4 doubles the norm, the domain Gram halves it
        assert!((opnorm(&d, &i2, &(&i2 * 4.0)).unwrap() - 6.0).abs() < 1e-13);
        assert!((opnorm(&d, &(&i2 * 4.0), &i2).unwrap() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn generalized_eigen_is_b_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 2.0, 0.5, 0.0, 0.5, 2.0]);
        let (mu, v) = generalized_symmetric_eigen(&a, &b).unwrap();
        assert!((v.transpose() * &b * &v - DMatrix::identity(3, 3)).amax() < 1e-12);
        for k in 0..3 {
            let r = &a * v.column(k) - &b * v.column(k) * mu[k];
            assert!(r.amax() < 1e-12);
        }
        assert!(mu[0] <= mu[1] && mu[1] <= mu[2]);
    }
}
