use std::collections::VecDeque;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::Scalar;
use crate::config::TOLERANCES;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern.
///
/// Returns `perm` with `perm[new] = old`. Each connected component is started
/// from a pseudo-peripheral vertex; ties are broken by index so the ordering is
/// deterministic.
pub fn reverse_cuthill_mckee<T: Scalar>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplet_iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let bfs_levels = |start: usize, mask: &[bool]| -> (usize, usize) {
        // returns (eccentricity, a farthest vertex of minimal degree)
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut far = start;
        while let Some(v) = queue.pop_front() {
            let dv = dist[v];
            if dv > dist[far] || (dv == dist[far] && degree[v] < degree[far]) {
                far = v;
            }
            for &w in &adj[v] {
                if !mask[w] && dist[w] == usize::MAX {
                    dist[w] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        (dist[far], far)
    };

    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unplaced vertex exists");
        let mut root = seed;
        let (mut ecc, mut far) = bfs_levels(root, &placed);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &placed);
            if e2 <= ecc {
                break;
            }
            root = far;
            ecc = e2;
            far = f2;
        }
        let start = order.len();
        placed[root] = true;
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factorization without pivoting in banded storage after RCM reordering.
///
/// Valid for matrices whose Hermitian part is positive definite, which is
/// the case for every coercive form and every shift with `Re(lambda) <= 0`.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    bw: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Solver(format!(
                "cannot factor a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let bw = a
            .triplet_iter()
            .map(|(i, j, _)| inv[i].abs_diff(inv[j]))
            .max()
            .unwrap_or(0);
        let width = 2 * bw + 1;
        let mut data = vec![T::zero(); n * width];
        let mut diag_scale = 0.0f64;
        for (i, j, &v) in a.triplet_iter() {
            let (r, c) = (inv[i], inv[j]);
            data[r * width + c + bw - r] += v;
            if i == j {
                diag_scale = diag_scale.max(v.modulus());
            }
        }
        let floor = TOLERANCES.pivot_floor * diag_scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = data[k * width + bw];
            if !(pivot.modulus() > floor) {
                return Err(Error::Solver(format!(
                    "zero pivot at row {k} (|pivot| = {:e}); the form is probably not coercive \
                     on this block",
                    pivot.modulus()
                )));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let lik_pos = i * width + k + bw - i;
                let lik = data[lik_pos] / pivot;
                if lik == T::zero() {
                    continue;
                }
                data[lik_pos] = lik;
                for j in k + 1..=last {
                    let ukj = data[k * width + j + bw - k];
                    data[i * width + j + bw - i] -= lik * ukj;
                }
            }
        }
        Ok(BandedLu { n, bw, perm, inv, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        assert_eq!(rhs.len(), self.n, "right-hand side has the wrong length");
        let (n, bw, width) = (self.n, self.bw, 2 * self.bw + 1);
        let mut y: Vec<T> = self.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for k in i.saturating_sub(bw)..i {
                acc -= self.data[i * width + k + bw - i] * y[k];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..=(i + bw).min(n.saturating_sub(1)) {
                acc -= self.data[i * width + j + bw - i] * y[j];
            }
            y[i] = acc / self.data[i * width + bw];
        }
        DVector::from_iterator(n, self.inv.iter().map(|&new| y[new]))
    }
}
