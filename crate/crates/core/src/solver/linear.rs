//! Saddle-point linear algebra: sparse LU through faer and a restarted
//! GMRES with a block-triangular preconditioner.

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::prelude::Solve;
use faer::MatMut;

use super::SolverError;
use crate::fem::sparse::{dot, norm2};
use crate::fem::CsrMatrix;
use crate::scalar::Real;

/// Sparse LU factorization reusing its symbolic analysis for every matrix
/// with the same pattern.
pub struct DirectSolver<T: Real> {
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
    lu: Option<Lu<usize, T>>,
    n: usize,
}

impl<T: Real> Default for DirectSolver<T> {
    fn default() -> Self {
        DirectSolver { symbolic: None, lu: None, n: 0 }
    }
}

impl<T: Real> DirectSolver<T> {
    pub fn factor(&mut self, m: &CsrMatrix<T>) -> Result<(), SolverError> {
        let n = m.nrows();
        // CSC storage of `m` is CSR storage of its transpose.
        let t = m.transpose();
        let fresh = match &self.symbolic {
            Some((p, i, _)) => p.as_slice() != t.row_ptr() || i.as_slice() != t.col_idx(),
            None => true,
        };
        if fresh {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, t.row_ptr(), None, t.col_idx());
            let symbolic = SymbolicLu::try_new(sym).map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
            self.symbolic = Some((t.row_ptr().to_vec(), t.col_idx().to_vec(), symbolic));
        }
        let (ptr, idx, symbolic) = self.symbolic.as_ref().unwrap();
        let mat = SparseColMatRef::new(SymbolicSparseColMatRef::new_checked(n, n, ptr, None, idx), t.values());
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        self.lu = Some(lu);
        self.n = n;
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let lu = self.lu.as_ref().expect("factor before solve");
        let n = self.n;
        let view = MatMut::from_column_major_slice_mut(b, n, 1);
        lu.solve_in_place(view);
    }
}

pub struct LinearOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Relative residual `|b - M x| / |b|` after the solve.
    pub residual: T,
    pub history: Vec<f64>,
}

fn relative<T: Real>(r: &[T], bnorm: T) -> T {
    let rn = norm2(r);
    if bnorm > T::zero() {
        rn / bnorm
    } else {
        rn
    }
}

fn residual<T: Real>(m: &CsrMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    m.mul_vec(x).iter().zip(b).map(|(ax, bi)| *bi - *ax).collect()
}

/// Direct solve followed by one step of iterative refinement.
pub fn solve_direct<T: Real>(
    solver: &mut DirectSolver<T>,
    m: &CsrMatrix<T>,
    b: &[T],
    tol: T,
) -> Result<LinearOutcome<T>, SolverError> {
    solver.factor(m)?;
    let bnorm = norm2(b);
    let mut x = b.to_vec();
    solver.solve_in_place(&mut x);
    let mut r = residual(m, &x, b);
    let mut history = vec![relative(&r, bnorm).to_f64_lossy()];
    solver.solve_in_place(&mut r);
    for (xi, di) in x.iter_mut().zip(&r) {
        *xi += *di;
    }
    let res = relative(&residual(m, &x, b), bnorm);
    history.push(res.to_f64_lossy());
    if !(res <= tol) {
        return Err(SolverError::LinearSolve { history });
    }
    Ok(LinearOutcome { x, iterations: 1, residual: res, history })
}

/// Right-preconditioned restarted GMRES.
pub fn gmres<T: Real>(
    matvec: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: T,
    restart: usize,
    max_iter: usize,
) -> Result<LinearOutcome<T>, SolverError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut history = Vec::new();
    if bnorm == T::zero() {
        return Ok(LinearOutcome { x, iterations: 0, residual: T::zero(), history: vec![0.0] });
    }
    let mut total = 0;
    loop {
        let r: Vec<T> = matvec(&x).iter().zip(b).map(|(ax, bi)| *bi - *ax).collect();
        let beta = norm2(&r);
        let rel = beta / bnorm;
        history.push(rel.to_f64_lossy());
        if rel <= tol {
            return Ok(LinearOutcome { x, iterations: total, residual: rel, history });
        }
        if total >= max_iter {
            return Err(SolverError::LinearSolve { history });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|ri| *ri / beta).collect()];
        let mut z: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..m {
            let zk = precond(&v[k]);
            let mut w = matvec(&zk);
            z.push(zk);
            // Modified Gram-Schmidt.
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * *vj;
                }
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            let (c, s) = if den == T::zero() { (T::one(), T::zero()) } else { (h[k][k] / den, h[k + 1][k] / den) };
            cs[k] = c;
            sn[k] = s;
            let hk1 = h[k + 1][k];
            h[k][k] = c * h[k][k] + s * hk1;
            h[k + 1][k] = T::zero();
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            total += 1;
            k_done = k + 1;
            let est = g[k + 1].abs() / bnorm;
            history.push(est.to_f64_lossy());
            if est <= tol * T::of(0.5) || hk1 == T::zero() {
                break;
            }
            v.push(w.iter().map(|wi| *wi / hk1).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![T::zero(); k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in i + 1..k_done {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xj, zj) in x.iter_mut().zip(zi) {
                *xj += *yi * *zj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.3));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn direct_solve_and_reuse() {
        let m = laplace_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut s = DirectSolver::default();
        let out = solve_direct(&mut s, &m, &b, 1e-12).unwrap();
        assert!(out.residual < 1e-13);
        let mut m2 = m.clone();
        m2.scale(2.0);
        let out2 = solve_direct(&mut s, &m2, &b, 1e-12).unwrap();
        for (a, c) in out.x.iter().zip(&out2.x) {
            assert!((a - 2.0 * c).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_matches_direct() {
        let m = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.1).collect();
        let out = gmres(|x| m.mul_vec(x), |r| r.iter().map(|v| v / 3.0).collect(), &b, 1e-10, 15, 500).unwrap();
        let mut s = DirectSolver::default();
        let d = solve_direct(&mut s, &m, &b, 1e-12).unwrap();
        for (a, c) in out.x.iter().zip(&d.x) {
            assert!((a - c).abs() < 1e-7);
        }
        assert!(out.iterations > 0);
    }

    #[test]
    fn singular_matrix_fails() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let mut s = DirectSolver::default();
        assert!(solve_direct(&mut s, &m, &[1.0, 0.0], 1e-10).is_err());
    }
}
