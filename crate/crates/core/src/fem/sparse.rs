//! Compressed sparse row matrices with a fixed pattern.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Canonical triplet form: duplicates summed, sorted row-major.
pub type Triplets<T> = Vec<(usize, usize, T)>;

impl<T: Real> CsrMatrix<T> {
    /// Zero matrix with the given pattern; each row's columns are sorted and
    /// deduplicated.
    pub fn from_pattern(ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { nrows: rows.len(), ncols, row_ptr, col_idx, values: vec![T::zero(); nnz] }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(ncols, rows);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, (0..n).map(|i| vec![i]).collect());
        m.values.iter_mut().for_each(|v| *v = T::one());
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Storage position of entry `(r, c)`, if it is in the pattern.
    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|k| a + k)
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c).map_or(T::zero(), |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`; panics if the entry is outside the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        let k = self.position(r, c).unwrap_or_else(|| panic!("entry ({r}, {c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn set_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn scale(&mut self, s: T) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`; patterns must be identical.
    pub fn axpy(&mut self, s: T, other: &CsrMatrix<T>) {
        assert_eq!(self.col_idx, other.col_idx, "pattern mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * *b;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `self^T x`.
    pub fn mul_t_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (r, xr) in x.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&j, &a) in c.iter().zip(v) {
                y[j] += a * *xr;
            }
        }
        y
    }

    /// Bilinear form `x^T self y`.
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| *a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix<T> {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                next[c] += 1;
                col_idx[dst] = r;
                values[dst] = self.values[k];
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// Canonical triplets, sorted row-major, explicit zeros dropped.
    pub fn to_triplets(&self) -> Triplets<T> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            out.extend(c.iter().zip(v).filter(|(_, &a)| a != T::zero()).map(|(&j, &a)| (r, j, a)));
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            for (&j, &a) in c.iter().zip(v) {
                d[r][j] = a;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            for (&j, &a) in c.iter().zip(v) {
                m = m.max((a - self.get(j, r)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Expands a scalar node-to-node pattern into `d`-component blocks with
/// interleaved numbering `node * d + component`.
pub fn expand_scalar(pattern: &[Vec<usize>], d: usize) -> Vec<Vec<usize>> {
    let mut rows = Vec::with_capacity(pattern.len() * d);
    for cols in pattern {
        let expanded: Vec<usize> = cols.iter().flat_map(|&c| (0..d).map(move |b| c * d + b)).collect();
        for _ in 0..d {
            rows.push(expanded.clone());
        }
    }
    rows
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
