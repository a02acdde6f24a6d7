//! Coordinate / compressed-row sparse matrices for superoperators.

use crate::linalg::CMat;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Sparse square (or rectangular) complex matrix in CSR form.
///
/// Built from coordinate triplets in deterministic order; duplicate entries
/// are summed.
#[derive(Debug, Clone)]
pub struct SparseSuperOp {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

#[derive(Debug, Default, Clone)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: Complex64) {
        debug_assert!(r < self.rows && c < self.cols);
        if v != Complex64::new(0.0, 0.0) {
            self.entries.push((r, c, v));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_csr(mut self) -> SparseSuperOp {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        SparseSuperOp { rows: self.rows, cols: self.cols, indptr, indices, values }
    }
}

impl SparseSuperOp {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Triplets::new(rows, cols).into_csr()
    }

    pub fn from_dense(m: &CMat) -> Self {
        let mut t = Triplets::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push(i, j, m[(i, j)]);
            }
        }
        t.into_csr()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, Complex64::new(1.0, 0.0));
        }
        t.into_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        let body = |(r, out): (usize, &mut Complex64)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        };
        if self.nnz() > 1 << 16 {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = Triplets::new(self.rows, self.cols);
        t.entries.extend(self.triplets());
        t.entries.extend(other.triplets());
        t.into_csr()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.cols, self.rows);
        t.entries.extend(self.triplets().map(|(r, c, v)| (c, r, v)));
        t.into_csr()
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut t = Triplets::new(self.rows, other.cols);
        for r in 0..self.rows {
            let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_default() += a * b;
                }
            }
            for (c, v) in acc {
                t.push(r, c, v);
            }
        }
        t.into_csr()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut t = Triplets::new(self.rows * other.rows, self.cols * other.cols);
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                t.push(r1 * other.rows + r2, c1 * other.cols + c2, v1 * v2);
            }
        }
        t.into_csr()
    }

    /// Restricts to the rows/columns listed in `keep` (in that order).
    pub fn project(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.rows.max(self.cols)];
        for (i, &k) in keep.iter().enumerate() {
            pos[k] = i;
        }
        let mut t = Triplets::new(keep.len(), keep.len());
        for (i, &r) in keep.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    t.push(i, pos[c], v);
                }
            }
        }
        t.into_csr()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn duplicates_are_summed() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, c(1.0, 0.0));
        t.push(0, 1, c(2.0, 1.0));
        t.push(1, 0, c(-1.0, 0.0));
        let m = t.into_csr();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
        assert_eq!(m.matvec(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(3.0, 1.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn kron_and_mul_match_dense() {
        let a = CMat::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let b = CMat::from_fn(3, 3, |i, j| c((i * j) as f64, 1.0));
        let sa = SparseSuperOp::from_dense(&a);
        let sb = SparseSuperOp::from_dense(&b);
        assert!((sa.kron(&sb).to_dense() - a.kronecker(&b)).norm() < 1e-12);
        assert!((sa.mul(&sa).to_dense() - &a * &a).norm() < 1e-12);
    }
}
