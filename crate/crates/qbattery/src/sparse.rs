//! Compact complex CSR matrices.
//!
//! Construction is deterministic: triplets are sorted by `(row, col)` and
//! duplicates summed in index order, so identical inputs always produce
//! bit-identical storage. That property is relied on by the reproducibility
//! guarantees of the sweep layer.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<C64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::identity(n);
        m.data.copy_from_slice(diag);
        m.prune();
        m
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(u32, u32, C64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in t {
            debug_assert!((r as usize) < nrows && (c as usize) < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        };
        m.prune();
        m
    }

    /// Assemble from pre-sorted CSR arrays (rows in order, column indices
    /// strictly increasing within each row).
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        data: Vec<C64>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), nrows + 1);
        debug_assert_eq!(indices.len(), data.len());
        debug_assert_eq!(*indptr.last().unwrap(), indices.len());
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Drop explicitly stored zeros.
    pub fn prune(&mut self) {
        if self.data.iter().all(|v| v.norm_sqr() != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k].norm_sqr() != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[C64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn triplets(&self) -> Vec<(u32, u32, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push((r as u32, c, v));
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diag(&self) -> Vec<C64> {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.nrows).all(|r| {
            let (cols, _) = self.row(r);
            cols.iter().all(|&c| c as usize == r)
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v = f(*v);
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push((c, r as u32, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push((c, r as u32, v.conj()));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// self + s * other
    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut t = self.triplets();
        for (r, c, v) in other.triplets() {
            t.push((r, c, v * s));
        }
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, C64::new(-1.0, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut t: Vec<(u32, u32, C64)> = Vec::new();
        let mut acc: Vec<C64> = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched: Vec<u32> = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (kcols, kvals) = other.row(k as usize);
                for (&c, &b) in kcols.iter().zip(kvals) {
                    if acc[c as usize].norm_sqr() == 0.0 {
                        touched.push(c);
                    }
                    acc[c as usize] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = acc[c as usize];
                if v.norm_sqr() != 0.0 {
                    t.push((r as u32, c, v));
                }
                acc[c as usize] = C64::new(0.0, 0.0);
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for ra in 0..self.nrows {
            let (acols, avals) = self.row(ra);
            for (&ca, &va) in acols.iter().zip(avals) {
                for rb in 0..other.nrows {
                    let (bcols, bvals) = other.row(rb);
                    for (&cb, &vb) in bcols.iter().zip(bvals) {
                        t.push((
                            (ra * other.nrows + rb) as u32,
                            (ca as usize * other.ncols + cb as usize) as u32,
                            va * vb,
                        ));
                    }
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn matvec_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = C64::new(0.0, 0.0);
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c as usize];
            }
            out[r] = s;
        }
    }

    /// out += alpha * (self @ x)
    pub fn matvec_acc(&self, x: &[C64], alpha: C64, out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = C64::new(0.0, 0.0);
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c as usize];
            }
            out[r] += alpha * s;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut out);
        out
    }

    /// Dense product self @ m (rows of `m` gathered by CSR pattern).
    pub fn mul_dense(&self, m: &Array2<C64>) -> Array2<C64> {
        assert_eq!(self.ncols, m.nrows());
        let mut out = Array2::zeros((self.nrows, m.ncols()));
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let src = m.row(c as usize);
                for (o, s) in row.iter_mut().zip(src.iter()) {
                    *o += v * s;
                }
            }
        }
        out
    }

    /// Dense product m @ self.
    pub fn rmul_dense(&self, m: &Array2<C64>) -> Array2<C64> {
        assert_eq!(m.ncols(), self.nrows);
        let mut out = Array2::zeros((m.nrows(), self.ncols));
        for k in 0..self.nrows {
            let (cols, vals) = self.row(k);
            for (&c, &v) in cols.iter().zip(vals) {
                for r in 0..m.nrows() {
                    out[(r, c as usize)] += m[(r, k)] * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c as usize)] = v;
            }
        }
        out
    }

    pub fn from_dense(m: &Array2<C64>, tol: f64) -> Self {
        let mut t = Vec::new();
        for ((r, c), &v) in m.indexed_iter() {
            if v.norm() > tol {
                t.push((r as u32, c as u32, v));
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max |self - self^dagger| over all entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn trace(&self) -> C64 {
        self.diag().iter().sum()
    }
}

/// Expectation value Tr(op . rho) for sparse `op` and dense `rho`.
pub fn expect(op: &Csr, rho: &Array2<C64>) -> C64 {
    debug_assert_eq!(op.ncols(), rho.nrows());
    let mut s = C64::new(0.0, 0.0);
    for r in 0..op.nrows() {
        let (cols, vals) = op.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            s += v * rho[(c as usize, r)];
        }
    }
    s
}

pub fn dense_to_vec(m: &Array2<C64>) -> Array1<C64> {
    Array1::from_iter(m.iter().cloned())
}
