//! Compressed sparse row storage.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in
    /// input order, so the result is independent of how rows were
    /// interleaved.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({r}, {c})")));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // stable bucket by row
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if cols.len() > row_ptr[r] && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::invalid("ragged dense matrix"));
            }
            t.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(rows.len(), ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.nrows, "matvec dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            t.extend(cols.iter().zip(vals).map(|(&c, &v)| (c, i, v)));
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t).expect("valid transpose")
    }

    /// `alpha * self + beta * other` over the union pattern.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::invalid("matrix dimensions differ"));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut vals = Vec::with_capacity(cols.capacity());
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let a = ca.get(p).copied().unwrap_or(usize::MAX);
                let b = cb.get(q).copied().unwrap_or(usize::MAX);
                if a < b {
                    cols.push(a);
                    vals.push(alpha * va[p]);
                    p += 1;
                } else if b < a {
                    cols.push(b);
                    vals.push(beta * vb[q]);
                    q += 1;
                } else {
                    cols.push(a);
                    vals.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|` over both patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> Result<f64> {
        Ok(self.linear_combination(1.0, other, -1.0)?.max_abs())
    }

    /// `max |A - A^T|`
    pub fn asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose()).expect("square matrix")
    }

    /// Dense copy of rows/cols `start..start + n`.
    pub fn dense_block(&self, start: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = self.row(start + i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= start && c < start + n {
                    out[i * n + (c - start)] = v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// True when every entry lies in a diagonal block of size `n`.
    pub fn is_block_diagonal(&self, n: usize) -> bool {
        (0..self.nrows).all(|i| self.row(i).0.iter().all(|&c| c / n == i / n))
    }
}

/// `v^T A v`
pub fn quadratic_form(a: &SparseMatrix, v: &[f64]) -> Result<f64> {
    bilinear_form(a, v, v)
}

/// `v^T A w`, the matrix form of `a(w, v)` when rows index test functions.
pub fn bilinear_form(a: &SparseMatrix, w: &[f64], v: &[f64]) -> Result<f64> {
    if w.len() != a.ncols() || v.len() != a.nrows() {
        return Err(Error::invalid(format!(
            "vector lengths ({}, {}) do not match a {}x{} matrix",
            w.len(),
            v.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    let aw = a.matvec(w);
    Ok(v.iter().zip(&aw).map(|(x, y)| x * y).sum())
}
