//! Compressed sparse row storage.

use std::io::Write;

use num_traits::{Num, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square or rectangular matrix in CSR layout with sorted column indices.
///
/// `T` may be an integer type; the Poisson stencils are assembled exactly in
/// `i64` for invariant checks and then converted to floating point.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Num> CsrMatrix<T> {
    /// Builds a matrix from raw CSR arrays, validating their shape and sorting.
    pub fn try_from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::DimensionMismatch { expected: nrows + 1, got: row_offsets.len() });
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: col_indices.len() });
        }
        for r in 0..nrows {
            let cols = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidArgument(format!("row {r}: unsorted or out-of-range columns")));
            }
        }
        Ok(Self { nrows, ncols, row_offsets, col_indices, values })
    }

    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                debug_assert!(c < ncols);
                if col_indices.len() > *row_offsets.last().unwrap() && *col_indices.last().unwrap() == c {
                    let last = values.last_mut().unwrap();
                    *last = *last + v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self { nrows, ncols, row_offsets, col_indices, values }
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// Element-wise conversion, keeping the sparsity pattern.
    pub fn map<U: Copy + Num>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc = acc + v * x[c];
            }
            *out = acc;
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool
    where
        T: PartialEq,
    {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| {
                let (tc, tv) = self.row(c);
                matches!(tc.binary_search(&r), Ok(i) if tv[i] == v)
            })
        })
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().fold(T::zero(), |a, &v| a + v))
            .collect()
    }

    /// Dense row-major copy; only for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }

    /// Writes `row col value` lines with 0-based indices.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()>
    where
        T: std::fmt::Display,
    {
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(out, "{r} {c} {v}")?;
            }
        }
        Ok(())
    }
}

impl<T: Real> CsrMatrix<T> {
    /// Euclidean norm of each column.
    pub fn column_norms(&self) -> Vec<T> {
        let mut sq = vec![T::zero(); self.ncols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            sq[c] += v * v;
        }
        sq.into_iter().map(|s| s.sqrt()).collect()
    }
}

/// Reads the `row col value` format written by [`CsrMatrix::write_coo`].
pub fn read_coo(text: &str, n: usize) -> Result<CsrMatrix<f64>> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse_err = || Error::Parse(format!("line {}: expected `row col value`", lineno + 1));
        let r: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        let c: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        let v: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(parse_err)?;
        if r >= n || c >= n {
            return Err(parse_err());
        }
        rows[r].push((c, v));
    }
    Ok(CsrMatrix::from_rows(n, rows))
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    T::lit(a.iter().zip(b).map(|(&x, &y)| x.as_f64() * y.as_f64()).sum())
}

#[inline]
pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

impl<T: Copy + Num> CsrMatrix<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }
}

impl<T: Copy + Num + Zero> Default for CsrMatrix<T> {
    fn default() -> Self {
        Self { nrows: 0, ncols: 0, row_offsets: vec![0], col_indices: Vec::new(), values: Vec::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_merges_duplicates() {
        let m = CsrMatrix::from_rows(3, vec![vec![(2, 1), (0, 2), (2, 3)], vec![], vec![(1, -1)]]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 4);
        assert_eq!(m.get(0, 0), 2);
        assert_eq!(m.get(1, 1), 0);
        assert_eq!(m.mul_vec(&[1, 1, 1]), vec![6, 0, -1]);
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_rows(2, vec![vec![(0, 2), (1, -1)], vec![(0, -1), (1, 2)]]);
        assert!(s.is_symmetric());
        let a = CsrMatrix::from_rows(2, vec![vec![(0, 2), (1, -1)], vec![(1, 2)]]);
        assert!(!a.is_symmetric());
    }

    #[test]
    fn coo_round_trip() {
        let m = CsrMatrix::from_rows(2, vec![vec![(0, 1.5), (1, -1.0)], vec![(0, -1.0), (1, 1.0)]]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "0 0 1.5\n0 1 -1\n1 0 -1\n1 1 1\n");
        assert_eq!(read_coo(&text, 2).unwrap(), m);
    }

    #[test]
    fn rejects_unsorted_parts() {
        assert!(CsrMatrix::try_from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 2.0]).is_err());
        assert!(CsrMatrix::try_from_parts(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).is_ok());
    }
}
