//! Incomplete Cholesky factorizations `A ≈ L Lᵀ`.
//!
//! Left-looking, one column at a time. Column `k` of `L` is kept sorted by
//! row, and a cursor per column points at its first entry not yet consumed;
//! columns are chained in buckets keyed by that entry's row, so computing
//! column `j` only visits the columns `k` with `L[j][k] ≠ 0`.
//!
//! Entries in the lower pattern of `A` are always kept. Fill-in is kept only
//! when `τ > 0` and `|l_ij| > τ·‖Ã[:, j]‖₂`. The modified variant adds each
//! dropped Schur entry to the diagonals of both its row and its column, so
//! `L Lᵀ e = Ã e` holds exactly in exact arithmetic.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

const NIL: u32 = u32::MAX;

/// Sparse lower-triangular factor stored by columns, diagonal first.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    n: usize,
    col_offsets: Vec<usize>,
    row_indices: Vec<u32>,
    values: Vec<T>,
    /// Diagonal shift `α` the factor was computed with (`Ã = A + α·diag(A)`).
    pub applied_alpha: T,
    /// Whether dropped fill was compensated on the diagonal.
    pub modified: bool,
    pub tau: T,
}

impl<T: Real> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored nonzeros of `L`, diagonal included.
    pub fn fill_count(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|j| self.values[self.col_offsets[j]]).collect()
    }

    /// `L` as a CSR matrix (mostly for inspection and tests).
    pub fn lower(&self) -> CsrMatrix<T> {
        let mut rows = vec![Vec::new(); self.n];
        for j in 0..self.n {
            for p in self.col_offsets[j]..self.col_offsets[j + 1] {
                rows[self.row_indices[p] as usize].push((j, self.values[p]));
            }
        }
        CsrMatrix::from_rows(self.n, rows)
    }

    /// Solves `L Lᵀ z = r`.
    pub fn solve(&self, r: &[T]) -> Vec<T> {
        let mut z = r.to_vec();
        self.solve_in_place(&mut z);
        z
    }

    pub fn solve_in_place(&self, z: &mut [T]) {
        assert_eq!(z.len(), self.n);
        // L y = r
        for j in 0..self.n {
            let start = self.col_offsets[j];
            let yj = z[j] / self.values[start];
            z[j] = yj;
            for p in start + 1..self.col_offsets[j + 1] {
                z[self.row_indices[p] as usize] -= self.values[p] * yj;
            }
        }
        // Lᵀ z = y
        for j in (0..self.n).rev() {
            let start = self.col_offsets[j];
            let mut acc = z[j];
            for p in start + 1..self.col_offsets[j + 1] {
                acc -= self.values[p] * z[self.row_indices[p] as usize];
            }
            z[j] = acc / self.values[start];
        }
    }
}

/// Applies `M⁻¹ = (L Lᵀ)⁻¹` to `r`.
pub fn apply_preconditioner<T: Real>(factor: &CholeskyFactor<T>, r: &[T]) -> Vec<T> {
    factor.solve(r)
}

/// IC(τ) of `A` without shift or compensation.
pub fn ic_factorize<T: Real>(a: &CsrMatrix<T>, tau: T) -> Result<CholeskyFactor<T>> {
    factorize(a, tau, T::zero(), false)
}

/// Shifted MIC(τ, α): factorizes `A + α·diag(A)` with diagonal compensation.
/// On pivot breakdown the shift grows to `max(10α, 10⁻³)`, at most 8 times.
pub fn mic_factorize<T: Real>(a: &CsrMatrix<T>, tau: T, alpha: T) -> Result<CholeskyFactor<T>> {
    let mut alpha = alpha;
    let mut last_err = None;
    for _ in 0..=8 {
        match factorize(a, tau, alpha, true) {
            Ok(f) => return Ok(f),
            Err(e @ Error::PivotBreakdown { .. }) => {
                last_err = Some(e);
                alpha = (alpha * T::lit(10.0)).max(T::lit(1e-3));
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Shared kernel. `a` must be symmetric; only its upper rows are read
/// (row `j`, columns `> j` = column `j` below the diagonal).
pub fn factorize<T: Real>(a: &CsrMatrix<T>, tau: T, alpha: T, modified: bool) -> Result<CholeskyFactor<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if tau < T::zero() || alpha < T::zero() {
        return Err(Error::InvalidArgument("tau and alpha must be nonnegative".into()));
    }
    let scale = T::one() + alpha;
    let drop_fill = tau > T::zero();
    let col_norms = if drop_fill {
        shifted_column_norms(a, alpha)
    } else {
        Vec::new()
    };

    let mut col_offsets = Vec::with_capacity(n + 1);
    col_offsets.push(0);
    let nnz_hint = a.nnz() / 2 + n;
    let mut row_indices: Vec<u32> = Vec::with_capacity(nnz_hint);
    let mut values: Vec<T> = Vec::with_capacity(nnz_hint);

    // Cursor into each finished column, and bucket chains keyed by row.
    let mut cursor = vec![0usize; n];
    let mut bucket_head = vec![NIL; n];
    let mut bucket_next = vec![NIL; n];

    let mut compensation = vec![T::zero(); n];
    let mut work = vec![T::zero(); n];
    let mut touched_at = vec![NIL; n];
    let mut in_pattern = vec![NIL; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut kept: Vec<(u32, T)> = Vec::new();

    for j in 0..n {
        let j32 = j as u32;
        let (cols, vals) = a.row(j);
        let mut diag = T::zero();
        touched.clear();
        for (&c, &v) in cols.iter().zip(vals) {
            if c == j {
                diag = v * scale;
            } else if c > j {
                work[c] = v;
                touched_at[c] = j32;
                in_pattern[c] = j32;
                touched.push(c);
            }
        }
        diag += compensation[j];

        // Updates from earlier columns with a nonzero in row j.
        let mut k = std::mem::replace(&mut bucket_head[j], NIL);
        while k != NIL {
            let col = k as usize;
            let next_k = bucket_next[col];
            let pos = cursor[col];
            let end = col_offsets[col + 1];
            let l_jk = values[pos];
            diag -= l_jk * l_jk;
            for p in pos + 1..end {
                let i = row_indices[p] as usize;
                if touched_at[i] != j32 {
                    touched_at[i] = j32;
                    work[i] = T::zero();
                    touched.push(i);
                }
                work[i] -= values[p] * l_jk;
            }
            cursor[col] = pos + 1;
            if pos + 1 < end {
                let r = row_indices[pos + 1] as usize;
                bucket_next[col] = bucket_head[r];
                bucket_head[r] = k;
            }
            k = next_k;
        }

        // Drop decisions use the pivot before this column's compensation.
        let threshold = if drop_fill {
            let tentative = if diag > T::zero() { diag.sqrt() } else { T::zero() };
            tau * col_norms[j] * tentative
        } else {
            T::zero()
        };
        kept.clear();
        for &i in &touched {
            let s = work[i];
            let keep = in_pattern[i] == j32 || (drop_fill && s.abs() > threshold);
            if keep {
                kept.push((i as u32, s));
            } else if modified && s != T::zero() {
                compensation[i] += s;
                diag += s;
            }
        }

        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::PivotBreakdown { row: j, pivot: diag.as_f64() });
        }
        let l_jj = diag.sqrt();
        kept.sort_unstable_by_key(|&(i, _)| i);

        let start = values.len();
        row_indices.push(j as u32);
        values.push(l_jj);
        for &(i, s) in &kept {
            row_indices.push(i);
            values.push(s / l_jj);
        }
        col_offsets.push(values.len());
        cursor[j] = start + 1;
        if start + 1 < values.len() {
            let r = row_indices[start + 1] as usize;
            bucket_next[j] = bucket_head[r];
            bucket_head[r] = j as u32;
        }
    }

    Ok(CholeskyFactor {
        n,
        col_offsets,
        row_indices,
        values,
        applied_alpha: alpha,
        modified,
        tau,
    })
}

fn shifted_column_norms<T: Real>(a: &CsrMatrix<T>, alpha: T) -> Vec<T> {
    let scale = T::one() + alpha;
    let mut sq = vec![T::zero(); a.ncols()];
    for r in 0..a.nrows() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            let v = if c == r { v * scale } else { v };
            sq[c] += v * v;
        }
    }
    sq.into_iter().map(|s| s.sqrt()).collect()
}
