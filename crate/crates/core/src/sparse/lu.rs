//! Sparse LU with partial pivoting (left-looking, Gilbert-Peierls).
//!
//! Column `k` of the factors is obtained by a sparse triangular solve with the
//! already computed part of `L`, whose nonzero pattern is found by a
//! depth-first search in the graph of `L`. The pivot is the entry of largest
//! magnitude among the not-yet-pivotal rows, ties going to the diagonal.
//! The factors satisfy `P_r A P_c = L U` with `L` unit lower triangular.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64 as C64;

use super::{LinalgError, SparseMatrixCSR};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const NONE: usize = usize::MAX;

/// Triangular factor in compressed sparse column form.
#[derive(Debug, Clone)]
struct CscFactor {
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
    values: Vec<C64>,
}

impl CscFactor {
    fn col(&self, j: usize) -> (&[usize], &[C64]) {
        let span = self.col_offsets[j]..self.col_offsets[j + 1];
        (&self.row_indices[span.clone()], &self.values[span])
    }

    fn to_csr(&self, n: usize) -> SparseMatrixCSR {
        let mut triplets = Vec::with_capacity(self.values.len());
        for j in 0..n {
            let (rows, vals) = self.col(j);
            triplets.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, j, v)));
        }
        SparseMatrixCSR::from_triplets(n, n, &triplets).expect("factor indices are in range")
    }
}

/// Exact factors `P_r A P_c = L U`.
#[derive(Debug)]
pub struct LuFactors {
    n: usize,
    /// Unit lower factor; the diagonal entry is stored first in each column.
    lower: CscFactor,
    /// Upper factor; the diagonal entry is stored last in each column.
    upper: CscFactor,
    /// `row_perm[k]` is the row of `A` that became pivot `k`.
    row_perm: Vec<usize>,
    /// `col_perm[k]` is the column of `A` eliminated at step `k`.
    col_perm: Vec<usize>,
    solves: AtomicUsize,
}

impl Clone for LuFactors {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            row_perm: self.row_perm.clone(),
            col_perm: self.col_perm.clone(),
            solves: AtomicUsize::new(self.solves.load(Ordering::Relaxed)),
        }
    }
}

/// Factors `A` in its natural column order.
pub fn lu_factor(a: &SparseMatrixCSR) -> Result<LuFactors, LinalgError> {
    let order: Vec<usize> = (0..a.n_cols()).collect();
    lu_factor_ordered(a, &order)
}

/// Factors `A P_c`, where `col_perm[k]` names the column eliminated at step `k`.
pub fn lu_factor_ordered(
    a: &SparseMatrixCSR,
    col_perm: &[usize],
) -> Result<LuFactors, LinalgError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.n_cols(),
        });
    }
    if col_perm.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: col_perm.len(),
        });
    }
    {
        let mut seen = vec![false; n];
        for &c in col_perm {
            if c >= n || std::mem::replace(&mut seen[c], true) {
                return Err(LinalgError::InvalidStructure(
                    "column ordering is not a permutation".into(),
                ));
            }
        }
    }

    // Rows of A^T are the columns of A.
    let at = a.transpose();

    let mut pinv = vec![NONE; n];
    let mut lp = Vec::with_capacity(n + 1);
    let mut li: Vec<usize> = Vec::new();
    let mut lx: Vec<C64> = Vec::new();
    let mut up = Vec::with_capacity(n + 1);
    let mut ui: Vec<usize> = Vec::new();
    let mut ux: Vec<C64> = Vec::new();

    let mut x = vec![ZERO; n];
    let mut xi = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut pstack = vec![0usize; n];
    let mut mark = vec![NONE; n];

    for k in 0..n {
        lp.push(li.len());
        up.push(ui.len());
        let (bcols, bvals) = at.row(col_perm[k]);

        // Nonzero pattern of L \ b, in topological order, lands in xi[top..n].
        let mut top = n;
        for &start in bcols {
            if mark[start] == k {
                continue;
            }
            let mut head = 0usize;
            stack[0] = start;
            loop {
                let j = stack[head];
                let jnew = pinv[j];
                if mark[j] != k {
                    mark[j] = k;
                    pstack[head] = if jnew == NONE { 0 } else { lp[jnew] + 1 };
                }
                let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                let mut descended = false;
                let mut p = pstack[head];
                while p < end {
                    let i = li[p];
                    p += 1;
                    if mark[i] != k {
                        pstack[head] = p;
                        head += 1;
                        stack[head] = i;
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }

        for &i in &xi[top..n] {
            x[i] = ZERO;
        }
        for (&i, &v) in bcols.iter().zip(bvals) {
            x[i] = v;
        }

        // Sparse forward substitution with the unit lower factor.
        for &i in &xi[top..n] {
            let j = pinv[i];
            if j == NONE {
                continue;
            }
            let xv = x[i];
            if xv == ZERO {
                continue;
            }
            // lp[j + 1] is final for all j < k; the diagonal comes first.
            for p in lp[j] + 1..lp[j + 1] {
                x[li[p]] -= lx[p] * xv;
            }
        }

        let mut ipiv = NONE;
        let mut best = -1.0f64;
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                let t = x[i].norm();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i]);
                ux.push(x[i]);
            }
        }
        if ipiv == NONE || best <= 0.0 || !best.is_finite() {
            return Err(LinalgError::SingularPivot { row: k });
        }
        let diag_row = col_perm[k];
        if pinv[diag_row] == NONE && mark[diag_row] == k && x[diag_row].norm() >= best {
            ipiv = diag_row;
        }

        let pivot = x[ipiv];
        ui.push(k);
        ux.push(pivot);
        pinv[ipiv] = k;
        li.push(ipiv);
        lx.push(ONE);
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                li.push(i);
                lx.push(x[i] / pivot);
            }
            x[i] = ZERO;
        }
    }
    lp.push(li.len());
    up.push(ui.len());

    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    let mut row_perm = vec![0usize; n];
    for (row, &k) in pinv.iter().enumerate() {
        row_perm[k] = row;
    }

    Ok(LuFactors {
        n,
        lower: CscFactor {
            col_offsets: lp,
            row_indices: li,
            values: lx,
        },
        upper: CscFactor {
            col_offsets: up,
            row_indices: ui,
            values: ux,
        },
        row_perm,
        col_perm: col_perm.to_vec(),
        solves: AtomicUsize::new(0),
    })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U` together.
    pub fn nnz(&self) -> usize {
        self.lower.values.len() + self.upper.values.len()
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    pub fn lower(&self) -> SparseMatrixCSR {
        self.lower.to_csr(self.n)
    }

    pub fn upper(&self) -> SparseMatrixCSR {
        self.upper.to_csr(self.n)
    }

    /// Rebuilds `A = P_r^T L U P_c^T` from the factors.
    pub fn reassemble(&self) -> SparseMatrixCSR {
        let lu = self.lower().matmul(&self.upper()).expect("square factors");
        let mut inv_r = vec![0; self.n];
        let mut inv_c = vec![0; self.n];
        for k in 0..self.n {
            inv_r[self.row_perm[k]] = k;
            inv_c[self.col_perm[k]] = k;
        }
        lu.permute(&inv_r, &inv_c)
    }

    /// Number of triangular-solve pairs performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn reset_solve_count(&self) {
        self.solves.store(0, Ordering::Relaxed);
    }

    /// Solves `A x = b`, or `A^* x = b` when `adjoint` is set.
    pub fn solve(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(if adjoint {
            self.solve_adjoint_unchecked(b)
        } else {
            self.solve_unchecked(b)
        })
    }

    fn solve_unchecked(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut y: Vec<C64> = self.row_perm.iter().map(|&r| b[r]).collect();
        for j in 0..n {
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            let (rows, vals) = self.lower.col(j);
            for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                y[i] -= v * yj;
            }
        }
        for j in (0..n).rev() {
            let (rows, vals) = self.upper.col(j);
            let last = rows.len() - 1;
            y[j] /= vals[last];
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for (&i, &v) in rows[..last].iter().zip(&vals[..last]) {
                y[i] -= v * yj;
            }
        }
        let mut x = vec![ZERO; n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }

    fn solve_adjoint_unchecked(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        // A^* = P_c U^* L^* P_r
        let mut w: Vec<C64> = self.col_perm.iter().map(|&c| b[c]).collect();
        for j in 0..n {
            let (rows, vals) = self.upper.col(j);
            let last = rows.len() - 1;
            let mut acc = w[j];
            for (&i, &v) in rows[..last].iter().zip(&vals[..last]) {
                acc -= v.conj() * w[i];
            }
            w[j] = acc / vals[last].conj();
        }
        for j in (0..n).rev() {
            let (rows, vals) = self.lower.col(j);
            let mut acc = w[j];
            for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                acc -= v.conj() * w[i];
            }
            w[j] = acc;
        }
        let mut x = vec![ZERO; n];
        for (k, &r) in self.row_perm.iter().enumerate() {
            x[r] = w[k];
        }
        x
    }
}

/// Free-function form of [`LuFactors::solve`].
pub fn lu_solve(f: &LuFactors, b: &[C64], adjoint: bool) -> Result<Vec<C64>, LinalgError> {
    f.solve(b, adjoint)
}
