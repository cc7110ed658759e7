//! Level-of-fill incomplete LU, ILU(p), without pivoting.
//!
//! The symbolic phase assigns every original entry level 0 and a fill entry
//! created through pivot `k` the level `lev(i,k) + lev(k,j) + 1`, keeping
//! entries whose level does not exceed `p`. The numeric phase is the IKJ
//! variant of Gaussian elimination restricted to that pattern.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64 as C64;

use super::{LinalgError, SparseMatrixCSR};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Incomplete factors `A ~ L U`, `L` unit lower (strict part stored), `U`
/// upper including the diagonal. Both in CSR.
#[derive(Debug)]
pub struct IluFactors {
    n: usize,
    level: usize,
    lower: SparseMatrixCSR,
    upper: SparseMatrixCSR,
    solves: AtomicUsize,
}

impl Clone for IluFactors {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            level: self.level,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            solves: AtomicUsize::new(self.solves.load(Ordering::Relaxed)),
        }
    }
}

/// Row patterns with their fill levels; `cols` sorted.
struct SymbolicRow {
    cols: Vec<usize>,
    levels: Vec<usize>,
}

fn symbolic(a: &SparseMatrixCSR, max_level: usize) -> Result<Vec<SymbolicRow>, LinalgError> {
    let n = a.n_rows();
    let mut rows: Vec<SymbolicRow> = Vec::with_capacity(n);
    let mut work: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        work.clear();
        let (cols, _) = a.row(i);
        for &c in cols {
            work.insert(c, 0);
        }
        if !work.contains_key(&i) {
            return Err(LinalgError::MissingDiagonal { row: i });
        }
        let mut cursor = 0usize;
        while let Some((&k, &lev_ik)) = work.range(cursor..i).next() {
            cursor = k + 1;
            let urow = &rows[k];
            let start = urow.cols.partition_point(|&c| c <= k);
            for (&j, &lev_kj) in urow.cols[start..].iter().zip(&urow.levels[start..]) {
                let lev = lev_ik.saturating_add(lev_kj).saturating_add(1);
                if lev <= max_level {
                    work.entry(j)
                        .and_modify(|l| *l = (*l).min(lev))
                        .or_insert(lev);
                }
            }
        }
        let (cols, levels) = work.iter().map(|(&c, &l)| (c, l)).unzip();
        rows.push(SymbolicRow { cols, levels });
    }
    Ok(rows)
}

/// Largest fill level that appears in the complete (no-dropping) elimination
/// of `A`; ILU(p) for any `p` at or above it is the unpivoted exact LU.
pub fn exact_fill_level(a: &SparseMatrixCSR) -> Result<usize, LinalgError> {
    let rows = symbolic(a, usize::MAX)?;
    Ok(rows
        .iter()
        .flat_map(|r| r.levels.iter().copied())
        .max()
        .unwrap_or(0))
}

/// ILU(`level`) of `A`.
pub fn ilu_factor(a: &SparseMatrixCSR, level: usize) -> Result<IluFactors, LinalgError> {
    ilu_factor_shifted(a, level, ZERO)
}

/// ILU(`level`) of `A + shift I`. A zero pivot is reported, never patched.
pub fn ilu_factor_shifted(
    a: &SparseMatrixCSR,
    level: usize,
    shift: C64,
) -> Result<IluFactors, LinalgError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.n_cols(),
        });
    }
    let pattern = symbolic(a, level)?;

    let mut l_off = vec![0usize];
    let mut l_cols = Vec::new();
    let mut l_vals = Vec::new();
    let mut u_off = vec![0usize];
    let mut u_cols: Vec<usize> = Vec::new();
    let mut u_vals: Vec<C64> = Vec::new();

    let mut pos = vec![usize::MAX; n];
    let mut w: Vec<C64> = Vec::new();

    for (i, row) in pattern.iter().enumerate() {
        w.clear();
        w.resize(row.cols.len(), ZERO);
        for (p, &c) in row.cols.iter().enumerate() {
            pos[c] = p;
        }
        let (acols, avals) = a.row(i);
        for (&c, &v) in acols.iter().zip(avals) {
            w[pos[c]] = v;
        }
        let diag_p = pos[i];
        w[diag_p] += shift;

        for p in 0..diag_p {
            let k = row.cols[p];
            let (ucols, uvals) = (
                &u_cols[u_off[k]..u_off[k + 1]],
                &u_vals[u_off[k]..u_off[k + 1]],
            );
            // U rows start at their diagonal.
            let factor = w[p] / uvals[0];
            w[p] = factor;
            if factor == ZERO {
                continue;
            }
            for (&j, &ukj) in ucols[1..].iter().zip(&uvals[1..]) {
                let q = pos[j];
                if q != usize::MAX {
                    w[q] -= factor * ukj;
                }
            }
        }

        let pivot = w[diag_p];
        if pivot == ZERO || !pivot.norm().is_finite() {
            return Err(LinalgError::ZeroPivot { row: i });
        }

        l_cols.extend_from_slice(&row.cols[..diag_p]);
        l_vals.extend_from_slice(&w[..diag_p]);
        l_off.push(l_cols.len());
        u_cols.extend_from_slice(&row.cols[diag_p..]);
        u_vals.extend_from_slice(&w[diag_p..]);
        u_off.push(u_cols.len());

        for &c in &row.cols {
            pos[c] = usize::MAX;
        }
    }

    Ok(IluFactors {
        n,
        level,
        lower: SparseMatrixCSR::from_raw(n, n, l_off, l_cols, l_vals)?,
        upper: SparseMatrixCSR::from_raw(n, n, u_off, u_cols, u_vals)?,
        solves: AtomicUsize::new(0),
    })
}

impl IluFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn nnz(&self) -> usize {
        self.lower.nnz() + self.upper.nnz()
    }

    /// Strictly lower part of the unit lower factor.
    pub fn strict_lower(&self) -> &SparseMatrixCSR {
        &self.lower
    }

    pub fn upper(&self) -> &SparseMatrixCSR {
        &self.upper
    }

    /// Unit lower factor including its diagonal.
    pub fn lower(&self) -> SparseMatrixCSR {
        let mut t = Vec::with_capacity(self.lower.nnz() + self.n);
        for i in 0..self.n {
            let (cols, vals) = self.lower.row(i);
            t.extend(cols.iter().zip(vals).map(|(&c, &v)| (i, c, v)));
            t.push((i, i, C64::new(1.0, 0.0)));
        }
        SparseMatrixCSR::from_triplets(self.n, self.n, &t).expect("in range")
    }

    /// `L U`
    pub fn product(&self) -> SparseMatrixCSR {
        self.lower().matmul(&self.upper).expect("square factors")
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn reset_solve_count(&self) {
        self.solves.store(0, Ordering::Relaxed);
    }

    /// Applies `(L U)^{-1}`, or `(L U)^{-*}` when `adjoint` is set.
    pub fn solve(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut x = b.to_vec();
        if adjoint {
            // U^* z = b, forward over the columns of U^*.
            for k in 0..self.n {
                let (cols, vals) = self.upper.row(k);
                x[k] /= vals[0].conj();
                let xk = x[k];
                for (&j, &v) in cols[1..].iter().zip(&vals[1..]) {
                    x[j] -= v.conj() * xk;
                }
            }
            // L^* x = z, backward.
            for k in (0..self.n).rev() {
                let xk = x[k];
                let (cols, vals) = self.lower.row(k);
                for (&j, &v) in cols.iter().zip(vals) {
                    x[j] -= v.conj() * xk;
                }
            }
        } else {
            for i in 0..self.n {
                let (cols, vals) = self.lower.row(i);
                let s: C64 = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
                x[i] -= s;
            }
            for i in (0..self.n).rev() {
                let (cols, vals) = self.upper.row(i);
                let s: C64 = cols[1..]
                    .iter()
                    .zip(&vals[1..])
                    .map(|(&j, &v)| v * x[j])
                    .sum();
                x[i] = (x[i] - s) / vals[0];
            }
        }
        Ok(x)
    }
}

/// Free-function form of [`IluFactors::solve`].
pub fn ilu_solve(f: &IluFactors, b: &[C64], adjoint: bool) -> Result<Vec<C64>, LinalgError> {
    f.solve(b, adjoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::lu::lu_factor;
    use crate::sparse::scalar::{cdot, norm2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tridiagonal(n: usize) -> SparseMatrixCSR {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(4.0, 0.5)));
            if i > 0 {
                t.push((i, i - 1, c(-1.0, 0.0)));
            }
            if i + 1 < n {
                t.push((i, i + 1, c(-1.5, 0.2)));
            }
        }
        SparseMatrixCSR::from_triplets(n, n, &t).unwrap()
    }

    /// 5-point Laplacian on an m x m grid (Dirichlet eliminated).
    fn laplacian(m: usize, shift: f64) -> SparseMatrixCSR {
        let n = m * m;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let r = i + j * m;
                t.push((r, r, c(4.0 - shift, 0.0)));
                if i > 0 {
                    t.push((r, r - 1, c(-1.0, 0.0)));
                }
                if i + 1 < m {
                    t.push((r, r + 1, c(-1.0, 0.0)));
                }
                if j > 0 {
                    t.push((r, r - m, c(-1.0, 0.0)));
                }
                if j + 1 < m {
                    t.push((r, r + m, c(-1.0, 0.0)));
                }
            }
        }
        SparseMatrixCSR::from_triplets(n, n, &t).unwrap()
    }

    fn pattern(a: &SparseMatrixCSR) -> Vec<(usize, usize)> {
        let mut p = Vec::new();
        for r in 0..a.n_rows() {
            p.extend(a.row(r).0.iter().map(|&c| (r, c)));
        }
        p
    }

    #[test]
    fn tridiagonal_ilu0_is_exact() {
        let a = tridiagonal(12);
        assert_eq!(exact_fill_level(&a).unwrap(), 0);
        let f = ilu_factor(&a, 0).unwrap();
        let err = a.sub(&f.product()).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err < 1e-15);
    }

    #[test]
    fn ilu0_keeps_the_pattern() {
        let a = laplacian(10, 0.0);
        let f = ilu_factor(&a, 0).unwrap();
        let mut lu_pattern = pattern(f.strict_lower());
        lu_pattern.extend(pattern(f.upper()));
        lu_pattern.sort_unstable();
        assert_eq!(lu_pattern, pattern(&a));
    }

    #[test]
    fn full_fill_matches_exact_lu() {
        let a = laplacian(10, 0.3);
        let p = exact_fill_level(&a).unwrap();
        assert!(p >= 1);
        let f = ilu_factor(&a, p).unwrap();
        let err = a.sub(&f.product()).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err < 1e-13);

        let lu = lu_factor(&a).unwrap();
        let b: Vec<C64> = (0..100)
            .map(|k| c((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        for adjoint in [false, true] {
            let x1 = f.solve(&b, adjoint).unwrap();
            let x2 = lu.solve(&b, adjoint).unwrap();
            let d: Vec<C64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
            assert!(norm2(&d) / norm2(&x2) < 1e-10);
        }
        // one level short is no longer exact
        let g = ilu_factor(&a, p - 1).unwrap();
        let err = a.sub(&g.product()).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err > 1e-10);
    }

    #[test]
    fn zero_rhs() {
        let f = ilu_factor(&laplacian(4, 0.0), 1).unwrap();
        assert!(f
            .solve(&[ZERO; 16], false)
            .unwrap()
            .iter()
            .all(|v| *v == ZERO));
        assert!(f
            .solve(&[ZERO; 16], true)
            .unwrap()
            .iter()
            .all(|v| *v == ZERO));
    }

    #[test]
    fn adjoint_consistency_on_symmetric_real_matrix() {
        let a = laplacian(6, 0.5);
        let p = exact_fill_level(&a).unwrap();
        let f = ilu_factor(&a, p).unwrap();
        let b: Vec<C64> = (0..36).map(|k| c(k as f64, 1.0 - k as f64)).collect();
        let d: Vec<C64> = (0..36).map(|k| c((k as f64).cos(), 0.5)).collect();
        // <A^{-*} b, d> = <b, A^{-1} d>
        let lhs = cdot(&f.solve(&b, true).unwrap(), &d);
        let rhs = cdot(&b, &f.solve(&d, false).unwrap());
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
        // and for a real symmetric matrix the adjoint solve of a real rhs is the plain solve
        let real_b: Vec<C64> = (0..36).map(|k| c(k as f64, 0.0)).collect();
        let x1 = f.solve(&real_b, true).unwrap();
        let x2 = f.solve(&real_b, false).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).norm() < 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn zero_pivot_is_reported_and_shift_fixes_it() {
        // [[1, 1], [1, 1]]: the second pivot is exactly zero.
        let a = SparseMatrixCSR::from_triplets(
            2,
            2,
            &[
                (0, 0, c(1.0, 0.0)),
                (0, 1, c(1.0, 0.0)),
                (1, 0, c(1.0, 0.0)),
                (1, 1, c(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert!(matches!(
            ilu_factor(&a, 0),
            Err(LinalgError::ZeroPivot { row: 1 })
        ));
        assert!(ilu_factor_shifted(&a, 0, c(0.1, 0.0)).is_ok());
    }

    #[test]
    fn missing_diagonal_is_rejected() {
        let a = SparseMatrixCSR::from_triplets(2, 2, &[(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))])
            .unwrap();
        assert!(matches!(
            ilu_factor(&a, 0),
            Err(LinalgError::MissingDiagonal { row: 0 })
        ));
    }
}
