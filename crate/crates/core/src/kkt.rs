//! Full-space Gauss-Newton step: the KKT saddle-point operator, its block
//! triangular preconditioner and GMRES on the composite vector
//! `xi = (du, ds, lambda)`.
//!
//! The operator is
//!
//! ```text
//! [ F    0    A^* ] [du    ]   [Q^* W^T W r]
//! [ 0    L   -P^* ] [ds    ] = [  -L s     ]
//! [ A   -P    0   ] [lambda]   [    0      ]
//! ```
//!
//! with `L = eps I`, and the preconditioner is the same matrix with `F` removed.
//! The `ds` block is real, so the composite space is a real inner-product
//! space with `<x, y> = Re sum conj(x) y`; the operator is self-adjoint
//! with respect to it.

use std::time::Instant;

use rayon::prelude::*;

use crate::forward::scatter;
use crate::reduced::{linalg_or_breakdown, GnState, StepSolution};
use crate::sparse::scalar::KrylovVector;
use crate::sparse::{
    gmres, ilu_factor, GmresOptions, IluFactors, LinalgError, Observation, ResidualGate,
};
use crate::{Error, Result, C64};

/// Composite KKT vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KktVector {
    pub du: Vec<Vec<C64>>,
    pub ds: Vec<f64>,
    pub lambda: Vec<Vec<C64>>,
}

impl KktVector {
    pub fn zeros(n_sources: usize, n_nodes: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n_nodes];
        Self {
            du: vec![z.clone(); n_sources],
            ds: vec![0.0; n_nodes],
            lambda: vec![z; n_sources],
        }
    }

    fn complex_blocks(&self) -> impl Iterator<Item = &Vec<C64>> {
        self.du.iter().chain(self.lambda.iter())
    }

    fn complex_blocks_mut(&mut self) -> impl Iterator<Item = &mut Vec<C64>> {
        self.du.iter_mut().chain(self.lambda.iter_mut())
    }
}

impl KrylovVector for KktVector {
    type Scalar = f64;

    fn dot(&self, other: &Self) -> f64 {
        let complex: f64 = self
            .complex_blocks()
            .zip(other.complex_blocks())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.re * y.re + x.im * y.im)
                    .sum::<f64>()
            })
            .sum();
        complex
            + self
                .ds
                .iter()
                .zip(&other.ds)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, x: &Self) {
        for (a, b) in self.complex_blocks_mut().zip(x.complex_blocks()) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += bi * alpha;
            }
        }
        for (a, b) in self.ds.iter_mut().zip(&x.ds) {
            *a += alpha * b;
        }
    }

    fn scale(&mut self, alpha: f64) {
        for a in self.complex_blocks_mut() {
            for ai in a.iter_mut() {
                *ai *= alpha;
            }
        }
        for a in &mut self.ds {
            *a *= alpha;
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.du.len(), self.ds.len())
    }
}

/// KKT matrix at a linearization point; `include_f = false` gives the
/// preconditioner matrix.
#[derive(Debug, Clone, Copy)]
pub struct KktOperator<'a> {
    pub state: &'a GnState,
    pub include_f: bool,
}

impl<'a> KktOperator<'a> {
    pub fn new(state: &'a GnState) -> Self {
        Self {
            state,
            include_f: true,
        }
    }

    pub fn without_f(state: &'a GnState) -> Self {
        Self {
            state,
            include_f: false,
        }
    }

    fn check(&self, xi: &KktVector) -> Result<()> {
        let n = self.state.n_nodes();
        let k = self.state.n_sources();
        let ok = xi.du.len() == k
            && xi.lambda.len() == k
            && xi.ds.len() == n
            && xi.complex_blocks().all(|b| b.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "KKT vector does not conform to {k} sources on {n} nodes"
            )))
        }
    }

    /// `(F du + A^* lambda, L ds - Re P^* lambda, A du - P ds)`, sparse
    /// products only.
    pub fn apply(&self, xi: &KktVector) -> Result<KktVector> {
        self.check(xi)?;
        let st = self.state;
        let a = &st.op.a;
        let n = st.n_nodes();
        let blocks = (0..st.n_sources())
            .into_par_iter()
            .map(|k| {
                let mut top = vec![C64::new(0.0, 0.0); n];
                a.adjoint_mul_into(&xi.lambda[k], &mut top);
                if self.include_f {
                    let range = st.survey.data_range(k);
                    let d: Vec<C64> = st.survey.sources()[k]
                        .receivers
                        .iter()
                        .zip(&st.weights.diag[range])
                        .map(|(&r, w)| xi.du[k][r] * (w * w))
                        .collect();
                    for (t, f) in top.iter_mut().zip(scatter(&st.survey, k, &d, n)) {
                        *t += f;
                    }
                }
                let mut bottom = vec![C64::new(0.0, 0.0); n];
                a.mul_into(&xi.du[k], &mut bottom);
                for ((b, p), s) in bottom.iter_mut().zip(&st.p[k]).zip(&xi.ds) {
                    *b -= p * s;
                }
                let middle: Vec<f64> = st.p[k]
                    .iter()
                    .zip(&xi.lambda[k])
                    .map(|(p, l)| (p.conj() * l).re)
                    .collect();
                (top, middle, bottom)
            })
            .collect::<Vec<_>>();
        let mut ds: Vec<f64> = xi.ds.iter().map(|s| st.epsilon * s).collect();
        let mut du = Vec::with_capacity(blocks.len());
        let mut lambda = Vec::with_capacity(blocks.len());
        for (top, middle, bottom) in blocks {
            for (d, m) in ds.iter_mut().zip(middle) {
                *d -= m;
            }
            du.push(top);
            lambda.push(bottom);
        }
        Ok(KktVector { du, ds, lambda })
    }
}

/// `kkt_apply` with the full operator.
pub fn kkt_apply(state: &GnState, xi: &KktVector) -> Result<KktVector> {
    KktOperator::new(state).apply(xi)
}

/// `b = (Q^* W^T W r, -eps s or 0, 0)`.
pub fn kkt_rhs(state: &GnState) -> KktVector {
    let n = state.n_nodes();
    let mut b = KktVector::zeros(state.n_sources(), n);
    for k in 0..state.n_sources() {
        let range = state.survey.data_range(k);
        let wr = state.weights.apply_squared(&state.r.values)[range].to_vec();
        b.du[k] = scatter(&state.survey, k, &wr, n);
    }
    if !state.drop_model_term {
        b.ds = state
            .model
            .values()
            .iter()
            .map(|s| -state.epsilon * s)
            .collect();
    }
    b
}

/// How the preconditioner solves with `A` and `A^*`.
#[derive(Debug)]
pub enum KktPreconditioner {
    /// The state's exact LU factors.
    Exact,
    /// ILU(p) factors of `A`.
    Ilu(IluFactors),
}

impl KktPreconditioner {
    /// Builds ILU(`level`) of the state's operator; returns the factor
    /// together with its setup time in seconds.
    pub fn ilu(state: &GnState, level: usize) -> Result<(Self, f64)> {
        let t0 = Instant::now();
        let f = ilu_factor(&state.op.a, level)?;
        Ok((Self::Ilu(f), t0.elapsed().as_secs_f64()))
    }

    fn solve(&self, state: &GnState, b: &[C64], adjoint: bool) -> Result<Vec<C64>, LinalgError> {
        match self {
            Self::Exact => state.lu.solve(b, adjoint),
            Self::Ilu(f) => f.solve(b, adjoint),
        }
    }

    /// Solves the `F`-free KKT system by block back-substitution:
    /// `lambda = A^{-*} v1`, `ds = (v2 + Re P^* lambda) / eps`,
    /// `du = A^{-1}(v3 + P ds)`.
    pub fn apply(&self, state: &GnState, v: &KktVector) -> Result<KktVector> {
        KktOperator::new(state).check(v)?;
        let lambda =
            v.du.par_iter()
                .map(|v1| self.solve(state, v1, true))
                .collect::<Result<Vec<_>, _>>()?;
        let mut ds = v.ds.clone();
        for (pk, lk) in state.p.iter().zip(&lambda) {
            for ((d, p), l) in ds.iter_mut().zip(pk).zip(lk) {
                *d += (p.conj() * l).re;
            }
        }
        for d in &mut ds {
            *d /= state.epsilon;
        }
        let du = v
            .lambda
            .par_iter()
            .zip(&state.p)
            .map(|(v3, pk)| {
                let rhs: Vec<C64> = v3
                    .iter()
                    .zip(pk)
                    .zip(&ds)
                    .map(|((a, p), s)| a + p * s)
                    .collect();
                self.solve(state, &rhs, false)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(KktVector { du, ds, lambda })
    }
}

/// `precond_apply` in function form.
pub fn precond_apply(
    state: &GnState,
    precond: &KktPreconditioner,
    v: &KktVector,
) -> Result<KktVector> {
    precond.apply(state, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsgnOptions {
    pub restart: usize,
    /// Tolerance on the GMRES residual selected by `gate`.
    pub tol: f64,
    pub max_iter: usize,
    pub gate: ResidualGate,
    /// Evaluate `E_cg` every `ecg_stride` iterations (0 disables it).
    pub ecg_stride: usize,
    /// Stop as soon as an evaluated `E_cg` drops to this value.
    pub ecg_tol: Option<f64>,
}

impl Default for FsgnOptions {
    fn default() -> Self {
        Self {
            restart: 30,
            tol: 1e-8,
            max_iter: 300,
            gate: ResidualGate::True,
            ecg_stride: 1,
            ecg_tol: None,
        }
    }
}

/// Preconditioned GMRES on the KKT system from a zero initial guess; returns
/// the `ds` block of the final iterate.
pub fn fsgn_gmres_step(
    state: &GnState,
    precond: &KktPreconditioner,
    opts: &FsgnOptions,
) -> Result<StepSolution> {
    let b = kkt_rhs(state);
    let op = KktOperator::new(state);
    let g = if opts.ecg_stride > 0 {
        Some(state.gradient()?)
    } else {
        None
    };
    let g_norm = g.as_deref().map(crate::sparse::scalar::norm2_real);
    let out = gmres(
        |x: &KktVector| op.apply(x).map_err(linalg_or_breakdown),
        |x: &KktVector| precond.apply(state, x).map_err(linalg_or_breakdown),
        &b,
        &GmresOptions {
            restart: opts.restart,
            tol: opts.tol,
            max_iter: opts.max_iter,
            gate: opts.gate,
        },
        |it: usize, x: &KktVector| {
            let (Some(g), Some(g_norm)) = (g.as_deref(), g_norm) else {
                return Ok(Observation::default());
            };
            if !it.is_multiple_of(opts.ecg_stride) || g_norm == 0.0 {
                return Ok(Observation::default());
            }
            let e = state
                .normal_residual(&x.ds, g, g_norm)
                .map_err(linalg_or_breakdown)?;
            Ok(Observation {
                e_cg: Some(e),
                stop: opts.ecg_tol.is_some_and(|t| e <= t),
            })
        },
    )?;
    Ok(StepSolution {
        delta_s: out.x.ds,
        log: out.log,
        converged: out.converged || out.stopped_by_observer,
        stagnated: out.stagnated,
    })
}
