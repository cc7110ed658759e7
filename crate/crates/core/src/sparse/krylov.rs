//! Conjugate gradients and restarted GMRES over any [`KrylovVector`] space.
//!
//! Operators are closures so callers can wrap matrix-free applications that
//! themselves perform sparse solves and may fail.

use std::time::Instant;

use super::scalar::{KrylovVector, Scalar};
use super::LinalgError;

/// One entry of a solver convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// True relative residual `||b - A x|| / ||b||`.
    pub residual_norm: f64,
    /// Relative residual of the preconditioned system, when there is one.
    pub precond_residual: Option<f64>,
    /// Normal-equation residual `||H ds - g|| / ||g||` of the iterate.
    pub e_cg: Option<f64>,
    /// Solver wall time since the start of the solve, seconds. Time spent in
    /// observers is excluded.
    pub wall_time: f64,
}

/// Per-iteration history; iteration indices strictly increase from 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceLog {
    records: Vec<IterationRecord>,
}

impl ConvergenceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: IterationRecord) {
        match self.records.last() {
            Some(last) => assert!(
                record.iteration > last.iteration,
                "iteration indices must strictly increase"
            ),
            None => assert_eq!(record.iteration, 0, "log must start at iteration 0"),
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [IterationRecord] {
        &mut self.records
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Number of iterations performed (the initial record does not count).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total solver wall time in seconds.
    pub fn wall_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.wall_time)
    }
}

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct KrylovOutcome<V> {
    pub x: V,
    pub log: ConvergenceLog,
    pub converged: bool,
    /// A whole restart cycle passed without reducing the residual.
    pub stagnated: bool,
    /// The observer asked the solver to stop.
    pub stopped_by_observer: bool,
}

impl<V> KrylovOutcome<V> {
    pub fn iterations(&self) -> usize {
        self.log.iterations()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// CG for a Hermitian positive definite operator, starting from zero.
///
/// Stops when `||b - H x|| / ||b|| <= tol` (recursively updated residual) or
/// after `max_iter` iterations. A non-positive curvature `<p, H p>` aborts
/// with [`LinalgError::Breakdown`].
pub fn cg<V, A>(mut apply: A, b: &V, opts: &CgOptions) -> Result<KrylovOutcome<V>, LinalgError>
where
    V: KrylovVector,
    A: FnMut(&V) -> Result<V, LinalgError>,
{
    let start = Instant::now();
    let mut log = ConvergenceLog::new();
    let mut x = b.zeros_like();
    let b_norm = b.norm();
    if b_norm == 0.0 {
        log.push(IterationRecord {
            iteration: 0,
            residual_norm: 0.0,
            precond_residual: None,
            e_cg: None,
            wall_time: 0.0,
        });
        return Ok(KrylovOutcome {
            x,
            log,
            converged: true,
            stagnated: false,
            stopped_by_observer: false,
        });
    }
    log.push(IterationRecord {
        iteration: 0,
        residual_norm: 1.0,
        precond_residual: None,
        e_cg: None,
        wall_time: start.elapsed().as_secs_f64(),
    });

    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r).real();
    let mut converged = false;
    for it in 1..=opts.max_iter {
        let q = apply(&p)?;
        let curvature = p.dot(&q).real();
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(LinalgError::Breakdown {
                iteration: it,
                detail: format!("non-positive curvature {curvature:e}; operator is not HPD"),
            });
        }
        let alpha = rr / curvature;
        x.axpy(V::Scalar::from_real(alpha), &p);
        r.axpy(V::Scalar::from_real(-alpha), &q);
        let rr_new = r.dot(&r).real();
        let rel = rr_new.max(0.0).sqrt() / b_norm;
        log.push(IterationRecord {
            iteration: it,
            residual_norm: rel,
            precond_residual: None,
            e_cg: None,
            wall_time: start.elapsed().as_secs_f64(),
        });
        if rel <= opts.tol {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        // p = r + beta p
        p.scale(V::Scalar::from_real(beta));
        p.axpy(V::Scalar::from_real(1.0), &r);
    }
    Ok(KrylovOutcome {
        x,
        log,
        converged,
        stagnated: false,
        stopped_by_observer: false,
    })
}

/// Which residual the GMRES tolerance applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualGate {
    /// `||M (b - A x)|| / ||M b||`
    Preconditioned,
    /// `||b - A x|| / ||b||`
    True,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub gate: ResidualGate,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 30,
            tol: 1e-8,
            max_iter: 300,
            gate: ResidualGate::Preconditioned,
        }
    }
}

/// What an observer reports back about an iterate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub e_cg: Option<f64>,
    pub stop: bool,
}

/// Observer that records nothing and never stops the solver.
pub fn no_observer<V>(_: usize, _: &V) -> Result<Observation, LinalgError> {
    Ok(Observation::default())
}

fn givens<S: Scalar>(a: S, b: S) -> (f64, S) {
    let abs_a = a.modulus();
    let abs_b = b.modulus();
    let r = abs_a.hypot(abs_b);
    if r == 0.0 {
        (1.0, S::zero())
    } else if abs_a == 0.0 {
        (0.0, b.conj() * S::from_real(1.0 / abs_b))
    } else {
        (abs_a / r, a * S::from_real(1.0 / (abs_a * r)) * b.conj())
    }
}

#[inline]
fn rotate<S: Scalar>(c: f64, s: S, x: S, y: S) -> (S, S) {
    let c = S::from_real(c);
    (c * x + s * y, c * y - s.conj() * x)
}

/// Left-preconditioned restarted GMRES from a zero initial guess.
///
/// `precond` applies an approximate inverse of `apply`. After every inner
/// iteration the current iterate is formed explicitly, its true residual is
/// logged and it is handed to `observer`, which may report an `E_cg` value or
/// stop the solve. If a full restart cycle fails to reduce the true residual
/// the best iterate seen so far is returned with `stagnated` set.
pub fn gmres<V, A, M, O>(
    mut apply: A,
    mut precond: M,
    b: &V,
    opts: &GmresOptions,
    mut observer: O,
) -> Result<KrylovOutcome<V>, LinalgError>
where
    V: KrylovVector,
    A: FnMut(&V) -> Result<V, LinalgError>,
    M: FnMut(&V) -> Result<V, LinalgError>,
    O: FnMut(usize, &V) -> Result<Observation, LinalgError>,
{
    let start = Instant::now();
    let mut observer_time = 0.0;
    let solver_time = |observer_time: f64| start.elapsed().as_secs_f64() - observer_time;

    let mut log = ConvergenceLog::new();
    let mut x = b.zeros_like();
    let b_norm = b.norm();
    let done = |x, log, converged, stagnated, stopped| {
        Ok(KrylovOutcome {
            x,
            log,
            converged,
            stagnated,
            stopped_by_observer: stopped,
        })
    };
    if b_norm == 0.0 {
        log.push(IterationRecord {
            iteration: 0,
            residual_norm: 0.0,
            precond_residual: Some(0.0),
            e_cg: None,
            wall_time: 0.0,
        });
        return done(x, log, true, false, false);
    }

    let mut z = precond(b)?;
    let mut beta = z.norm();
    let mb_norm = beta;
    log.push(IterationRecord {
        iteration: 0,
        residual_norm: 1.0,
        precond_residual: Some(1.0),
        e_cg: None,
        wall_time: solver_time(observer_time),
    });
    if mb_norm == 0.0 {
        return Err(LinalgError::Breakdown {
            iteration: 0,
            detail: "preconditioner annihilates the right-hand side".into(),
        });
    }

    let restart = opts.restart.max(1);
    let mut iter = 0usize;
    let mut true_rel = 1.0f64;
    let mut best = (x.clone(), true_rel);

    loop {
        let cycle_start_rel = true_rel;
        if beta == 0.0 {
            // Exact in the preconditioned sense but the gate was not met.
            let (bx, _) = best;
            return done(bx, log, false, true, false);
        }
        let mut basis: Vec<V> = Vec::with_capacity(restart + 1);
        let mut v0 = z.clone();
        v0.scale(V::Scalar::from_real(1.0 / beta));
        basis.push(v0);
        let mut g = vec![V::Scalar::zero(); restart + 1];
        g[0] = V::Scalar::from_real(beta);
        // Columns of the rotated Hessenberg matrix.
        let mut hcols: Vec<Vec<V::Scalar>> = Vec::with_capacity(restart);
        let mut rotations: Vec<(f64, V::Scalar)> = Vec::with_capacity(restart);
        let mut x_cycle = x.clone();

        for j in 0..restart {
            if iter >= opts.max_iter {
                return done(best.0, log, false, false, false);
            }
            let mut w = precond(&apply(&basis[j])?)?;
            let w_norm0 = w.norm();
            let mut h = vec![V::Scalar::zero(); j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = vi.dot(&w);
                w.axpy(-hij, vi);
                h[i] = hij;
            }
            let h_next = w.norm();
            h[j + 1] = V::Scalar::from_real(h_next);
            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (a, bb) = rotate(c, s, h[i], h[i + 1]);
                h[i] = a;
                h[i + 1] = bb;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            let (a, _) = rotate(c, s, h[j], h[j + 1]);
            h[j] = a;
            h[j + 1] = V::Scalar::zero();
            let (gj, gj1) = rotate(c, s, g[j], g[j + 1]);
            g[j] = gj;
            g[j + 1] = gj1;
            rotations.push((c, s));
            hcols.push(h);
            iter += 1;

            // Current iterate: x + V y with R y = g.
            let k = j + 1;
            let mut y = vec![V::Scalar::zero(); k];
            for i in (0..k).rev() {
                let mut acc = g[i];
                for (l, yl) in y.iter().enumerate().skip(i + 1) {
                    acc -= hcols[l][i] * *yl;
                }
                y[i] = acc / hcols[i][i];
            }
            x_cycle = x.clone();
            for (vi, yi) in basis.iter().zip(&y) {
                x_cycle.axpy(*yi, vi);
            }
            let mut r = b.clone();
            r.axpy(V::Scalar::from_real(-1.0), &apply(&x_cycle)?);
            true_rel = r.norm() / b_norm;
            let precond_rel = g[j + 1].modulus() / mb_norm;

            let t_obs = Instant::now();
            let obs = observer(iter, &x_cycle)?;
            observer_time += t_obs.elapsed().as_secs_f64();

            log.push(IterationRecord {
                iteration: iter,
                residual_norm: true_rel,
                precond_residual: Some(precond_rel),
                e_cg: obs.e_cg,
                wall_time: solver_time(observer_time),
            });
            if true_rel < best.1 {
                best = (x_cycle.clone(), true_rel);
            }
            let gate_met = match opts.gate {
                ResidualGate::Preconditioned => precond_rel <= opts.tol,
                ResidualGate::True => true_rel <= opts.tol,
            };
            if gate_met {
                return done(x_cycle, log, true, false, false);
            }
            if obs.stop {
                return done(x_cycle, log, false, false, true);
            }
            if h_next <= 1e-14 * w_norm0 || h_next == 0.0 {
                // Invariant subspace reached; restart from the current iterate.
                break;
            }
            w.scale(V::Scalar::from_real(1.0 / h_next));
            basis.push(w);
        }

        x = x_cycle;
        if true_rel >= cycle_start_rel {
            return done(best.0, log, false, true, false);
        }
        let mut r = b.clone();
        r.axpy(V::Scalar::from_real(-1.0), &apply(&x)?);
        z = precond(&r)?;
        beta = z.norm();
    }
}
