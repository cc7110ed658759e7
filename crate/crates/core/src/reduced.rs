//! Gauss-Newton linearization state and the reduced-space (normal equation) path.
//!
//! The model space is real: `J v` takes a real `v`, and `J^*` results are
//! projected to their real part. The Hessian is therefore
//! `H = Re(J^* W^T W J) + eps I`.

use rayon::prelude::*;

use crate::forward::{
    observe, residual, scatter, solve_forward, DataVector, Survey, Wavefield, WeightMatrix,
};
use crate::grid::{Grid2D, PmlProfile};
use crate::helmholtz::{assemble_helmholtz, HelmholtzOperator, SlownessModel};
use crate::sparse::scalar::norm2_real;
use crate::sparse::{cg, lu_factor, CgOptions, ConvergenceLog, LuFactors};
use crate::{Error, Result, C64};

/// Everything a single Gauss-Newton step needs at one frequency.
#[derive(Debug)]
pub struct GnState {
    pub grid: Grid2D,
    pub survey: Survey,
    pub model: SlownessModel,
    pub omega: f64,
    pub epsilon: f64,
    pub drop_model_term: bool,
    pub op: HelmholtzOperator,
    pub lu: LuFactors,
    pub u: Wavefield,
    pub d_pred: DataVector,
    pub r: DataVector,
    pub weights: WeightMatrix,
    /// Diagonal of `P_k` for each source.
    pub p: Vec<Vec<C64>>,
    /// Wall time of the LU factorization, seconds.
    pub factor_time: f64,
}

/// Inputs for [`GnState::new`].
#[derive(Debug, Clone, Copy)]
pub struct GnSetup<'a> {
    pub grid: &'a Grid2D,
    pub profile: &'a PmlProfile,
    pub survey: &'a Survey,
    pub weights: &'a WeightMatrix,
    pub d_obs: &'a DataVector,
    pub freq_hz: f64,
    pub epsilon: f64,
    pub drop_model_term: bool,
}

impl GnState {
    /// Assembles and factors `A(s)`, solves the forward problems and forms the residual.
    pub fn new(setup: GnSetup<'_>, model: &SlownessModel) -> Result<Self> {
        let GnSetup {
            grid,
            profile,
            survey,
            weights,
            d_obs,
            freq_hz,
            epsilon,
            drop_model_term,
        } = setup;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if d_obs.len() != survey.n_data() || weights.diag.len() != survey.n_data() {
            return Err(Error::InvalidInput(format!(
                "survey has {} data but observed data has {} and weights {}",
                survey.n_data(),
                d_obs.len(),
                weights.diag.len()
            )));
        }
        let omega = 2.0 * std::f64::consts::PI * freq_hz;
        let op = assemble_helmholtz(grid, profile, model, omega)?;
        let t0 = std::time::Instant::now();
        let lu = lu_factor(&op.a)?;
        let factor_time = t0.elapsed().as_secs_f64();
        let u = solve_forward(&op, &lu, survey)?;
        let d_pred = observe(&u, survey)?;
        let r = residual(d_obs, &d_pred)?;
        let p = u.fields.iter().map(|uk| op.p_diagonal(uk)).collect();
        lu.reset_solve_count();
        Ok(Self {
            grid: grid.clone(),
            survey: survey.clone(),
            model: model.clone(),
            omega,
            epsilon,
            drop_model_term,
            op,
            lu,
            u,
            d_pred,
            r,
            weights: weights.clone(),
            p,
            factor_time,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn n_sources(&self) -> usize {
        self.survey.n_sources()
    }

    /// Diagonal of `F_k = Q_k^* W_k^T W_k Q_k` on the grid.
    pub fn f_diagonal(&self, k: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.n_nodes()];
        let range = self.survey.data_range(k);
        for (&r, w) in self.survey.sources()[k]
            .receivers
            .iter()
            .zip(&self.weights.diag[range])
        {
            f[r] += w * w;
        }
        f
    }

    fn check_model_len(&self, v: usize) -> Result<()> {
        if v != self.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "model-space vector has {v} entries, expected {}",
                self.n_nodes()
            )));
        }
        Ok(())
    }

    fn check_data_len(&self, w: usize) -> Result<()> {
        if w != self.survey.n_data() {
            return Err(Error::InvalidInput(format!(
                "data vector has {w} entries, expected {}",
                self.survey.n_data()
            )));
        }
        Ok(())
    }

    /// `A^{-1} P_k v` for one source.
    fn forward_sensitivity(&self, k: usize, v: &[C64]) -> Result<Vec<C64>> {
        let rhs: Vec<C64> = self.p[k].iter().zip(v).map(|(p, vi)| p * vi).collect();
        Ok(self.lu.solve(&rhs, false)?)
    }

    /// `P_k^* A^{-*} Q_k^* w_k` for one source.
    fn adjoint_sensitivity(&self, k: usize, w_k: &[C64]) -> Result<Vec<C64>> {
        let q = scatter(&self.survey, k, w_k, self.n_nodes());
        let z = self.lu.solve(&q, true)?;
        Ok(self.p[k]
            .iter()
            .zip(&z)
            .map(|(p, zi)| p.conj() * zi)
            .collect())
    }

    fn sample(&self, k: usize, field: &[C64]) -> Vec<C64> {
        self.survey.sources()[k]
            .receivers
            .iter()
            .map(|&r| field[r])
            .collect()
    }

    /// `J v = Q A^{-1} P v` for a complex model-space vector.
    pub fn jacobian_apply_complex(&self, v: &[C64]) -> Result<DataVector> {
        self.check_model_len(v.len())?;
        let parts = (0..self.n_sources())
            .into_par_iter()
            .map(|k| Ok(self.sample(k, &self.forward_sensitivity(k, v)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DataVector {
            values: parts.concat(),
        })
    }

    /// `J v` for a real model perturbation.
    pub fn jacobian_apply(&self, v: &[f64]) -> Result<DataVector> {
        let vc: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.jacobian_apply_complex(&vc)
    }

    /// `J^* w = sum_k P_k^* A^{-*} Q_k^* w_k`, without the real projection.
    pub fn jacobian_adjoint_apply_complex(&self, w: &DataVector) -> Result<Vec<C64>> {
        self.check_data_len(w.len())?;
        let parts = (0..self.n_sources())
            .into_par_iter()
            .map(|k| self.adjoint_sensitivity(k, &w.values[self.survey.data_range(k)]))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![C64::new(0.0, 0.0); self.n_nodes()];
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        Ok(out)
    }

    /// `Re(J^* w)`.
    pub fn jacobian_adjoint_apply(&self, w: &DataVector) -> Result<Vec<f64>> {
        Ok(self
            .jacobian_adjoint_apply_complex(w)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// Source `k`'s share of the data term, `Re(J_k^* W_k^2 J_k v)`.
    pub fn hessian_apply_source(&self, k: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_model_len(v.len())?;
        let vc: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        let range = self.survey.data_range(k);
        let d = self.sample(k, &self.forward_sensitivity(k, &vc)?);
        let wd: Vec<C64> = d
            .iter()
            .zip(&self.weights.diag[range])
            .map(|(di, w)| di * (w * w))
            .collect();
        Ok(self
            .adjoint_sensitivity(k, &wd)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// `H v = Re(J^* W^T W J v) + eps v`; two solves per source.
    pub fn hessian_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_model_len(v.len())?;
        let parts = (0..self.n_sources())
            .into_par_iter()
            .map(|k| self.hessian_apply_source(k, v))
            .collect::<Result<Vec<_>>>()?;
        let mut out: Vec<f64> = v.iter().map(|x| self.epsilon * x).collect();
        for part in parts {
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
        Ok(out)
    }

    /// `g = Re(J^* W^T W r) - eps s`, the last term omitted when
    /// `drop_model_term` is set.
    pub fn gradient(&self) -> Result<Vec<f64>> {
        let wr = DataVector {
            values: self.weights.apply_squared(&self.r.values),
        };
        let mut g = self.jacobian_adjoint_apply(&wr)?;
        if !self.drop_model_term {
            for (gi, si) in g.iter_mut().zip(self.model.values()) {
                *gi -= self.epsilon * si;
            }
        }
        Ok(g)
    }

    /// `||H ds - g|| / ||g||` for a candidate update.
    pub fn normal_residual(&self, ds: &[f64], g: &[f64], g_norm: f64) -> Result<f64> {
        let hd = self.hessian_apply(ds)?;
        let r: Vec<f64> = hd.iter().zip(g).map(|(a, b)| a - b).collect();
        Ok(norm2_real(&r) / g_norm)
    }
}

/// Outcome of an inner linear solve of one Gauss-Newton step.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub delta_s: Vec<f64>,
    pub log: ConvergenceLog,
    pub converged: bool,
    pub stagnated: bool,
}

/// Solves `H ds = g` by CG. The log's `e_cg` column is the CG residual.
pub fn rsgn_cg_step(state: &GnState, tol: f64, max_iter: usize) -> Result<StepSolution> {
    let g = state.gradient()?;
    let out = cg(
        |v: &Vec<f64>| state.hessian_apply(v).map_err(linalg_or_breakdown),
        &g,
        &CgOptions { tol, max_iter },
    )?;
    let mut log = out.log;
    for rec in log.records_mut() {
        rec.e_cg = Some(rec.residual_norm);
    }
    Ok(StepSolution {
        delta_s: out.x,
        log,
        converged: out.converged,
        stagnated: out.stagnated,
    })
}

/// Krylov closures must return linear algebra errors; anything else is
/// reported as a breakdown carrying the message.
pub(crate) fn linalg_or_breakdown(e: Error) -> crate::sparse::LinalgError {
    match e {
        Error::Linalg(l) => l,
        other => crate::sparse::LinalgError::Breakdown {
            iteration: 0,
            detail: other.to_string(),
        },
    }
}
