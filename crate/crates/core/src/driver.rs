//! Frequency continuation: one Gauss-Newton step per frequency, low to high.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::forward::{
    build_weights, observe, relative_misfit, solve_forward, DataVector, Survey, WeightMode,
};
use crate::grid::{Grid2D, PmlProfile};
use crate::helmholtz::{assemble_helmholtz, SlownessModel};
use crate::kkt::{fsgn_gmres_step, FsgnOptions, KktPreconditioner};
use crate::reduced::{rsgn_cg_step, GnSetup, GnState, StepSolution};
use crate::sparse::scalar::norm2_real;
use crate::sparse::{lu_factor, ConvergenceLog, ResidualGate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolver {
    RsgnCg,
    FsgnGmresExact,
    FsgnGmresIlu,
}

impl InnerSolver {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RsgnCg => "rsgn-cg",
            Self::FsgnGmresExact => "fsgn-gmres-exact",
            Self::FsgnGmresIlu => "fsgn-gmres-ilu",
        }
    }
}

impl std::str::FromStr for InnerSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsgn-cg" => Ok(Self::RsgnCg),
            "fsgn-gmres-exact" => Ok(Self::FsgnGmresExact),
            "fsgn-gmres-ilu" => Ok(Self::FsgnGmresIlu),
            other => Err(Error::Config(format!(
                "unknown solver '{other}' (expected rsgn-cg, fsgn-gmres-exact or fsgn-gmres-ilu)"
            ))),
        }
    }
}

/// Regularization weight per frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSchedule {
    /// Linear in eps between the first and last frequency.
    Ramp {
        start: f64,
        end: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl EpsilonSchedule {
    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        let v = match self {
            Self::Ramp { start, end } => {
                if n == 1 {
                    vec![*start]
                } else {
                    (0..n)
                        .map(|i| match i {
                            _ if i == n - 1 => *end,
                            _ => start + (end - start) * i as f64 / (n - 1) as f64,
                        })
                        .collect()
                }
            }
            Self::Values { values } => {
                if values.len() != n {
                    return Err(Error::Config(format!(
                        "epsilon schedule has {} values for {n} frequencies",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some(bad) = v.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {bad}"
            )));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwiConfig {
    /// Overrides the survey's frequency list when set.
    pub frequencies_hz: Option<Vec<f64>>,
    pub solver: InnerSolver,
    pub inner_iterations: usize,
    /// Relative residual tolerance of the inner solver.
    pub inner_tol: f64,
    pub restart: usize,
    pub ilu_level: usize,
    pub drop_model_term: bool,
    pub weight_mode: Option<WeightMode>,
    pub epsilon: EpsilonSchedule,
    /// `[min, max]` velocity in m/s used to clamp updated models.
    pub velocity_bounds: Option<[f64; 2]>,
    /// Record `E_cg` every this many GMRES iterations (0: never).
    pub ecg_stride: usize,
    /// Worker threads (0: one per core).
    pub threads: usize,
}

impl Default for FwiConfig {
    fn default() -> Self {
        Self {
            frequencies_hz: None,
            solver: InnerSolver::FsgnGmresExact,
            inner_iterations: 30,
            inner_tol: 1e-6,
            restart: 30,
            ilu_level: 0,
            drop_model_term: false,
            weight_mode: None,
            epsilon: EpsilonSchedule::Ramp {
                start: 10.0,
                end: 1e5,
            },
            velocity_bounds: None,
            ecg_stride: 0,
            threads: 0,
        }
    }
}

/// Result of one Gauss-Newton step.
#[derive(Debug, Clone)]
pub struct GnStepResult {
    pub model: SlownessModel,
    pub delta_s: Vec<f64>,
    pub log: ConvergenceLog,
    pub converged: bool,
    pub stagnated: bool,
    /// Misfit of the model the step started from.
    pub misfit_before: f64,
}

/// Linearize at `model`, solve for the update with the configured inner
/// solver and apply it with clamping.
pub fn gn_step(
    setup: GnSetup<'_>,
    model: &SlownessModel,
    config: &FwiConfig,
) -> Result<GnStepResult> {
    let state = GnState::new(setup, model)?;
    let misfit_before = relative_misfit(&state.d_pred, setup.d_obs)?;
    let StepSolution {
        delta_s,
        log,
        converged,
        stagnated,
    } = solve_step(&state, config)?;
    let model = model.updated(&delta_s)?;
    Ok(GnStepResult {
        model,
        delta_s,
        log,
        converged,
        stagnated,
        misfit_before,
    })
}

fn solve_step(state: &GnState, config: &FwiConfig) -> Result<StepSolution> {
    let fsgn = FsgnOptions {
        restart: config.restart,
        tol: config.inner_tol,
        max_iter: config.inner_iterations,
        gate: ResidualGate::True,
        ecg_stride: config.ecg_stride,
        ecg_tol: None,
    };
    match config.solver {
        InnerSolver::RsgnCg => rsgn_cg_step(state, config.inner_tol, config.inner_iterations),
        InnerSolver::FsgnGmresExact => fsgn_gmres_step(state, &KktPreconditioner::Exact, &fsgn),
        InnerSolver::FsgnGmresIlu => {
            let (pc, _) = KktPreconditioner::ilu(state, config.ilu_level)?;
            fsgn_gmres_step(state, &pc, &fsgn)
        }
    }
}

/// Per-frequency record of an inversion.
#[derive(Debug, Clone)]
pub struct FrequencyReport {
    pub freq_hz: f64,
    pub epsilon: f64,
    /// Misfit at this frequency before and after this frequency's step.
    pub step_misfit_before: f64,
    pub step_misfit_after: f64,
    /// `||ds|| / ||s||`.
    pub relative_update: f64,
    pub log: ConvergenceLog,
    pub converged: bool,
    pub stagnated: bool,
    pub wall_time: f64,
    pub model: SlownessModel,
}

#[derive(Debug, Clone)]
pub struct FwiReport {
    pub steps: Vec<FrequencyReport>,
    /// Misfit of the initial model at each frequency.
    pub resid_norm_ini: Vec<f64>,
    /// Misfit of the final model at each frequency.
    pub resid_norm_fin: Vec<f64>,
}

impl FwiReport {
    pub fn final_model(&self) -> Option<&SlownessModel> {
        self.steps.last().map(|s| &s.model)
    }
}

/// Everything fixed across an inversion run.
#[derive(Debug, Clone, Copy)]
pub struct FwiProblem<'a> {
    pub grid: &'a Grid2D,
    pub profile: &'a PmlProfile,
    /// Geometry; its frequency list is the one inverted.
    pub survey: &'a Survey,
    /// Observed data, one vector per survey frequency.
    pub observed: &'a [DataVector],
}

/// Relative misfit of `model` at one frequency.
pub fn misfit_at(
    problem: &FwiProblem<'_>,
    model: &SlownessModel,
    freq_index: usize,
) -> Result<f64> {
    let freq = problem.survey.frequencies_hz()[freq_index];
    let op = assemble_helmholtz(
        problem.grid,
        problem.profile,
        model,
        2.0 * std::f64::consts::PI * freq,
    )?;
    let lu = lu_factor(&op.a)?;
    let d = observe(&solve_forward(&op, &lu, problem.survey)?, problem.survey)?;
    relative_misfit(&d, &problem.observed[freq_index])
}

/// Sequential Gauss-Newton steps over the survey frequencies. `on_step` sees
/// each finished frequency, so callers can persist partial results.
pub fn fwi_run(
    problem: &FwiProblem<'_>,
    config: &FwiConfig,
    initial: &SlownessModel,
    mut on_step: impl FnMut(&FrequencyReport) -> Result<()>,
) -> Result<FwiReport> {
    let freqs = problem.survey.frequencies_hz();
    if problem.observed.len() != freqs.len() {
        return Err(Error::InvalidInput(format!(
            "{} observed data sets for {} frequencies",
            problem.observed.len(),
            freqs.len()
        )));
    }
    let eps = config.epsilon.values(freqs.len())?;
    let weights = build_weights(
        problem.grid,
        problem.survey,
        config.weight_mode.unwrap_or_default(),
    );
    let mut model = initial.clone();
    if let Some([lo, hi]) = config.velocity_bounds {
        model = model.with_velocity_bounds(lo, hi)?;
    }
    let mut steps = Vec::with_capacity(freqs.len());
    for (i, &freq) in freqs.iter().enumerate() {
        let t0 = Instant::now();
        let setup = GnSetup {
            grid: problem.grid,
            profile: problem.profile,
            survey: problem.survey,
            weights: &weights,
            d_obs: &problem.observed[i],
            freq_hz: freq,
            epsilon: eps[i],
            drop_model_term: config.drop_model_term,
        };
        let at = |e: Error| Error::AtFrequency {
            index: i,
            freq_hz: freq,
            source: Box::new(e),
        };
        let step = gn_step(setup, &model, config).map_err(at)?;
        let wall_time = t0.elapsed().as_secs_f64();
        let relative_update = norm2_real(&step.delta_s) / norm2_real(model.values());
        let step_misfit_after = misfit_at(problem, &step.model, i).map_err(at)?;
        model = step.model;
        let report = FrequencyReport {
            freq_hz: freq,
            epsilon: eps[i],
            step_misfit_before: step.misfit_before,
            step_misfit_after,
            relative_update,
            log: step.log,
            converged: step.converged,
            stagnated: step.stagnated,
            wall_time,
            model: model.clone(),
        };
        on_step(&report).map_err(at)?;
        steps.push(report);
    }
    let mut resid_norm_ini = Vec::with_capacity(freqs.len());
    let mut resid_norm_fin = Vec::with_capacity(freqs.len());
    for i in 0..freqs.len() {
        resid_norm_ini.push(misfit_at(problem, initial, i)?);
        resid_norm_fin.push(misfit_at(problem, &model, i)?);
    }
    Ok(FwiReport {
        steps,
        resid_norm_ini,
        resid_norm_fin,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (0: rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_epsilon_ramp() {
        let v = EpsilonSchedule::Ramp {
            start: 10.0,
            end: 1e5,
        }
        .values(15)
        .unwrap();
        assert_eq!(v.len(), 15);
        assert_eq!(v[0], 10.0);
        assert!((v[2] - (10.0 + (1e5 - 10.0) * 2.0 / 14.0)).abs() < 1e-9);
        assert!((v[14] - 1e5).abs() < 1e-9);
        assert_eq!(
            EpsilonSchedule::Ramp {
                start: 3.0,
                end: 9.0
            }
            .values(1)
            .unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn explicit_epsilon_values_must_match_frequency_count() {
        let s = EpsilonSchedule::Values {
            values: vec![1.0, 2.0],
        };
        assert!(s.values(3).is_err());
        assert_eq!(s.values(2).unwrap(), vec![1.0, 2.0]);
        let bad = EpsilonSchedule::Values {
            values: vec![1.0, 0.0],
        };
        assert!(bad.values(2).is_err());
    }

    #[test]
    fn solver_names_round_trip() {
        for s in [
            InnerSolver::RsgnCg,
            InnerSolver::FsgnGmresExact,
            InnerSolver::FsgnGmresIlu,
        ] {
            assert_eq!(s.name().parse::<InnerSolver>().unwrap(), s);
        }
        assert!("lbfgs".parse::<InnerSolver>().is_err());
    }
}
