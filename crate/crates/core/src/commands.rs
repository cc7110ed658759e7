//! The four command-line operations, usable as a library.

use std::path::{Path, PathBuf};

use crate::driver::{fwi_run, FrequencyReport, FwiConfig, FwiProblem, FwiReport};
use crate::forward::{build_weights, observe, solve_forward, Survey};
use crate::grid::{Grid2D, PmlProfile};
use crate::helmholtz::{assemble_helmholtz, SlownessModel};
use crate::io::{
    load_survey, read_data, read_model, write_atomic, write_data, write_heatmap, write_model,
    Colormap, CompareConfig, DataSet, ModelFile, SurveyFile, ValueKind,
};
use crate::kkt::{fsgn_gmres_step, FsgnOptions, KktPreconditioner};
use crate::models::{import_raw, layered, lens, smooth, LensParams};
use crate::reduced::{rsgn_cg_step, GnSetup, GnState, StepSolution};
use crate::sparse::scalar::norm2_real;
use crate::sparse::{lu_factor, ConvergenceLog, ResidualGate};
use crate::{Error, Result};

/// Model, grid, PML and survey loaded together and cross-checked.
pub struct Inputs {
    pub grid: Grid2D,
    pub profile: PmlProfile,
    pub survey_file: SurveyFile,
    pub survey: Survey,
    pub model: SlownessModel,
}

pub fn load_inputs(model_path: &Path, survey_path: &Path) -> Result<Inputs> {
    let file = read_model(model_path)?;
    let grid = file.grid.clone();
    let model = file.to_slowness()?;
    let survey_file = load_survey(survey_path)?;
    let survey = survey_file.survey(&grid)?;
    let profile = survey_file.pml_profile(&grid)?;
    Ok(Inputs {
        grid,
        profile,
        survey_file,
        survey,
        model,
    })
}

fn check_same_grid(a: &Grid2D, b: &Grid2D, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!(
            "{what} is on a {}x{} grid (h {}, n_pml {}), expected {}x{} (h {}, n_pml {})",
            b.nx(),
            b.nz(),
            b.h(),
            b.n_pml(),
            a.nx(),
            a.nz(),
            a.h(),
            a.n_pml()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- make-model

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Layered {
        interfaces_m: Vec<f64>,
        velocities: Vec<f64>,
    },
    Lens(LensParams),
    /// Headerless float32 velocities covering the core.
    ImportRaw {
        path: PathBuf,
        z_fastest: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MakeModel {
    pub grid: Grid2D,
    pub spec: ModelSpec,
    /// Gaussian smoothing `[sigma_x, sigma_z]` in nodes, applied last.
    pub smoothing: Option<[f64; 2]>,
    pub kind: ValueKind,
}

pub fn build_model(req: &MakeModel) -> Result<ModelFile> {
    let grid = &req.grid;
    let mut velocity = match &req.spec {
        ModelSpec::Layered {
            interfaces_m,
            velocities,
        } => layered(grid, interfaces_m, velocities)?,
        ModelSpec::Lens(p) => lens(grid, p)?,
        ModelSpec::ImportRaw { path, z_fastest } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            import_raw(&bytes, grid, *z_fastest)?
        }
    };
    if let Some([sx, sz]) = req.smoothing {
        velocity = smooth(grid, &velocity, sx, sz)?;
    }
    let model = SlownessModel::from_velocity(grid, &velocity)?;
    Ok(ModelFile::from_slowness(grid, &model, req.kind))
}

pub fn cmd_make_model(req: &MakeModel, out: &Path) -> Result<ModelFile> {
    let file = build_model(req)?;
    write_model(out, &file)?;
    Ok(file)
}

// ------------------------------------------------------------------ simulate

/// Noise-free data for every source at `freqs`.
pub fn simulate(
    grid: &Grid2D,
    profile: &PmlProfile,
    survey: &Survey,
    model: &SlownessModel,
) -> Result<DataSet> {
    let freqs = survey.frequencies_hz().to_vec();
    let mut data = Vec::with_capacity(freqs.len());
    for (index, &freq) in freqs.iter().enumerate() {
        let at = |e: Error| Error::AtFrequency {
            index,
            freq_hz: freq,
            source: Box::new(e),
        };
        let op = assemble_helmholtz(grid, profile, model, 2.0 * std::f64::consts::PI * freq)
            .map_err(at)?;
        let lu = lu_factor(&op.a).map_err(|e| at(e.into()))?;
        let u = solve_forward(&op, &lu, survey).map_err(at)?;
        data.push(observe(&u, survey).map_err(at)?);
    }
    Ok(DataSet {
        frequencies_hz: freqs,
        data,
    })
}

pub fn cmd_simulate(model: &Path, survey: &Path, out: &Path) -> Result<DataSet> {
    let inp = load_inputs(model, survey)?;
    let set = simulate(&inp.grid, &inp.profile, &inp.survey, &inp.model)?;
    write_data(out, &inp.grid, &inp.survey, &set)?;
    Ok(set)
}

// ------------------------------------------------------------ compare-solvers

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub name: String,
    pub delta_s: Vec<f64>,
    pub log: ConvergenceLog,
    /// ILU factorization time, seconds (0 for the other solvers).
    pub setup_time: f64,
    /// Solver wall time excluding `E_cg` evaluation, seconds.
    pub solve_time: f64,
    /// Final `E_cg` reached the tolerance.
    pub converged: bool,
}

impl SolverRun {
    pub fn iterations(&self) -> usize {
        self.log.iterations()
    }

    pub fn time_per_iteration(&self) -> f64 {
        match self.iterations() {
            0 => 0.0,
            n => self.solve_time / n as f64,
        }
    }

    pub fn total_time(&self) -> f64 {
        self.setup_time + self.solve_time
    }

    pub fn final_ecg(&self) -> Option<f64> {
        self.log.records().iter().rev().find_map(|r| r.e_cg)
    }
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub freq_hz: f64,
    pub epsilon: f64,
    /// Sparse LU time shared by all solvers, seconds.
    pub factor_time: f64,
    pub runs: Vec<SolverRun>,
}

/// Runs RSGN-CG, FSGN-GMRES with the exact preconditioner and FSGN-GMRES with
/// ILU(p) for each configured level on one linearization point. Every solver
/// stops once `E_cg <= config.tol`.
pub fn compare_solvers(state: &GnState, config: &CompareConfig) -> Result<CompareReport> {
    config.validate()?;
    let mut runs = Vec::with_capacity(2 + config.ilu_levels.len());
    let finish = |name: String, sol: StepSolution, setup_time: f64| {
        let solve_time = sol.log.wall_time();
        let converged = sol
            .log
            .records()
            .iter()
            .rev()
            .find_map(|r| r.e_cg)
            .is_some_and(|e| e <= config.tol);
        SolverRun {
            name,
            delta_s: sol.delta_s,
            log: sol.log,
            setup_time,
            solve_time,
            converged,
        }
    };

    let cg = rsgn_cg_step(state, config.tol, config.max_iterations)?;
    runs.push(finish("rsgn-cg".into(), cg, 0.0));

    let opts = FsgnOptions {
        restart: config.restart,
        tol: 1e-14,
        max_iter: config.max_iterations,
        gate: ResidualGate::True,
        ecg_stride: config.ecg_stride,
        ecg_tol: Some(config.tol),
    };
    let exact = fsgn_gmres_step(state, &KktPreconditioner::Exact, &opts)?;
    runs.push(finish("fsgn-gmres-exact".into(), exact, 0.0));

    for &p in &config.ilu_levels {
        let (pc, setup) = KktPreconditioner::ilu(state, p)?;
        let sol = fsgn_gmres_step(state, &pc, &opts)?;
        runs.push(finish(format!("fsgn-gmres-ilu{p}"), sol, setup));
    }
    Ok(CompareReport {
        freq_hz: state.omega / (2.0 * std::f64::consts::PI),
        epsilon: state.epsilon,
        factor_time: state.factor_time,
        runs,
    })
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let fail = |e: csv::Error| Error::InvalidInput(format!("cannot encode csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(format!("cannot encode csv: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Seconds with millisecond resolution.
fn secs(t: f64) -> String {
    format!("{t:.3}")
}

fn log_rows(label: &str, log: &ConvergenceLog) -> Vec<Vec<String>> {
    log.records()
        .iter()
        .map(|r| {
            vec![
                label.to_string(),
                r.iteration.to_string(),
                opt(r.e_cg),
                r.residual_norm.to_string(),
                opt(r.precond_residual),
                secs(r.wall_time),
            ]
        })
        .collect()
}

pub fn write_compare_outputs(report: &CompareReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let conv = csv_bytes(
        &[
            "solver",
            "iteration",
            "e_cg",
            "residual_norm",
            "precond_residual",
            "wall_time_s",
        ],
        report.runs.iter().flat_map(|r| log_rows(&r.name, &r.log)),
    )?;
    write_atomic(&out_dir.join("convergence.csv"), &conv)?;

    let mut header = vec!["metric"];
    header.extend(report.runs.iter().map(|r| r.name.as_str()));
    let row = |label: &str, f: &dyn Fn(&SolverRun) -> String| {
        let mut v = vec![label.to_string()];
        v.extend(report.runs.iter().map(f));
        v
    };
    let summary = csv_bytes(
        &header,
        [
            row("Iterations", &|r| r.iterations().to_string()),
            row("Time per iteration", &|r| secs(r.time_per_iteration())),
            row("ILU initialization", &|r| secs(r.setup_time)),
            row("Total time", &|r| secs(r.total_time())),
            row("Final E_cg", &|r| opt(r.final_ecg())),
            row("Converged", &|r| r.converged.to_string()),
        ],
    )?;
    write_atomic(&out_dir.join("summary.csv"), &summary)
}

pub struct CompareRequest<'a> {
    pub initial_model: &'a Path,
    pub survey: &'a Path,
    pub data: &'a Path,
    pub config: CompareConfig,
    pub out_dir: &'a Path,
}

pub fn cmd_compare_solvers(req: &CompareRequest<'_>) -> Result<CompareReport> {
    let inp = load_inputs(req.initial_model, req.survey)?;
    let cfg = &req.config;
    let freq = cfg.frequency_hz.unwrap_or(inp.survey.frequencies_hz()[0]);
    let survey = inp.survey.with_frequencies(vec![freq]);
    let data = read_data(req.data, &inp.grid, &survey)?.select(&[freq])?;
    let weights = build_weights(
        &inp.grid,
        &survey,
        cfg.weight_mode.unwrap_or(inp.survey_file.weight_mode),
    );
    let setup = GnSetup {
        grid: &inp.grid,
        profile: &inp.profile,
        survey: &survey,
        weights: &weights,
        d_obs: &data[0],
        freq_hz: freq,
        epsilon: cfg.epsilon,
        drop_model_term: cfg.drop_model_term,
    };
    let state = GnState::new(setup, &inp.model)?;
    let report = compare_solvers(&state, cfg)?;
    write_compare_outputs(&report, req.out_dir)?;
    Ok(report)
}

// -------------------------------------------------------------------- invert

pub struct InvertRequest<'a> {
    pub initial_model: &'a Path,
    pub survey: &'a Path,
    pub data: &'a Path,
    /// Reference model; when given, its heatmaps are written alongside.
    pub true_model: Option<&'a Path>,
    pub config: FwiConfig,
    pub out_dir: &'a Path,
}

fn snapshot_name(index: usize, freq: f64) -> String {
    format!("model_{index:02}_{freq}hz")
}

fn write_velocity_maps(dir: &Path, stem: &str, grid: &Grid2D, model: &SlownessModel) -> Result<()> {
    let v = model.velocity();
    write_heatmap(
        &dir.join(format!("{stem}_grey.ppm")),
        grid,
        &v,
        Colormap::Grey,
    )?;
    write_heatmap(
        &dir.join(format!("{stem}_color.ppm")),
        grid,
        &v,
        Colormap::FalseColor,
    )?;
    Ok(())
}

fn step_rows(steps: &[FrequencyReport]) -> Vec<Vec<String>> {
    steps
        .iter()
        .map(|s| {
            vec![
                s.freq_hz.to_string(),
                s.epsilon.to_string(),
                s.step_misfit_before.to_string(),
                s.step_misfit_after.to_string(),
                s.relative_update.to_string(),
                s.log.iterations().to_string(),
                s.converged.to_string(),
                secs(s.wall_time),
            ]
        })
        .collect()
}

const STEP_HEADER: [&str; 8] = [
    "frequency_hz",
    "epsilon",
    "misfit_before",
    "misfit_after",
    "relative_update",
    "iterations",
    "converged",
    "wall_time_s",
];

/// Runs the inversion and writes, into `out_dir`:
/// one model snapshot and two heatmaps per frequency, `steps.csv` and
/// `convergence.csv` (rewritten after every frequency), and `misfit.csv`.
pub fn cmd_invert(req: &InvertRequest<'_>) -> Result<FwiReport> {
    let inp = load_inputs(req.initial_model, req.survey)?;
    let mut config = req.config.clone();
    config.weight_mode = Some(config.weight_mode.unwrap_or(inp.survey_file.weight_mode));
    let survey = match &config.frequencies_hz {
        Some(f) => inp.survey.with_frequencies(f.clone()),
        None => inp.survey.clone(),
    };
    let observed = read_data(req.data, &inp.grid, &survey)?.select(survey.frequencies_hz())?;
    let out = req.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_velocity_maps(out, "initial", &inp.grid, &inp.model)?;
    if let Some(p) = req.true_model {
        let t = read_model(p)?;
        check_same_grid(&inp.grid, &t.grid, "true model")?;
        write_velocity_maps(out, "true", &inp.grid, &t.to_slowness()?)?;
    }

    let problem = FwiProblem {
        grid: &inp.grid,
        profile: &inp.profile,
        survey: &survey,
        observed: &observed,
    };
    let mut done: Vec<FrequencyReport> = Vec::new();
    let report = fwi_run(&problem, &config, &inp.model, |step| {
        let i = done.len();
        let stem = snapshot_name(i, step.freq_hz);
        let file = ModelFile::from_slowness(&inp.grid, &step.model, ValueKind::VelocityMps);
        write_model(&out.join(format!("{stem}.bin")), &file)?;
        write_velocity_maps(out, &stem, &inp.grid, &step.model)?;
        done.push(step.clone());
        write_atomic(
            &out.join("steps.csv"),
            &csv_bytes(&STEP_HEADER, step_rows(&done))?,
        )?;
        let conv = csv_bytes(
            &[
                "frequency_hz",
                "iteration",
                "e_cg",
                "residual_norm",
                "precond_residual",
                "wall_time_s",
            ],
            done.iter()
                .flat_map(|s| log_rows(&s.freq_hz.to_string(), &s.log)),
        )?;
        write_atomic(&out.join("convergence.csv"), &conv)
    })?;

    let misfit = csv_bytes(
        &["frequency_hz", "resid_norm_ini", "resid_norm_fin"],
        survey
            .frequencies_hz()
            .iter()
            .zip(report.resid_norm_ini.iter().zip(&report.resid_norm_fin))
            .map(|(f, (a, b))| vec![f.to_string(), a.to_string(), b.to_string()]),
    )?;
    write_atomic(&out.join("misfit.csv"), &misfit)?;
    Ok(report)
}

/// `||a - b|| / ||b||` for model vectors.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2_real(&d) / norm2_real(b)
}
