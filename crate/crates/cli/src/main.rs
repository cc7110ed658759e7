use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kktfwi::commands::{
    cmd_compare_solvers, cmd_invert, cmd_make_model, cmd_simulate, CompareRequest, InvertRequest,
    MakeModel, ModelSpec,
};
use kktfwi::driver::{with_threads, EpsilonSchedule, InnerSolver};
use kktfwi::grid::build_grid;
use kktfwi::io::{load_compare_config, load_fwi_config, CompareConfig, ValueKind};
use kktfwi::models::LensParams;
use kktfwi::{ErrorCategory, Result};

#[derive(Parser)]
#[command(
    name = "kktfwi",
    version,
    about = "Frequency-domain FWI with full-space Gauss-Newton steps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic or imported velocity model.
    MakeModel(MakeModelArgs),
    /// Simulate data for every source and frequency of a survey.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        survey: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Compare the inner solvers on a single Gauss-Newton step.
    CompareSolvers(CompareArgs),
    /// Multi-frequency inversion.
    Invert(InvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Velocity,
    Slowness,
}

#[derive(Args)]
struct MakeModelArgs {
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    nz: usize,
    /// Grid spacing in meters.
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 10)]
    n_pml: usize,
    /// Value kind stored in the file.
    #[arg(long, value_enum, default_value_t = Kind::Velocity)]
    kind: Kind,
    /// Gaussian smoothing lengths in nodes, `SX,SZ`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    smooth: Option<Vec<f64>>,
    #[arg(long, short)]
    out: PathBuf,
    #[command(subcommand)]
    model: ModelKind,
}

#[derive(Subcommand)]
enum ModelKind {
    /// Horizontal layers.
    Layered {
        /// Interface depths in meters below the top of the core.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        interfaces: Vec<f64>,
        /// One velocity per layer, top to bottom.
        #[arg(long, value_delimiter = ',', required = true)]
        velocities: Vec<f64>,
    },
    /// Gradient background with a Gaussian anomaly.
    Lens {
        #[arg(long)]
        background: f64,
        #[arg(long, default_value_t = 0.0)]
        gradient: f64,
        #[arg(long)]
        center_x: f64,
        #[arg(long)]
        center_z: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, allow_hyphen_values = true)]
        amplitude: f64,
    },
    /// Headerless little-endian float32 velocities covering the core.
    ImportRaw {
        #[arg(long)]
        input: PathBuf,
        /// Input stored with depth varying fastest.
        #[arg(long)]
        z_fastest: bool,
    },
}

#[derive(Args)]
struct CompareArgs {
    /// Model to linearize at.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    survey: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    frequency: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ilu_levels: Option<Vec<usize>>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    initial: PathBuf,
    #[arg(long)]
    survey: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference model, drawn next to the snapshots.
    #[arg(long)]
    true_model: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    solver: Option<InnerSolver>,
    #[arg(long)]
    inner_iterations: Option<usize>,
    /// Linear epsilon ramp `START,END`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    drop_model_term: bool,
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Input => 3,
        ErrorCategory::Parse => 4,
        ErrorCategory::Numerical => 5,
        ErrorCategory::Io => 6,
    }
}

fn make_model(a: MakeModelArgs) -> Result<()> {
    let grid = build_grid(a.nx, a.nz, a.h, a.n_pml)?;
    let spec = match a.model {
        ModelKind::Layered {
            interfaces,
            velocities,
        } => ModelSpec::Layered {
            interfaces_m: interfaces,
            velocities,
        },
        ModelKind::Lens {
            background,
            gradient,
            center_x,
            center_z,
            radius,
            amplitude,
        } => ModelSpec::Lens(LensParams {
            background,
            gradient,
            center: [center_x, center_z],
            radius,
            amplitude,
        }),
        ModelKind::ImportRaw { input, z_fastest } => ModelSpec::ImportRaw {
            path: input,
            z_fastest,
        },
    };
    let req = MakeModel {
        grid,
        spec,
        smoothing: a.smooth.map(|v| [v[0], v[1]]),
        kind: match a.kind {
            Kind::Velocity => ValueKind::VelocityMps,
            Kind::Slowness => ValueKind::SlownessSq,
        },
    };
    cmd_make_model(&req, &a.out)?;
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_compare_config(p)?,
        None => CompareConfig::default(),
    };
    cfg.frequency_hz = a.frequency.or(cfg.frequency_hz);
    cfg.epsilon = a.epsilon.unwrap_or(cfg.epsilon);
    cfg.tol = a.tol.unwrap_or(cfg.tol);
    cfg.max_iterations = a.max_iterations.unwrap_or(cfg.max_iterations);
    cfg.restart = a.restart.unwrap_or(cfg.restart);
    cfg.ilu_levels = a.ilu_levels.unwrap_or(cfg.ilu_levels);
    cfg.threads = a.threads.unwrap_or(cfg.threads);
    let threads = cfg.threads;
    let req = CompareRequest {
        initial_model: &a.model,
        survey: &a.survey,
        data: &a.data,
        config: cfg,
        out_dir: &a.out_dir,
    };
    let report = with_threads(threads, || cmd_compare_solvers(&req))??;
    for r in &report.runs {
        println!(
            "{:<20} iterations {:>4}  E_cg {:.3e}  time/iter {:.3} s  setup {:.3} s  total {:.3} s",
            r.name,
            r.iterations(),
            r.final_ecg().unwrap_or(f64::NAN),
            r.time_per_iteration(),
            r.setup_time,
            r.total_time()
        );
    }
    Ok(())
}

fn invert(a: InvertArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_fwi_config(p)?,
        None => Default::default(),
    };
    cfg.solver = a.solver.unwrap_or(cfg.solver);
    cfg.inner_iterations = a.inner_iterations.unwrap_or(cfg.inner_iterations);
    if let Some(e) = a.epsilon {
        cfg.epsilon = EpsilonSchedule::Ramp {
            start: e[0],
            end: e[1],
        };
    }
    cfg.drop_model_term |= a.drop_model_term;
    cfg.threads = a.threads.unwrap_or(cfg.threads);
    let threads = cfg.threads;
    let req = InvertRequest {
        initial_model: &a.initial,
        survey: &a.survey,
        data: &a.data,
        true_model: a.true_model.as_deref(),
        config: cfg,
        out_dir: &a.out_dir,
    };
    let report = with_threads(threads, || cmd_invert(&req))??;
    println!(
        "{:>10} {:>14} {:>14}",
        "freq_hz", "resid_norm_ini", "resid_norm_fin"
    );
    for (s, (ini, fin)) in report
        .steps
        .iter()
        .zip(report.resid_norm_ini.iter().zip(&report.resid_norm_fin))
    {
        println!("{:>10} {:>14.6e} {:>14.6e}", s.freq_hz, ini, fin);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeModel(a) => make_model(a),
        Command::Simulate {
            model,
            survey,
            out,
            threads,
        } => with_threads(threads, || cmd_simulate(&model, &survey, &out).map(|_| ()))?,
        Command::CompareSolvers(a) => compare(a),
        Command::Invert(a) => invert(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
