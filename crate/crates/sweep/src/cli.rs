use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use dichro_core::bath::build_kernel_table;
use dichro_core::dynamics::{read_px_final, InitialState, MasterEquation, ModelSpec};
use dichro_core::sps::{figures_of_merit, qrt_correlations, upper_bounds_with};

use crate::config::{InitialName, Settings};
use crate::error::{Result, SweepError};
use crate::output::{write_sweep, write_with, TOOL_VERSION};
use crate::scan::{run_width_scan, write_scan_csv};
use crate::sweep::{refine_max, run_sweep_with, Evaluator, SweepSpec};

/// Exciton preparation by dichromatic pulses and single-photon-source figures of merit.
#[derive(Debug, Parser)]
#[command(name = "dichro", version)]
pub struct Cli {
    /// Configuration file (TOML sections).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a key: --set section.key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; defaults to $DICHRO_WORKERS or the number of CPUs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single trajectory to CSV.
    Trace {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid of (Θ_b, Θ_r) to a CSV matrix plus axes files.
    Sweep {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cavity pipeline: N, N_b, I, photon budget.
    Fom {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the two-time correlation grid.
        #[arg(long)]
        correlations: Option<PathBuf>,
    },
    /// Figures of merit versus pulse width at t_p·δ = 6.
    Scan {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// β and the indistinguishability bound from an excited emitter.
    Bounds,
    /// Bath correlation table to CSV.
    Kernel {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub const WORKERS_ENV: &str = "DICHRO_WORKERS";

fn workers(cli: &Cli) -> Result<usize> {
    if let Some(w) = cli.workers {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            v.trim().parse().map_err(|_| SweepError::Config(format!("{WORKERS_ENV} = `{v}` is not a worker count")))
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn output_path(settings: &Settings, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| Path::new(&settings.output.dir).join(name))
}

fn cavity_model(settings: &Settings) -> Result<ModelSpec> {
    Ok(ModelSpec { cavity: Some(settings.cavity_spec()), ..settings.model_spec()? })
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref(), &cli.overrides)?;
    let workers = workers(cli)?;
    match &cli.command {
        Command::Trace { out } => {
            let model = settings.model_spec()?;
            let config = settings.solver_for(&model);
            let traj = MasterEquation::new(&model, &config, None)?.evolve()?;
            let path = output_path(&settings, out, "trace.csv");
            write_with(&path, |w| traj.write_csv(w))?;
            if model.initial_state == InitialState::Ground {
                println!("P_X(3 t_p) = {:.6}", read_px_final(&traj, model.pulse.t_p)?);
            }
            println!("wrote {}", path.display());
        }
        Command::Sweep { out } => {
            let spec = SweepSpec::from_settings(&settings)?;
            let evaluator = Evaluator::for_sweep(&spec)?;
            let mut result = run_sweep_with(&spec, workers, &evaluator, |_, _| true)?;
            result.provenance = format!("# tool = {TOOL_VERSION}\n{}", settings.to_toml());
            let dir = output_path(&settings, out, "sweep");
            write_sweep(&result, &dir)?;
            if let Some(p) = result.max_location {
                println!("grid max {:.6} at ({:.3}π, {:.3}π)", p.value, p.theta_b / PI, p.theta_r / PI);
            }
            if settings.sweep.refine {
                if let Some(p) = refine_max(&result, &evaluator, |_, _| true) {
                    println!("refined max {:.6} at ({:.3}π, {:.3}π)", p.value, p.theta_b / PI, p.theta_r / PI);
                }
            }
            if result.failures() > 0 {
                println!("{} cells failed; see status.csv", result.failures());
            }
            println!("wrote {}", dir.display());
        }
        Command::Fom { out, correlations } => {
            let model = cavity_model(&settings)?;
            let config = settings.solver_for(&model);
            let report = figures_of_merit(&model, &config, None)?;
            let mut text = Vec::new();
            report.write_record(&mut text).map_err(|e| SweepError::io("stdout", e))?;
            print!("{}", String::from_utf8_lossy(&text));
            if let Some(path) = out {
                write_with(path, |w| report.write_record(w))?;
            }
            if let Some(path) = correlations {
                let eq = MasterEquation::new(&model, &config, None)?;
                let traj = eq.evolve()?;
                let grid = qrt_correlations(&eq, &traj)?;
                write_with(path, |w| grid.write_csv(w))?;
            }
        }
        Command::Scan { out } => {
            let rows = run_width_scan(&settings.scan.t_p_list, &settings, workers)?;
            let path = output_path(&settings, out, "scan.csv");
            write_with(&path, |w| write_scan_csv(&rows, w))?;
            write_scan_csv(&rows, std::io::stdout()).map_err(|e| SweepError::io("stdout", e))?;
        }
        Command::Bounds => {
            let mut s = settings.clone();
            s.model.initial_state = InitialName::Excited;
            let mut model = cavity_model(&s)?;
            if model.bath.is_phonon_free() {
                model.backend = dichro_core::dynamics::Backend::Unitary;
            }
            let config = s.solver_for(&model);
            let ub = upper_bounds_with(&model, &config, None)?;
            println!("beta = {:.3}", ub.beta);
            println!("I_ub = {:.3}", ub.indistinguishability);
            println!("N_b = {:.4}", ub.background);
        }
        Command::Kernel { out } => {
            let bath = settings.bath()?;
            let ds = settings.solver.ds.unwrap_or(dichro_core::dynamics::DEFAULT_DS);
            let table = build_kernel_table(&bath, ds, settings.solver.s_max)?;
            let path = output_path(&settings, out, "kernel.csv");
            write_with(&path, |w| table.write_csv(w))?;
            println!("D = {:.6} rad/ps, B = {:.6}", table.polaron_shift, table.renorm_b);
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
