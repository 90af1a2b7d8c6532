//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 a solvability
//! condition fails, 3 numerical failure (including a truncated branch),
//! 4 verification failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{exit_code, Outcome, Stage, EXIT_CONDITION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFY};
pub use config::{RunConfig, VorticitySpec, OUT_DIR_ENV};

use crate::error::{Error, Result};

const FILES_HELP: &str = "\
Output files (all floats printed with 17 significant digits):
  config.json               resolved configuration of the run
  conditions.json           {cond1, limit, theta, cond2_value, cond2}
  laminar.csv               p,H,a
  bifurcation.json          {C0, lambda_star, mode_k, transversality,
                             transversality_closed_form, theta, cond2_value}
  kernel.csv                p,f,fp   kernel profile with f(0) = 1
  wronskian_scan.csv        lambda,mu,k,W,W_scaled
  branch.csv                s,lambda,eta_crest,eta_trough,residual
  branch.json               {lambda_star, lambda_h, n_q, n_p, s_max, n_steps,
                             status, points}
  points/point_NNNN_field.csv    q,p,x,y,w,u,v,P  (rows by p, then q)
  points/point_NNNN_surface.csv  x,eta
  points/point_NNNN_summary.json {s, lambda, Q, E, crest, trough, profile,
                                  residuals, checks, pass}
  sweep.csv                 run,dir,<varied paths>,exit_code,lambda_star,message

Exit codes: 0 ok, 1 configuration, 2 condition failed, 3 numerical,
4 verification failed. See FORMATS.md for details.";

#[derive(Debug, Parser)]
#[command(
    name = "hydroelastic",
    version,
    about = "Laminar flows, bifurcation and small-amplitude branches of hydroelastic waves with vorticity",
    after_long_help = FILES_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration field, e.g. `--set numerics.n_q=32`
    /// (the value is parsed as JSON, else taken as a string; repeatable)
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Output directory [default: output.dir of the config, then
    /// $HYDROELASTIC_OUT_DIR, then ./hydroelastic-out]
    #[arg(short, long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Laminar,
    Bifurcate,
    Branch,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Laminar flow and the two solvability conditions
    Laminar(Common),
    /// Minimal bifurcation wavelength, kernel, transversality and a Wronskian scan
    Bifurcate(Common),
    /// Newton continuation of the bifurcating branch with per-point residual suites
    Branch(Common),
    /// Recompute stored results and rerun every residual suite
    /// (the config defaults to config.json inside the output directory)
    Verify(Common),
    /// Run one stage over the Cartesian product of varied config fields
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `dotted.path=v1,v2,...` or `dotted.path=[json values]` (repeatable)
        #[arg(long, value_name = "PATH=VALUES", required = true)]
        vary: Vec<String>,
        /// Stage executed for every combination
        #[arg(long, value_enum, default_value = "bifurcate")]
        stage: StageArg,
        /// Worker threads [default: available parallelism]
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn require_config(c: &Common) -> Result<&Path> {
    c.config.as_deref().ok_or_else(|| Error::invalid("--config is required"))
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Laminar(c) => {
            let cfg = RunConfig::load(require_config(&c)?, &c.set)?;
            commands::cmd_laminar(&cfg, &cfg.out_dir(c.out_dir.as_deref()))
        }
        Command::Bifurcate(c) => {
            let cfg = RunConfig::load(require_config(&c)?, &c.set)?;
            commands::cmd_bifurcate(&cfg, &cfg.out_dir(c.out_dir.as_deref()))
        }
        Command::Branch(c) => {
            let cfg = RunConfig::load(require_config(&c)?, &c.set)?;
            commands::cmd_branch(&cfg, &cfg.out_dir(c.out_dir.as_deref()))
        }
        Command::Verify(c) => {
            let (cfg, dir) = commands::verify_config(c.config.as_deref(), &c.set, c.out_dir.as_deref())?;
            commands::cmd_verify(&cfg, &dir)
        }
        Command::Sweep { common, vary, stage, jobs } => {
            let path = require_config(&common)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
            let base: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
            let base_dir = path.parent().unwrap_or(Path::new("."));
            let dir = common.out_dir.clone().unwrap_or_else(config::default_out_dir);
            let stage = match stage {
                StageArg::Laminar => Stage::Laminar,
                StageArg::Bifurcate => Stage::Bifurcate,
                StageArg::Branch => Stage::Branch,
            };
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            commands::cmd_sweep(&base, base_dir, &common.set, &vary, stage, &dir, jobs)
        }
    }
}

/// Parses `args` (including the program name), runs the command, prints
/// its report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            outcome.code
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e}");
            code
        }
    }
}
