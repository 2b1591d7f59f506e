//! `circrad`: forward transforms, reconstructions, artifact chains, the
//! radial cancellation example, ghost construction and a self-check.
//!
//! Every command writes into a fresh `<command>-<timestamp>` directory under
//! `--out` with a `manifest.json`. Exit codes: 0 ok, 1 configuration,
//! 2 numerics, 3 I/O.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use circrad::abel::AbelKernel;

use crate::config::{
    resolve, ArtifactsConfig, CancelConfig, ForwardConfig, GhostConfig, ReconstructConfig, SelfcheckConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::RunDir;

#[derive(Parser, Debug)]
#[command(name = "circrad", version, about = "Circular Radon transforms with centers on a curve")]
struct Cli {
    /// Directory that receives the run directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set phantom.radius=0.3` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sinogram of a phantom over circles centered on the curve.
    Forward {
        /// Phantom as a GridField binary.
        #[arg(long)]
        phantom: Option<PathBuf>,
        #[arg(long)]
        n_theta: Option<usize>,
    },
    /// Time-reversal reconstruction from a sinogram.
    Reconstruct {
        #[arg(long)]
        sinogram: Option<PathBuf>,
        /// Ground truth for the error report.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Artifact chains of covectors inside the curve.
    Artifacts {
        /// `x,y,xix,xiy`; replaces the configured list (repeatable).
        #[arg(long = "covector", value_name = "X,Y,XIX,XIY", allow_hyphen_values = true)]
        covectors: Vec<String>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ghost coefficients and residual orders for the radial example.
    Cancel {
        #[arg(long)]
        n_terms: Option<usize>,
    },
    /// Exterior ghost of an interior wave packet.
    Ghost {
        #[arg(long)]
        h: Option<f64>,
    },
    /// Invariant suite over all modules.
    Selfcheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true, value_enum, default_value_t = KernelArg::Corrected)]
        abel_kernel: KernelArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KernelArg {
    Corrected,
    Printed,
}

fn push<T: Serialize>(sets: &mut Vec<String>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        sets.push(format!("{key}={}", json!(v)));
    }
}

fn parse_covector(s: &str) -> CliResult<[f64; 4]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("covector `{s}`: {e}")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Config(format!("covector `{s}` needs four numbers")))
}

fn run<C: Serialize>(cli: &Cli, name: &str, cfg: &C, body: impl FnOnce(&mut RunDir) -> CliResult<()>) -> CliResult<()> {
    let mut dir = RunDir::create(&cli.out, name)?;
    if let Some(p) = &cli.config {
        dir.input(p)?;
    }
    match body(&mut dir) {
        Ok(()) => {
            let path = dir.finish(cfg)?;
            println!("{}", path.display());
            Ok(())
        }
        // the run completed; keep its outputs
        Err(e @ CliError::Failed(_)) => {
            let path = dir.finish(cfg)?;
            println!("{}", path.display());
            Err(e)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&dir.path);
            Err(e)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let file = cli.config.as_deref();
    let mut sets = cli.set.clone();
    match &cli.command {
        Command::Forward { phantom, n_theta } => {
            push(&mut sets, "phantom", phantom.as_ref().map(|p| json!({"type": "file", "path": p})));
            push(&mut sets, "n_theta", *n_theta);
            let cfg: ForwardConfig = resolve(file, &sets)?;
            run(cli, "forward", &cfg, |d| commands::forward(&cfg, d))
        }
        Command::Reconstruct { sinogram, truth, t_final, t0 } => {
            push(&mut sets, "sinogram", sinogram.as_ref());
            push(&mut sets, "truth", truth.as_ref());
            push(&mut sets, "t_final", *t_final);
            push(&mut sets, "t0", *t0);
            let cfg: ReconstructConfig = resolve(file, &sets)?;
            run(cli, "reconstruct", &cfg, |d| commands::reconstruct(&cfg, d))
        }
        Command::Artifacts { covectors, t_max, seed } => {
            if !covectors.is_empty() {
                let list = covectors.iter().map(|s| parse_covector(s)).collect::<CliResult<Vec<_>>>()?;
                push(&mut sets, "covectors", Some(list));
            }
            push(&mut sets, "t_max", *t_max);
            push(&mut sets, "seed", *seed);
            let cfg: ArtifactsConfig = resolve(file, &sets)?;
            run(cli, "artifacts", &cfg, |d| commands::artifacts(&cfg, d))
        }
        Command::Cancel { n_terms } => {
            push(&mut sets, "n_terms", *n_terms);
            let cfg: CancelConfig = resolve(file, &sets)?;
            run(cli, "cancel", &cfg, |d| commands::cancel(&cfg, d))
        }
        Command::Ghost { h } => {
            push(&mut sets, "h", *h);
            let cfg: GhostConfig = resolve(file, &sets)?;
            run(cli, "ghost", &cfg, |d| commands::ghost(&cfg, d))
        }
        Command::Selfcheck { seed, abel_kernel } => {
            push(&mut sets, "seed", *seed);
            let cfg: SelfcheckConfig = resolve(file, &sets)?;
            let kernel = match abel_kernel {
                KernelArg::Corrected => AbelKernel::Corrected,
                KernelArg::Printed => AbelKernel::Printed,
            };
            run(cli, "selfcheck", &cfg, |d| commands::selfcheck(cfg.seed, kernel, d))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    circrad::par::init_threads_from_env();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
