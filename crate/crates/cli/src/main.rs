//! `casimir`: Lifshitz sphere-plate forces, roughness corrections and
//! torsional-balance calibration from JSON configurations.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "casimir",
    version,
    about = "Casimir force calculations and balance calibration"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Force curves for every entry of the `force` section (CSV).
    Force {
        #[command(flatten)]
        common: Common,
        /// Log-log plot of |F| against d.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Sphere and plate roughness profiles, `sphere.json,plate.json`.
        #[arg(long, value_parser = parse_pair)]
        roughness: Option<(PathBuf, PathBuf)>,
    },
    /// Ratio of two force curves on the same separation grid (CSV).
    Compare {
        #[command(flatten)]
        common: Common,
        /// Second configuration; without it the first two curves of --config are compared.
        #[arg(long)]
        against: Option<PathBuf>,
        #[arg(long)]
        curve_a: Option<String>,
        #[arg(long)]
        curve_b: Option<String>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Permittivity on the imaginary axis (CSV).
    Kk {
        #[command(flatten)]
        common: Common,
    },
    /// Height-map histogram as a roughness profile (JSON).
    Roughness {
        #[command(flatten)]
        common: Common,
    },
    /// Synthetic balance sweeps (CSV readable by `analyze`).
    Synth {
        #[command(flatten)]
        common: Common,
        /// Overrides the plan's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibration and force extraction from sweeps (JSON).
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV; overrides `analyze.input`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also write the extracted force curve as CSV.
        #[arg(long)]
        forces_csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(PathBuf, PathBuf), String> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.into(), b.into())),
        _ => Err("expected two comma-separated paths, sphere.json,plate.json".into()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("cannot start {n} worker threads: {e}"))?;
    }
    match cli.command {
        Command::Force {
            common,
            svg,
            roughness,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            commands::cmd_force(
                &cfg,
                roughness.as_ref(),
                common.out.as_deref(),
                svg.as_deref(),
            )
        }
        Command::Compare {
            common,
            against,
            curve_a,
            curve_b,
            svg,
        } => {
            let a = RunConfig::load(&common.config)?;
            let b = against.as_deref().map(RunConfig::load).transpose()?;
            commands::cmd_compare(
                &a,
                b.as_ref(),
                curve_a.as_deref(),
                curve_b.as_deref(),
                common.out.as_deref(),
                svg.as_deref(),
            )
        }
        Command::Kk { common } => {
            commands::cmd_kk(&RunConfig::load(&common.config)?, common.out.as_deref())
        }
        Command::Roughness { common } => {
            commands::cmd_roughness(&RunConfig::load(&common.config)?, common.out.as_deref())
        }
        Command::Synth { common, seed } => commands::cmd_synth(
            &RunConfig::load(&common.config)?,
            seed,
            common.out.as_deref(),
        ),
        Command::Analyze {
            common,
            input,
            forces_csv,
            svg,
        } => commands::cmd_analyze(
            &RunConfig::load(&common.config)?,
            input.as_deref(),
            common.out.as_deref(),
            forces_csv.as_deref(),
            svg.as_deref(),
        ),
    }
}

/// 2 when a quadrature failed to converge, 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let non_convergence = err
        .chain()
        .filter_map(|e| e.downcast_ref::<casimir_core::Error>())
        .any(casimir_core::Error::is_non_convergence);
    if non_convergence {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are validation errors (exit 1), not clap's default 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
