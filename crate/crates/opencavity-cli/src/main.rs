//! `opencavity` — batch front-end for the open-cavity library.
//!
//! Every subcommand reads one config file (TOML, or JSON with the same
//! schema), runs the corresponding computation, and leaves a self-describing
//! artifact directory: numeric tables, a plot description, the fully
//! resolved config, and a `run.json` manifest with per-file checksums.
//!
//! Exit codes: 0 success, 1 computational failure, 2 config error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use config::OutputConfig;
use error::CliError;
use output::{ArtifactWriter, OutputFormat};

#[derive(Parser)]
#[command(
    name = "opencavity",
    version,
    about = "Open optical cavities: scattering, resonance poles, mode dynamics, emission rates"
)]
struct Cli {
    /// Config file (TOML; `.json` files are parsed as JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts (default: `out`, or `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table encoding: `csv` (default) or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Master seed, overriding the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool cap, overriding the config's `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering-matrix sweep over a frequency grid.
    Smatrix,
    /// Resonance poles and widths of the configured model.
    Poles,
    /// Mode dynamics: means, occupations, steady state, optional trajectories.
    Langevin,
    /// Spontaneous-emission rate of the configured emitter.
    Emission {
        /// Also run the discretized-bath oracle and write the comparison.
        #[arg(long)]
        oracle: bool,
    },
    /// Ensemble width and spacing statistics.
    Rmt,
    /// 1D slab pipeline vs the transfer-matrix oracle.
    Oracle1d {
        /// Also locate resonances from Wigner-delay peaks.
        #[arg(long)]
        oracle: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Smatrix => "smatrix",
            Command::Poles => "poles",
            Command::Langevin => "langevin",
            Command::Emission { .. } => "emission",
            Command::Rmt => "rmt",
            Command::Oracle1d { .. } => "oracle1d",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let cfg = config::load(config_path)?;

    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let format_name = cli
        .format
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.format.clone()))
        .unwrap_or_else(|| "csv".to_string());
    let format = OutputFormat::parse(&format_name)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("out"));

    // The pool cap applies process-wide; 0 keeps rayon's per-core default.
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok();

    // Echo the fully resolved config — flag overrides included — so the
    // artifact directory reproduces the run on its own.
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    resolved.threads = Some(threads);
    resolved.output = Some(OutputConfig {
        dir: Some(out_dir.display().to_string()),
        format: Some(format_name),
    });

    let mut writer = ArtifactWriter::new(&out_dir, format)?;
    let echo = toml::to_string_pretty(&resolved)
        .map_err(|e| CliError::Compute(format!("cannot serialize resolved config: {e}")))?;
    writer.write_text("config.resolved.toml", &echo)?;

    let summary: Value = match &cli.command {
        Command::Smatrix => commands::run_smatrix(&cfg, seed, &mut writer)?,
        Command::Poles => commands::run_poles(&cfg, seed, &mut writer)?,
        Command::Langevin => commands::run_langevin(&cfg, seed, &mut writer)?,
        Command::Emission { oracle } => commands::run_emission(&cfg, seed, *oracle, &mut writer)?,
        Command::Rmt => commands::run_rmt(&cfg, seed, &mut writer)?,
        Command::Oracle1d { oracle } => commands::run_oracle1d(&cfg, *oracle, &mut writer)?,
    };

    let config_echo = serde_json::to_value(&resolved)
        .map_err(|e| CliError::Compute(format!("cannot echo config: {e}")))?;
    let dir = writer.dir().to_path_buf();
    writer.finish(cli.command.name(), seed, threads, config_echo, summary)?;
    println!("wrote artifacts to {}", dir.display());
    Ok(())
}
