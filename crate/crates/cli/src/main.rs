use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use stripfdtd::config::SimulationConfig;
use stripfdtd::scenario::{self, Analysis};
use stripfdtd::sources::Polarization;
use stripfdtd::Error;

mod plot;

/// Exit codes.
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_AMBIGUOUS: u8 = 3;
const EXIT_NOT_DECAYED: u8 = 4;

#[derive(Parser)]
#[command(name = "stripfdtd", version, about = "FDTD scenarios for stacked silver-strip unit cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Overrides {
    /// Cubic cell size in nm.
    #[arg(long)]
    resolution_nm: Option<f64>,
    /// Incident polarization for periodic scenarios.
    #[arg(long, value_parser = parse_polarization)]
    polarization: Option<Polarization>,
    /// Worker threads for the field updates.
    #[arg(long, env = "STRIPFDTD_WORKERS")]
    workers: Option<usize>,
    /// Output directory (overrides `run.output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a scenario once per strip shift and track the resonance branches.
    Sweep {
        config: PathBuf,
        /// Comma-separated shifts in nm.
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute features (and sweep branches) from a finished output directory.
    Analyze { dir: PathBuf },
    /// Write SVG plots of spectra, field maps and sweep branches.
    Plot { dir: PathBuf },
}

fn parse_polarization(s: &str) -> Result<Polarization, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(path: &Path, o: &Overrides) -> anyhow::Result<SimulationConfig> {
    let mut cfg = SimulationConfig::load(path)?;
    if let Some(r) = o.resolution_nm {
        cfg.grid.resolution_nm = r;
    }
    if let Some(p) = o.polarization {
        cfg.source.polarization = p;
    }
    if o.workers.is_some() {
        cfg.run.workers = o.workers;
    }
    if let Some(out) = &o.out {
        cfg.run.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::AmbiguousSweep(_)) => EXIT_AMBIGUOUS,
        Some(
            Error::Configuration(_)
            | Error::ConfigParse(_)
            | Error::InvalidGeometry(_)
            | Error::InvalidGrid(_)
            | Error::Domain(_)
            | Error::UnstableParameters(_),
        ) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let r = scenario::run_scenario(&cfg)?;
            println!("{}", std::fs::read_to_string(r.dir.join("report.txt"))?);
            println!("outputs in {}", r.dir.display());
            if !r.metadata.decayed {
                eprintln!("warning: fields did not decay below the threshold");
                return Ok(EXIT_NOT_DECAYED);
            }
            Ok(0)
        }
        Command::Sweep {
            config,
            delta,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let s = scenario::sweep(&cfg, &delta)?;
            println!("{}", std::fs::read_to_string(s.dir.join("report.txt"))?);
            s.branches?;
            let mut code = 0;
            for (d, r) in &s.runs {
                match r {
                    Err(e) => {
                        eprintln!("delta {d} nm failed: {e}");
                        code = EXIT_FAILURE;
                    }
                    Ok(r) if !r.metadata.decayed && code == 0 => code = EXIT_NOT_DECAYED,
                    Ok(_) => {}
                }
            }
            Ok(code)
        }
        Command::Analyze { dir } => {
            if let Analysis::Sweep { branches } = scenario::analyze_dir(&dir)? {
                log::info!("{} sweep points", branches.deltas.len());
            }
            println!("{}", std::fs::read_to_string(dir.join("report.txt"))?);
            Ok(0)
        }
        Command::Plot { dir } => {
            let written = plot::plot_dir(&dir).with_context(|| format!("plotting {}", dir.display()))?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
