//! Command-line driver: run a configured scenario, sweep the accuracy
//! benchmark over refinement levels, or probe cut-position robustness.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use chsurf_core::scenarios;
use chsurf_core::timeloop::OutputConfig;
use chsurf_core::Simulation;

#[derive(Parser)]
#[command(name = "chsurf", about = "Cahn-Hilliard phase separation on evolving surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a config file.
    Run {
        /// Path to a key=value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config and CHSURF_OUTPUT_ROOT).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Refinement sweep of the synthetic rigid-sphere benchmark with fitted
    /// convergence rates.
    Convergence {
        #[arg(long, default_value = "test1b")]
        scenario: String,
        /// Level range, e.g. 1..3 (inclusive).
        #[arg(long, default_value = "1..3")]
        levels: String,
    },
    /// Cut-position robustness: GMRES iteration counts over random sub-cell
    /// sphere offsets.
    SweepOffsets {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        level: u32,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
}

fn parse_levels(spec: &str) -> anyhow::Result<(u32, u32)> {
    let (a, b) = spec
        .split_once("..")
        .with_context(|| format!("expected A..B, got '{spec}'"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn default_output_root() -> PathBuf {
    std::env::var_os("CHSURF_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = chsurf_core::config::parse_config(&text)?;
            if let Some(dir) = output {
                cfg.output_dir = Some(dir);
            }
            let dir = cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| default_output_root().join(&cfg.scenario));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("config.echo.cfg"), cfg.to_config_text())?;
            let mut sim = Simulation::new(cfg.setup()?)?;
            let out = OutputConfig { dir: dir.clone(), vtk_interval: cfg.vtk_interval };
            let records = sim.run(Some(&out))?;
            let last = records.last().expect("at least the initial record");
            println!(
                "{}: {} steps, final t = {:.6}, energy = {:.6e}, mass = {:.6e}",
                cfg.scenario,
                records.len() - 1,
                last.time,
                last.energy,
                last.mass
            );
            println!("wrote {}", dir.join("records.csv").display());
            Ok(())
        }
        Command::Convergence { scenario, levels } => {
            if scenario != "test1b" {
                bail!("convergence sweep is defined for the test1b benchmark");
            }
            let (lo, hi) = parse_levels(&levels)?;
            if lo >= hi {
                bail!("need at least two levels, got {lo}..{hi}");
            }
            let table = scenarios::convergence_test1b(lo..=hi)?;
            print!("{}", table.render());
            Ok(())
        }
        Command::SweepOffsets { n, level, seed } => {
            let iters = scenarios::sweep_offsets(n, level, seed)?;
            let max = *iters.iter().max().unwrap_or(&0);
            let min = *iters.iter().min().unwrap_or(&0);
            println!("gmres iterations over {n} offsets: {iters:?}");
            println!(
                "min = {min}, max = {max}, ratio = {:.3}",
                max as f64 / min.max(1) as f64
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
