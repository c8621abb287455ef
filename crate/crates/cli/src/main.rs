//! `dtwa`: experiment runner for long-range Ising/XY quench simulations.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Source};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(
    name = "dtwa",
    version,
    about = "DTWA quench simulations, exact oracles and light-cone analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory-ensemble simulation
    Dtwa(Common),
    /// Closed-form Ising dynamics
    OracleIsing(Common),
    /// Exact state-vector propagation (up to 22 spins)
    OracleEd(Common),
    /// Contours and power-law fits of correlation spreading
    AnalyzeLightcone(Common),
    /// DTWA against an exact oracle: contour shifts and relative errors
    Compare(Common),
    /// Light-cone exponent over a list of alphas
    Crossover(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; never changes results
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Dtwa(c) => ("dtwa", c),
            Command::OracleIsing(c) => ("oracle-ising", c),
            Command::OracleEd(c) => ("oracle-ed", c),
            Command::AnalyzeLightcone(c) => ("analyze-lightcone", c),
            Command::Compare(c) => ("compare", c),
            Command::Crossover(c) => ("crossover", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();
    let mut output = common.output.clone();
    let result = ExperimentConfig::load(&common.config).and_then(|mut config| {
        if let Some(seed) = common.seed {
            config.master_seed = seed;
        }
        let dir = common
            .output
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("results").join(name));
        config.output = Some(dir.clone());
        output = Some(dir.clone());
        execute(name, &config, common.workers, OutputDir::create(&dir)?)
    });
    match result {
        Ok(dir) => {
            println!(
                "{}",
                std::fs::read_to_string(dir.join("summary.txt"))
                    .unwrap_or_default()
                    .trim_end()
            );
            println!("results in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record =
                serde_json::to_string_pretty(&e.record()).expect("error record serializes");
            if let Some(dir) = output.filter(|d| d.is_dir()) {
                let _ = std::fs::write(dir.join("error.json"), &record);
            }
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(
    name: &str,
    config: &ExperimentConfig,
    workers: Option<usize>,
    mut out: OutputDir,
) -> Result<PathBuf, CliError> {
    let run = match name {
        "dtwa" => commands::run_single(config, Source::Dtwa, workers, &mut out)?,
        "oracle-ising" => commands::run_single(config, Source::OracleIsing, workers, &mut out)?,
        "oracle-ed" => commands::run_single(config, Source::OracleEd, workers, &mut out)?,
        "analyze-lightcone" => commands::analyze_lightcone(config, workers, &mut out)?,
        "compare" => commands::compare(config, workers, &mut out)?,
        _ => commands::crossover(config, workers, &mut out)?,
    };
    let dir = out.path().to_path_buf();
    out.finish(name, config, workers, run)?;
    Ok(dir)
}
