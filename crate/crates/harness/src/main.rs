use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robosac_harness::{Experiment, ExperimentSpec, HarnessError, OutputFormat};

#[derive(Parser)]
#[command(name = "robosac", version, about = "Seeded sampling-consensus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment spec; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the spec).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the spec; default `out/<subcommand>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    repeats: Option<u32>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Budget N per (eta, s) row, validated by unbudgeted sampling.
    ValidateBounds,
    /// Success rate and AP at sampling budgets 1, 3, 5, 7.
    Tradeoff,
    /// Attacker-ratio estimation over ratios 0 to 1.
    EstimateRatio,
    /// Dynamic vs static team vs temporal reference.
    Modes,
    /// Consensus threshold sweep across attack kinds.
    AblationEpsilon,
    /// Clean vs attacked d quantiles and the subtle-attack boundary.
    Calibrate,
}

impl Command {
    fn experiment(self) -> (Experiment, &'static str) {
        match self {
            Command::ValidateBounds => (Experiment::ValidateBounds, "validate-bounds"),
            Command::Tradeoff => (Experiment::Tradeoff, "tradeoff"),
            Command::EstimateRatio => (Experiment::EstimateRatio, "estimate-ratio"),
            Command::Modes => (Experiment::Modes, "modes"),
            Command::AblationEpsilon => (Experiment::AblationEpsilon, "ablation-epsilon"),
            Command::Calibrate => (Experiment::Calibrate, "calibrate"),
        }
    }
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let (experiment, name) = cli.command.experiment();
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec { name: name.into(), ..Default::default() },
    };
    if let Some(seed) = cli.seed {
        spec.scenario.rng_seed = seed;
    }
    if let Some(repeats) = cli.repeats {
        spec.repeats = repeats;
    }
    let out = cli.out.clone().or(spec.output_path.clone()).unwrap_or_else(|| PathBuf::from("out").join(name));
    let report = experiment.run(&spec)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    report.write(&out, format)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", out.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
