mod config;
mod input;
mod render;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ordprop::{analyze, run_study, BoundaryPolicy, MvnOptions};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ordprop",
    version,
    about = "Order-restricted comparisons of proportions against a control (odds ratio scale)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    Haldane,
    Reject,
    Unbounded,
}

impl From<Boundary> for BoundaryPolicy {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Haldane => BoundaryPolicy::Haldane,
            Boundary::Reject => BoundaryPolicy::Reject,
            Boundary::Unbounded => BoundaryPolicy::Unbounded,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Dunnett, Williams and both closed testing variants for one dataset
    Analyze {
        /// CSV with columns dose,n,responders (control first)
        #[arg(long, required_unless_present = "counts", conflicts_with = "counts")]
        input: Option<PathBuf>,
        /// Inline counts `n:responders,...`, control first
        #[arg(long)]
        counts: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Seed for the multivariate normal integration
        #[arg(long, default_value_t = MvnOptions::default().seed)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Boundary::Haldane)]
        boundary: Boundary,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Monte Carlo power and FWER for the scenarios in a TOML config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (0 = all cores); results do not depend on it
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Write the report here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

fn numerical(e: ordprop::Error) -> Failure {
    match e {
        ordprop::Error::InvalidData(_) | ordprop::Error::InvalidScenario(_) => Failure::Input(e.into()),
        _ => Failure::Numerical(e.into()),
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            input,
            counts,
            alpha,
            seed,
            boundary,
            format,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Failure::Input(anyhow::anyhow!("--alpha must be in (0, 1), got {alpha}")));
            }
            let data = match (input, counts) {
                (Some(path), _) => input::read_csv(&path),
                (None, Some(c)) => input::parse_inline(&c),
                (None, None) => unreachable!("clap requires one input"),
            }
            .map_err(Failure::Input)?;
            let result = analyze(&data, boundary.into(), alpha, &MvnOptions::with_seed(seed))
                .map_err(numerical)?;
            let text = match format {
                Format::Table => render::analysis_table(&data, &result),
                Format::Json => render::analysis_json(&data, &result),
            };
            emit(&text, None).map_err(Failure::Input)
        }
        Command::Simulate {
            config,
            parallelism,
            format,
            output,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read {}", config.display()))
                .map_err(Failure::Input)?;
            let study = config::parse_config(&text)
                .with_context(|| format!("in {}", config.display()))
                .map_err(Failure::Input)?;
            let results = run_study(&study.scenarios, study.master_seed, parallelism).map_err(numerical)?;
            for (i, r) in results.iter().enumerate() {
                eprintln!(
                    "scenario {}: {} replicates in {:.2}s ({} boundary-corrected, {} failed)",
                    i + 1,
                    r.scenario.replicates,
                    r.elapsed.as_secs_f64(),
                    r.corrected_replicates,
                    r.failed_replicates
                );
            }
            let text = match format {
                Format::Table => render::study_table(&study.labels, &results),
                Format::Json => render::study_json(study.master_seed, &study.labels, &results),
            };
            emit(&text, output.as_ref()).map_err(Failure::Input)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
