use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use echoheight_cli::scenario::{self, Scenario};
use echoheight_cli::{pipeline, report, sweep};

/// FMCW ground-multipath height estimation simulator.
#[derive(Parser)]
#[command(name = "echoheight", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its result tables.
    Run {
        /// Preset name (see `presets`) or path to a scenario TOML file.
        scenario: String,
        /// Override a scenario key, e.g. --set targets.0.height_m=1.5
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory for the CSV tables.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario once per value of one key and merge the results.
    Sweep {
        /// Preset name or path to a scenario TOML file.
        scenario: String,
        /// Key to sweep, e.g. radar.noise_power
        #[arg(long)]
        param: String,
        /// Comma-separated values; empty means no runs.
        #[arg(long, value_name = "V1,V2,...")]
        values: String,
        /// Override applied before the sweep, may repeat.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory for per-run tables and sweep.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in scenario presets.
    Presets {
        /// Print the full TOML of one preset.
        #[arg(long)]
        show: Option<String>,
    },
}

/// Exit code 1: the scenario (or an override) is invalid.
/// Exit code 2: the scenario is valid but the run or its IO failed.
fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("scenario error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("run failed: {e:#}");
            ExitCode::from(2)
        }
    }
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, set, out } => {
            let (_, plan) =
                scenario::load_plan(&scenario, &set).map_err(Failure::Validation)?;
            let outcome = pipeline::run(&plan).map_err(Failure::Runtime)?;
            report::write_run(&out, &outcome).map_err(Failure::Runtime)?;
            print!("{}", report::summarize(&outcome));
            println!("tables written to {}", out.display());
            Ok(())
        }
        Command::Sweep {
            scenario: name,
            param,
            values,
            set,
            out,
        } => {
            let mut tree = scenario::load_value(&name).map_err(Failure::Validation)?;
            for assignment in &set {
                scenario::apply_override(&mut tree, assignment).map_err(Failure::Validation)?;
            }
            // Validate the base scenario up front so a bad config fails
            // before any worker starts.
            Scenario::from_value(tree.clone())
                .and_then(|s| s.build())
                .map_err(Failure::Validation)?;
            let values = parse_values(&values).map_err(Failure::Validation)?;
            let outcomes =
                sweep::run_sweep(&tree, &param, &values, &out).map_err(Failure::Runtime)?;
            println!(
                "{} run(s) of {param} merged into {}",
                outcomes.len(),
                out.join("sweep.csv").display()
            );
            Ok(())
        }
        Command::Presets { show } => match show {
            None => {
                for (name, _) in scenario::PRESETS {
                    println!("{name}");
                }
                Ok(())
            }
            Some(name) => match scenario::PRESETS.iter().find(|(n, _)| *n == name) {
                Some((_, text)) => {
                    print!("{text}");
                    Ok(())
                }
                None => Err(Failure::Validation(anyhow::anyhow!(
                    "no preset named {name:?}"
                ))),
            },
        },
    }
}

fn parse_values(raw: &str) -> anyhow::Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| anyhow::anyhow!("sweep value {s:?}: {e}"))
        })
        .collect()
}
