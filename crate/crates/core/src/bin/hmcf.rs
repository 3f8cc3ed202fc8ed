use clap::{Args, Parser, Subcommand};
use hmcf::config::{parse_config_with, Experiment};
use hmcf::experiments::{run_experiment, EXIT_CONFIG};
use hmcf::HmcfError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Hyperbolic mean curvature flow experiments.
///
/// Exit codes: 0 finished, 2 collapse detected, 3 curvature blow-up,
/// 64 configuration error, 1 any other failure.
#[derive(Parser)]
#[command(name = "hmcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve an analytic shape under the flow.
    Simulate(ConfigArgs),
    /// Integrate the radial reduction and report the collapse time.
    Oracle(ConfigArgs),
    /// Residuals of the curvature identities under refinement.
    Verify(ConfigArgs),
    /// Compare the extremal-surface system with the flow at small velocities.
    Minkowski(ConfigArgs),
    /// ε-scaling of graph perturbations of the flat plane.
    Stability(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (`key = value` lines); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set n=256`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Oracle(a) => (Experiment::Oracle, a),
        Command::Verify(a) => (Experiment::Verify, a),
        Command::Minkowski(a) => (Experiment::Minkowski, a),
        Command::Stability(a) => (Experiment::Stability, a),
    };
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config_with(&text, &args.set) {
        Ok(cfg) => cfg,
        Err(errs) => {
            for e in &errs.0 {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run_experiment(experiment, &cfg) {
        Ok(outcome) => {
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(HmcfError::Config(errs)) => {
            for e in &errs.0 {
                eprintln!("config error: {e}");
            }
            ExitCode::from(EXIT_CONFIG as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
