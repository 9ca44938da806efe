use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parcon_cli::commands;
use parcon_cli::config::{self, HumCommandConfig};
use parcon_cli::report::OutputDir;
use parcon_cli::CliError;

/// Partial null controllability experiments for coupled parabolic systems.
#[derive(Parser)]
#[command(name = "parcon", version, about)]
struct Cli {
    /// Output directory for reports and data files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed recorded in reports and used by randomized experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Print the machine-readable summary to stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Algebraic rank verdicts for (A, B, p), optionally Gramian-checked.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Moment-method control synthesis with closed-loop verification.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Non-controllability certificate sweep.
    Witness {
        #[arg(long)]
        config: PathBuf,
    },
    /// Penalized-HUM mesh sweep.
    Hum {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Bundled experiment: figure1, figure2 or scalar.
        #[arg(long)]
        preset: Option<String>,
        /// Also write a gnuplot-ready data file.
        #[arg(long)]
        gnuplot: bool,
    },
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let out = OutputDir::new(&cli.out)?;
    match &cli.command {
        Command::Check { config } => {
            let mut cfg: config::CheckConfig = config::parse_config(&read_config(config)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let value = commands::cmd_check(&cfg, &out)?;
            let controllable = value["controllable"].as_bool().unwrap_or(false);
            eprintln!(
                "verdict: {} (rank {} of required {})",
                if controllable {
                    "controllable"
                } else {
                    "not controllable"
                },
                value["rank"],
                value["required"]
            );
            Ok(value)
        }
        Command::Synthesize { config } => {
            let mut cfg: config::SynthesizeConfig = config::parse_config(&read_config(config)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let value = commands::cmd_synthesize(&cfg, &out)?;
            eprintln!(
                "closed-loop residual {} (relative {}), gamma L2 norm {}",
                value["closed_loop_residual"], value["closed_loop_relative"], value["gamma_l2"]
            );
            Ok(value)
        }
        Command::Witness { config } => {
            let mut cfg: config::WitnessConfig = config::parse_config(&read_config(config)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let value = commands::cmd_witness(&cfg, &out)?;
            let report = &value["report"];
            eprintln!(
                "certificate {}: slope_A = {}, slope_pairing = {}, control-norm growth = {}",
                if report["valid"].as_bool().unwrap_or(false) {
                    "VALID"
                } else {
                    "INVALID"
                },
                report["slope_a"],
                report["slope_pairing"],
                report["divergence_factor"]
            );
            Ok(value)
        }
        Command::Hum {
            config,
            preset,
            gnuplot,
        } => {
            let mut cfg: HumCommandConfig = match (config, preset) {
                (Some(path), None) => config::parse_config(&read_config(path)?)?,
                (None, Some(name)) => HumCommandConfig::preset(name)?,
                _ => {
                    return Err(CliError::Input(
                        "hum needs exactly one of --config or --preset".into(),
                    ))
                }
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let value = commands::cmd_hum(&cfg, &out, cli.threads.max(1), *gnuplot)?;
            eprintln!(
                "sweep complete: min_F growth {}, slopes {}",
                value["min_f_growth"], value["slopes"]
            );
            Ok(value)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(value) => {
            if cli.json {
                println!("{value}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
