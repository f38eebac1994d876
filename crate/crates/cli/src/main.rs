use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nematic_cli::commands::{env_output_root, output_dir};
use nematic_cli::{cmd_converge, cmd_run, cmd_sweep, cmd_verify, parse_config, Axis, CliError, RunConfig};
use nematic_core::stress::sigma_s;

/// Beris–Edwards Q-tensor flow simulator and verification suite.
#[derive(Parser)]
#[command(name = "nematic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write series.csv plus snapshots.
    Run { config: PathBuf },
    /// Run the identity checks; JSON report on stdout.
    Verify { config: PathBuf },
    /// Refinement study along one parameter axis.
    Converge {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
    },
    /// One run per value of a config key.
    Sweep {
        config: PathBuf,
        /// `section.key`
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let root = env_output_root();
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let summary = cmd_run(&cfg, &output_dir(&cfg, root.as_deref()))?;
            println!("{}", to_json(&summary));
        }
        Command::Verify { config } => {
            let cfg = load(&config)?;
            let report = cmd_verify(&cfg, sigma_s)?;
            let json = to_json(&report);
            let dir = output_dir(&cfg, root.as_deref());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("verify.json"), &json)?;
            println!("{json}");
            if !report.passed {
                return Err(CliError::Check(report.failed_names().join(", ")));
            }
        }
        Command::Converge { config, axis } => {
            let cfg = load(&config)?;
            let table = cmd_converge(&cfg, axis)?;
            let dir = output_dir(&cfg, root.as_deref());
            std::fs::create_dir_all(&dir)?;
            let csv = table.to_csv();
            let name = serde_json::to_value(axis).expect("axis serializes");
            std::fs::write(dir.join(format!("converge_{}.csv", name.as_str().unwrap_or("axis"))), &csv)?;
            print!("{csv}");
            if !table.monotone {
                return Err(CliError::Check("error ladder is not monotone".into()));
            }
        }
        Command::Sweep { config, key, values } => {
            let cfg = load(&config)?;
            let results = cmd_sweep(&cfg, &output_dir(&cfg, root.as_deref()), &key, &values)?;
            let mut worst: Option<CliError> = None;
            for (value, r) in results {
                match r {
                    Ok(s) => println!("{key}={value}: {} steps, final total {}", s.steps, s.final_total),
                    Err(e) => {
                        eprintln!("{key}={value}: {e}");
                        if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                            worst = Some(e);
                        }
                    }
                }
            }
            if let Some(e) = worst {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
