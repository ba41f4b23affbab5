//! Experiment runner: sweeps SNR over a configured multipath scenario,
//! optimizes the transmit covariance at each point, validates against
//! Monte-Carlo and emits a machine-readable table.
//!
//! Exit codes: 0 on success, 1 when any sweep point failed to converge (or a
//! runtime error occurred), 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ergocap_cli::config::ExperimentConfig;
use ergocap_cli::experiment::{run_experiment, ExperimentOverrides};
use ergocap_cli::output::{emit, emit_qstar, format_csv, format_json};

#[derive(Parser)]
#[command(name = "ergocap", version, about = "MIMO transmit-covariance optimization sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the SNR sweep described by a TOML config file.
    Run {
        /// Scenario description (see configs/five_clusters.toml).
        config: PathBuf,
        /// Write the table here instead of the config's output_path/stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Monte-Carlo trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the SNR sweep, e.g. --snr=-5,0,5,10.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        /// Table format.
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Also write one optimizer document per sweep point, named
        /// `<prefix>.point<index>.json`.
        #[arg(long)]
        qstar: Option<PathBuf>,
        /// Write 0.0 in the timing column so output bytes are reproducible.
        #[arg(long)]
        no_timing: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output,
            seed,
            trials,
            snr,
            format,
            qstar,
            no_timing,
        } => {
            let config = match ExperimentConfig::load(&config) {
                Ok(config) => config,
                Err(err) => {
                    eprintln!("config error: {err:#}");
                    return ExitCode::from(2);
                }
            };
            let overrides = ExperimentOverrides {
                seed,
                trials,
                snr_db: snr,
                suppress_timing: no_timing,
            };
            let rows = match run_experiment(&config, &overrides) {
                Ok(rows) => rows,
                Err(err) => {
                    eprintln!("run failed: {err:#}");
                    return ExitCode::from(1);
                }
            };

            let text = match format {
                OutputFormat::Csv => format_csv(&rows, config.report_base),
                OutputFormat::Json => format_json(&rows, config.report_base),
            };
            let destination = output.or_else(|| config.output_path.clone());
            if let Err(err) = emit(&text, destination.as_deref()) {
                eprintln!("emit failed: {err:#}");
                return ExitCode::from(1);
            }
            if let Some(prefix) = qstar {
                for (index, row) in rows.iter().enumerate() {
                    let path = prefix.with_extension(format!("point{index}.json"));
                    if let Err(err) = emit_qstar(&row.result, &path) {
                        eprintln!("emit failed: {err:#}");
                        return ExitCode::from(1);
                    }
                }
            }

            let mut failed = false;
            for row in &rows {
                if !row.converged() {
                    eprintln!("sweep point at {} dB did not converge", row.snr_db);
                    failed = true;
                }
                if !row.passes_soft_checks() {
                    eprintln!("sweep point at {} dB failed soft invariants", row.snr_db);
                    failed = true;
                }
            }
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
