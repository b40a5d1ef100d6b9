use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fedv_runtime::bench::{self, BenchParams};
use fedv_runtime::experiment;
use fedv_runtime::synth::{self, Shape};
use fedv_runtime::RunConfig;

#[derive(Parser)]
#[command(name = "fedv", version, about = "Vertical federated learning simulator with functional encryption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a federated training experiment.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory for metrics, timings, batch log and model.
        #[arg(short, long, default_value = "fedv-run")]
        out: PathBuf,
    },
    /// Train the centralized plaintext baseline with the same seeds.
    Oracle {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Replay a finished run's batches through the plaintext gradient oracle.
    Verify {
        /// Directory written by `run`.
        #[arg(short, long)]
        run: PathBuf,
        /// Fail when the largest deviation exceeds this many codec units (1/sigma).
        #[arg(long)]
        max_ulps: Option<f64>,
    },
    /// Crypto microbenchmarks.
    Bench {
        #[arg(long, default_value_t = 64)]
        group_bits: u32,
        #[arg(long, default_value_t = 32)]
        vector_len: usize,
        #[arg(long, default_value_t = 50)]
        iterations: u32,
    },
    /// Write a synthetic dataset with a published table shape.
    Synth {
        shape: Shape,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let report = experiment::run_experiment(&cfg, Some(&out))?;
            print_json(&report)?;
        }
        Command::Oracle { config } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            print_json(&experiment::run_oracle(&cfg)?)?;
        }
        Command::Verify { run, max_ulps } => {
            let report = experiment::verify(&run)?;
            print_json(&report)?;
            if max_ulps.is_some_and(|m| report.max_deviation_in_ulps > m) {
                eprintln!(
                    "deviation {:.3} exceeds {} codec units",
                    report.max_deviation_in_ulps,
                    max_ulps.unwrap_or(0.0)
                );
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bench { group_bits, vector_len, iterations } => {
            let params = BenchParams { group_bits, vector_len, iterations, ..BenchParams::default() };
            for line in bench::run(&params)? {
                println!("{}", serde_json::to_string(&line)?);
            }
        }
        Command::Synth { shape, out, seed } => {
            synth::write(shape, seed, &out)?;
            let (train, test) = shape.split();
            eprintln!("wrote {} ({} rows; published split {train}/{test})", out.display(), shape.rows());
        }
    }
    Ok(ExitCode::SUCCESS)
}
