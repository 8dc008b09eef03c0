//! Command-line front end: run configured experiments, ingest measured CSI,
//! or execute the cross-module self-test.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csi_pla::harness::{emit_csv, ingest_csi, render_csv, run_experiment, selftest, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "csi-pla",
    about = "CSI-based physical-layer authentication simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and emit metrics CSV.
    Run {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sweep one axis: `snr=5,10,15`, `rate=0.1:0.4:0.1`, or `k=0:10:2`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Parse a CSV of complex snapshots (re, im interleaved per branch).
    Ingest {
        /// Path to the CSI file.
        #[arg(long)]
        file: PathBuf,
        /// Antenna branches per snapshot.
        #[arg(long)]
        nb: usize,
        /// Snapshots per authentication matrix (all rows if omitted).
        #[arg(long)]
        group: Option<usize>,
    },
    /// Run the built-in cross-module invariant checks.
    Selftest,
}

fn execute(cli: Cli) -> csi_pla::Result<()> {
    match cli.command {
        Command::Run { config, seed, out, sweep } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(sweep) = sweep {
                cfg.sweep = Some(sweep);
            }
            cfg.validate()?;
            let rows = run_experiment(&cfg)?;
            match out {
                Some(path) => {
                    emit_csv(&rows, &path)?;
                    eprintln!("wrote {} sweep point(s) to {}", rows.len(), path.display());
                }
                None => print!("{}", render_csv(&rows)),
            }
            Ok(())
        }
        Command::Ingest { file, nb, group } => {
            let matrices = ingest_csi(&file, nb, group)?;
            println!("ingested {} matrix(es) from {}", matrices.len(), file.display());
            for (i, m) in matrices.iter().enumerate() {
                println!("  matrix {i}: {} rows x {} branches", m.ns(), m.nb());
            }
            Ok(())
        }
        Command::Selftest => {
            for line in selftest()? {
                println!("{line}");
            }
            println!("selftest passed");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
