use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use wegner_core::harness::{self, Plan, RunOptions};

/// Eigenvalue-concentration experiments for two particles in a random field.
#[derive(Debug, Parser)]
#[command(name = "wegner", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (does not change results).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: `output` of the config, else runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Re-render report.txt of a finished run from its records.
    Report { run_dir: PathBuf },
}

fn describe(plan: &Plan) -> String {
    match plan {
        Plan::OneVolume(c) => format!(
            "one-volume: {} samples, E = {}, {} half-widths",
            c.setup.samples,
            c.energy,
            c.setup.epsilons.len()
        ),
        Plan::TwoVolume(c) => {
            let (lo, hi) = c.window();
            format!(
                "two-volume: {} samples, J = [{lo}, {hi}], {} half-widths",
                c.setup.samples,
                c.setup.epsilons.len()
            )
        }
        Plan::FieldDiagnostics { samples, coefficients, .. } => {
            format!("field-diagnostics: {samples} samples, {coefficients} coefficients")
        }
        Plan::GeometryCheck { section, .. } => {
            format!("geometry-check: {} trials in d = {:?}", section.trials, section.dims)
        }
        Plan::Modulus { b, n_outer, n_inner, .. } => {
            format!("modulus: {} widths, {n_outer} outer x {n_inner} inner draws", b.len())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => harness::run(&config, &RunOptions { seed, workers, out })
            .with_context(|| format!("run of {} failed", config.display()))
            .map(|o| {
                print!("{}", o.report);
                eprintln!(
                    "wrote {} ({:.1} s, {} failed samples)",
                    o.out_dir.display(),
                    o.manifest.elapsed_seconds,
                    o.manifest.failed
                );
            }),
        Command::Validate { config } => harness::validate(&config)
            .with_context(|| format!("{} is invalid", config.display()))
            .map(|plan| println!("ok: {}", describe(&plan))),
        Command::Report { run_dir } => harness::rerender(&run_dir)
            .with_context(|| format!("cannot re-render {}", run_dir.display()))
            .map(|report| print!("{report}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
