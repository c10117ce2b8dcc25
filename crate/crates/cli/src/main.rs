use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qfrac_cli::{emit, run, Format, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qfrac", version, about = "Residual studies for quaternionic fractional calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
        /// Override the number of refinement levels.
        #[arg(long)]
        refine: Option<usize>,
        /// Override the corpus seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write measured wall times into the CSV instead of zeros.
        #[arg(long)]
        timings: bool,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let Command::Run { config, out, format, refine, seed, timings } = Cli::parse().command;
    let mut cfg = match ScenarioConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(r) = refine {
        cfg.quadrature.refine_levels = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let format = match format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    if let Err(e) = emit(&report, format, timings, &out) {
        eprintln!("cannot write {}: {e}", out.display());
        return ExitCode::from(2);
    }
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
