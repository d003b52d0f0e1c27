use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use qkdfk_cli::check::run_checks;
use qkdfk_cli::config::{parse_paths, OutputFormat, SweepConfig};
use qkdfk_cli::output::{write_csv, write_json};
use qkdfk_cli::{run_sweep, RunOptions};
use qkdfk_core::protocols::{describe, CATALOG};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "qkdfk", version, about = "Certified finite-key rates for QKD protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Output file (stdout when absent and the config names none).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        /// Comma-separated entropy paths: vn, min or both.
        #[arg(long)]
        paths: Option<String>,
        /// Write every SDP in sparse text form to this directory.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
        /// Omit the wall-time column so output is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
        /// Exit with code 3 if any point fails to certify.
        #[arg(long)]
        strict: bool,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List the protocol catalog.
    Protocols,
    /// Run the built-in self-test corpus.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Protocols => {
            for name in CATALOG {
                println!("{name:<14} {}", describe(name).unwrap_or(""));
            }
            ExitCode::SUCCESS
        }
        Command::Check => {
            let results = run_checks();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Run { config, out, format, paths, dump_sdp, no_timing, strict, jobs } => {
            let mut cfg = match SweepConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let fmt = match format.as_deref().or(cfg.output.format.as_deref()).map(OutputFormat::parse).transpose() {
                Ok(f) => f.unwrap_or(OutputFormat::Csv),
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(p) = paths {
                match parse_paths(&p) {
                    Ok(p) => cfg.paths = p,
                    Err(e) => {
                        eprintln!("config error: {e}");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                }
            }
            let target = out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
            match run(&cfg, fmt, target, dump_sdp, !no_timing, jobs) {
                Ok(hard_failures) => {
                    if strict && hard_failures > 0 {
                        eprintln!("{hard_failures} point(s) failed to certify");
                        ExitCode::from(EXIT_SOLVER)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

fn run(
    cfg: &SweepConfig,
    fmt: OutputFormat,
    target: Option<PathBuf>,
    dump_sdp: Option<PathBuf>,
    timing: bool,
    jobs: usize,
) -> anyhow::Result<usize> {
    let rows = run_sweep(cfg, &RunOptions { threads: jobs, dump_sdp })?;
    let sink: Box<dyn Write> = match &target {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    };
    match fmt {
        OutputFormat::Csv => write_csv(&rows, timing, sink)?,
        OutputFormat::Json => write_json(&rows, timing, sink)?,
    }
    Ok(rows.iter().filter(|r| !r.certified).count())
}
