use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kerr_thermo_cli::config::Command;
use kerr_thermo_cli::{run, Invocation};

/// Run a Kerr-resonator thermometry scenario and write its data as CSV.
#[derive(Debug, Parser)]
#[command(name = "kerr-thermo", version)]
struct Cli {
    command: Command,
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset used as the base configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides the `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long, env = "KERR_THERMO_JOBS")]
    jobs: Option<usize>,
    /// Set a configuration key, as key=value or section.key=value.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation {
        command: cli.command,
        config: cli.config,
        preset: cli.preset,
        out: cli.out,
        jobs: cli.jobs,
        overrides: cli.overrides,
    };
    match run(&inv) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for c in &summary.checks {
                eprintln!("[{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.description);
            }
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
