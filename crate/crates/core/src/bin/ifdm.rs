use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifdm::check::Suite;
use ifdm::commands;
use ifdm::io::RunConfig;
use ifdm::Error;

#[derive(Parser)]
#[command(name = "ifdm", version, about = "Forward and dual solvers for ideal field dislocation mechanics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario forward in time and write snapshots.
    Forward {
        #[arg(long)]
        config: PathBuf,
    },
    /// Maximize the dual objective for a base state and write the results.
    Dual {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an invariant suite: operators, algebra, mapping, dual or all.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Write the constant tables M and B as CSV.
    DumpTables {
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("IFDM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("IFDM_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, Error> {
    init_threads()?;
    match cli.command {
        Command::Forward { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = commands::run_forward(&cfg)?;
            println!(
                "forward: {} steps, {} snapshots, diagnostics in {}",
                out.steps,
                out.snapshots.len(),
                out.diagnostics.display()
            );
            Ok(0)
        }
        Command::Dual { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = commands::run_dual(&cfg)?;
            let grad = out.report.grad_norm.last().copied().unwrap_or(f64::NAN);
            println!(
                "dual: {} iterations, S = {:e}, |grad S| = {grad:e}, residual = {:e}, max |div v| = {:e}{}",
                out.report.iterations,
                out.objective,
                out.residual,
                out.div_v,
                if out.report.converged { "" } else { " (iteration limit reached)" }
            );
            Ok(0)
        }
        Command::Check { suite } => {
            let suite: Suite = suite.parse()?;
            let report = commands::run_check(suite);
            println!("{report}");
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::DumpTables { out } => {
            commands::dump_tables(&out)?;
            println!("tables written to {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
