use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riemap_cli::{builtin, load, run_scenario, trace_scenario, write_outputs, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "riemap", version, about = "Numerical checks of Clairaut Riemannian map theorems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of a scenario file or builtin scenario.
    Run {
        scenario: String,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Default residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the metric text exactly as printed, marking the run nonconformant.
        #[arg(long)]
        literal_metric: bool,
    },
    /// List builtin scenarios.
    List,
    /// Print one geodesic of a scenario as CSV.
    Trace {
        scenario: String,
        geodesic: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        literal_metric: bool,
    },
}

fn input_error(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in builtin::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Trace { scenario, geodesic, seed, literal_metric } => {
            let opts = RunOptions { tolerance: None, seed, literal_metric };
            match load(&scenario).and_then(|s| trace_scenario(&s, &geodesic, &opts)) {
                Ok(csv) => {
                    // a closed pipe (e.g. `| head`) is not an error
                    let _ = std::io::stdout().lock().write_all(csv.as_bytes());
                    ExitCode::SUCCESS
                }
                Err(e) => input_error(e),
            }
        }
        Command::Run { scenario, out, tol, seed, literal_metric } => {
            let opts = RunOptions { tolerance: tol, seed, literal_metric };
            let parsed = match load(&scenario) {
                Ok(s) => s,
                Err(e) => return input_error(e),
            };
            let (report, curves) = match run_scenario(&parsed, &opts) {
                Ok(r) => r,
                Err(e) => return input_error(e),
            };
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&parsed.name));
            if let Err(e) = write_outputs(&dir, &report, &curves, &parsed) {
                return input_error(e);
            }
            for check in &report.checks {
                for e in &check.reports {
                    let mark = if e.met { "ok  " } else { "FAIL" };
                    println!("{mark} {:<28} {:<26} {:<20} {}", check.block, e.report.name, e.report.verdict.as_str(), e.report.anchor);
                    if let Some(err) = &e.report.error {
                        println!("       error: {err}");
                    }
                }
            }
            if report.nonconformant {
                println!("note: nonconformant run (literal metric)");
            }
            println!(
                "{}: {} reports, {} unmet; report written to {}",
                report.scenario,
                report.summary.reports,
                report.summary.unmet,
                dir.join("report.json").display()
            );
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
