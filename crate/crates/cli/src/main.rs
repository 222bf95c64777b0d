mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use queuetoll_core::scenario::Scenario;

use commands::{Failure, Flags};
use report::Status;

/// Optimal routing, selfish equilibria and Pigouvian admission prices for
/// multiclass customers at parallel queues.
#[derive(Parser)]
#[command(name = "queuetoll", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimise the social cost over routing matrices.
    Optimize(Common),
    /// Solve for the selfish equilibrium at the scenario's prices.
    Equilibrium(Common),
    /// Compute and certify Pigouvian prices for the scenario's routing.
    Prices(Common),
    /// Check the scenario's routing against the structure results.
    Verify(Common),
    /// Simulate the queues under the scenario's routing.
    Simulate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Write the machine-readable report here; the table still goes to stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Machine format. Without --out the report is printed in this format
    /// instead of the table.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the brute-force grid optimiser (optimize only).
    #[arg(long)]
    oracle: bool,
    /// Solve for the optimum instead of using the scenario's routing.
    #[arg(long)]
    solve: bool,
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut sc = Scenario::from_json(&text).map_err(|e| Failure::Invalid(e.to_string()))?.seeded();
    if let Some(s) = seed {
        sc.apply_seed(s);
    }
    Ok(sc)
}

fn run(cmd: Command) -> Result<Status, Failure> {
    let (args, which): (Common, fn(&Scenario, Flags) -> commands::Outcome) = match cmd {
        Command::Optimize(a) => (a, commands::optimize),
        Command::Equilibrium(a) => (a, |s, _| commands::equilibrium(s)),
        Command::Prices(a) => (a, commands::prices),
        Command::Verify(a) => (a, |s, _| commands::verify(s)),
        Command::Simulate(a) => (a, commands::simulate),
    };
    let sc = load(&args.scenario, args.seed)?;
    let flags = Flags {
        oracle: args.oracle,
        solve: args.solve,
    };
    let report = which(&sc, flags)?;
    let machine = |f: Format| -> Result<String, Failure> {
        match f {
            Format::Json => Ok(report.json_text() + "\n"),
            Format::Csv => report.csv().map_err(|e| Failure::Invalid(e.to_string())),
        }
    };
    match (&args.out, args.format) {
        (Some(path), f) => {
            let f = f.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => Format::Csv,
                _ => Format::Json,
            });
            std::fs::write(path, machine(f)?).map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report.human());
        }
        (None, Some(f)) => print!("{}", machine(f)?),
        (None, None) => print!("{}", report.human()),
    }
    Ok(report.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NoConvergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
