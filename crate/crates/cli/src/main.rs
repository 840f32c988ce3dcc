//! `qcsim`: simulation, path search, contraction, benchmarks and conversion.
//!
//! Exit codes: 0 success, 1 invalid input, 2 verification failure,
//! 3 infeasible size or memory budget.

mod bench;
mod convert;
mod input;
mod network;
mod report;
mod simulate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use report::{CliResult, RunReport};

#[derive(Parser, Debug)]
#[command(name = "qcsim", version, about = "State-vector and tensor-network circuit simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, global = true, env = "QCSIM_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a circuit on one engine.
    Simulate(simulate::SimulateArgs),
    /// Search a contraction path.
    Pathfind(network::PathfindArgs),
    /// Plan and contract a network.
    Contract(network::ContractArgs),
    /// Run the benchmark suites and emit CSV.
    Bench(bench::BenchArgs),
    /// Convert a circuit to an einsum expression with operands.
    Convert(convert::ConvertArgs),
}

fn emit(cli: &Cli, report: &RunReport) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report)?;
    match &cli.report {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<bool> {
    let report = match &cli.command {
        Command::Simulate(a) => simulate::run(a, cli.seed, cli.workers)?,
        Command::Pathfind(a) => network::pathfind(a, cli.seed)?,
        Command::Contract(a) => network::contract_cmd(a, cli.seed, cli.workers)?,
        Command::Convert(a) => convert::run(a, cli.seed)?,
        Command::Bench(a) => {
            let (rows, report) = bench::run(a, cli.seed, cli.workers)?;
            match &a.csv {
                Some(path) => bench::write_csv(&rows, std::fs::File::create(path)?)?,
                None => bench::write_csv(&rows, std::io::stdout())?,
            }
            if a.csv.is_none() && cli.report.is_none() {
                return Ok(true);
            }
            report
        }
    };
    emit(cli, &report)?;
    Ok(!report.verification_failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code())
        }
    }
}
