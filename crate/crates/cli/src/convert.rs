//! `convert`: circuit to einsum expression and operands.

use std::path::PathBuf;

use clap::Args;
use qcsim::frontend::circuit_to_einsum;
use serde_json::{json, Value};

use crate::input::{parse_target, CircuitArgs};
use crate::report::{CliResult, RunReport, Stopwatch};

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// `state`, `amplitude[:BITS]`, `rdm:Q,...`, `expectation:LABEL,...` or target JSON.
    #[arg(long, default_value = "amplitude")]
    pub target: String,
    /// Drop gates outside the reverse lightcone (rdm and expectation targets).
    #[arg(long)]
    pub lightcone: bool,
    /// Write the einsum document here as well.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// `{"expression", "operands": [{"shape", "data": [[re, im], ...]}]}`
pub fn run(args: &ConvertArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new(seed);
    let mut clock = Stopwatch::start();
    let c = clock.time("build", || args.circuit.build(seed))?;
    let target = parse_target(&args.target, c.num_qubits(), args.lightcone)?;
    let (expr, operands) = clock.time("convert", || circuit_to_einsum(&c, &target))?;
    let doc = json!({
        "expression": expr,
        "operands": operands
            .iter()
            .map(|t| json!({ "shape": t.extents(), "data": t.data().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>() }))
            .collect::<Vec<Value>>(),
    });
    if let Some(path) = &args.output {
        std::fs::write(path, serde_json::to_string(&doc)?)?;
    }
    report.counter("gates", c.len());
    report.counter("operands", operands.len());
    report.result("target", serde_json::to_value(&target)?);
    report.result("einsum", doc);
    report.timings = clock.finish();
    Ok(report)
}
