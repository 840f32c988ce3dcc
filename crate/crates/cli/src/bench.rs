//! `bench`: fixed circuit suites across engines, one CSV row per run.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use qcsim::frontend::{gen_qaoa_maxcut, gen_qft, gen_qv, random_regular_graph, Circuit};
use qcsim::fusion::FusionConfig;
use serde::Serialize;

use crate::report::{digest, CliResult, RunReport, Stopwatch};
use crate::simulate::{run_engine, Engine, EngineOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Qft,
    Qv,
    Qaoa,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Suite::Qft, Suite::Qv, Suite::Qaoa])]
    pub suites: Vec<Suite>,
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 10, 12])]
    pub sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Engine::Sv, Engine::Mps, Engine::Tn])]
    pub engines: Vec<Engine>,
    /// Bond cap for the mps engine.
    #[arg(long, default_value_t = 64)]
    pub max_bond: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// One CSV row. Column order is the schema.
#[derive(Debug, Serialize)]
pub struct Row {
    pub circuit: String,
    pub n: usize,
    pub gates: usize,
    pub engine: String,
    pub config: String,
    pub fused_gates: Option<u64>,
    pub max_bond: Option<u64>,
    pub fidelity: f64,
    pub digest: String,
    pub wall_seconds: f64,
}

fn circuit(suite: Suite, n: usize, seed: u64) -> CliResult<(String, Circuit)> {
    Ok(match suite {
        Suite::Qft => ("qft".into(), gen_qft(n)?),
        Suite::Qv => ("qv".into(), gen_qv(n, n, seed)?),
        Suite::Qaoa => ("qaoa".into(), gen_qaoa_maxcut(&random_regular_graph(n, 3, seed)?, 2, None, seed)?),
    })
}

/// Runs the suites; returns the rows and the report (timing-free fields only
/// outside `timings`).
pub fn run(args: &BenchArgs, seed: u64, workers: usize) -> CliResult<(Vec<Row>, RunReport)> {
    let mut report = RunReport::new(seed);
    let mut clock = Stopwatch::start();
    let mut rows = Vec::new();
    for &suite in &args.suites {
        for &n in &args.sizes {
            let (name, c) = circuit(suite, n, seed)?;
            let reference = run_engine(&c, &options(Engine::Sv, None, workers, seed, args.max_bond), &[])?.state.expect("dense state");
            for &engine in &args.engines {
                let fusion = match engine {
                    Engine::Sv => Some(FusionConfig::default()),
                    // fused gates must fit in the local qubits
                    Engine::SvDist => {
                        let d = FusionConfig::default();
                        let local = n.saturating_sub(GLOBAL_BITS).max(1);
                        Some(FusionConfig::new(d.max_fused_gate_size.min(local), d.max_fused_diagonal_gate_size.min(local))?)
                    }
                    _ => None,
                };
                let opts = options(engine, fusion, workers, seed, args.max_bond);
                let start = Instant::now();
                let run = clock.time(&format!("{name}/{n}/{}", engine.name()), || run_engine(&c, &opts, &[]))?;
                let wall = start.elapsed().as_secs_f64();
                let state = run.state.expect("bench sizes expand to a dense state");
                let overlap: qcsim::C64 = reference.iter().zip(&state).map(|(a, b)| a.conj() * b).sum();
                let counter = |k: &str| run.counters.get(k).and_then(|v| v.as_u64());
                rows.push(Row {
                    circuit: name.clone(),
                    n,
                    gates: c.len(),
                    engine: engine.name().into(),
                    config: opts.describe(),
                    fused_gates: counter("fused_gates"),
                    max_bond: counter("max_bond"),
                    fidelity: overlap.norm_sqr() / qcsim::numeric::norm_squared(&state),
                    digest: digest(&state),
                    wall_seconds: wall,
                });
            }
        }
    }
    report.counter("rows", rows.len());
    report.result(
        "rows",
        rows.iter()
            .map(|r| serde_json::json!({ "circuit": r.circuit, "n": r.n, "gates": r.gates, "engine": r.engine, "config": r.config, "fidelity": r.fidelity, "digest": r.digest }))
            .collect::<Vec<_>>(),
    );
    report.timings = clock.finish();
    Ok((rows, report))
}

const GLOBAL_BITS: usize = 1;

fn options(engine: Engine, fusion: Option<FusionConfig>, workers: usize, seed: u64, max_bond: usize) -> EngineOptions {
    EngineOptions { engine, workers, global_bits: GLOBAL_BITS, fusion, max_bond: Some(max_bond), samples: 8, seed }
}

pub fn write_csv<W: std::io::Write>(rows: &[Row], w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
