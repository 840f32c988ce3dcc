//! `simulate`: run a circuit on one engine.

use clap::{Args, ValueEnum};
use qcsim::approx::{MpsState, SvdPolicy};
use qcsim::distsim::SegmentedStateVector;
use qcsim::exec::contract_network;
use qcsim::frontend::{circuit_to_network, Circuit, ConversionTarget};
use qcsim::fusion::{fuse, FusionConfig};
use qcsim::numeric::{format_bits, parse_bits};
use qcsim::pathfinder::OptimizerConfig;
use qcsim::statevec::{Gate, StateVector};
use qcsim::C64;
use serde_json::{json, Map, Value};

use crate::input::CircuitArgs;
use crate::report::{complex_json, digest, CliError, CliResult, RunReport, Stopwatch};

/// Largest register held as a dense vector.
pub const MAX_DENSE_QUBITS: usize = 28;
/// Largest register `--verify` checks against the state-vector oracle.
pub const MAX_VERIFY_QUBITS: usize = 14;
/// Largest register whose full state the MPS and TN engines expand.
pub const MAX_EXPANDED_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Sv,
    SvDist,
    Mps,
    Tn,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Sv => "sv",
            Engine::SvDist => "sv-dist",
            Engine::Mps => "mps",
            Engine::Tn => "tn",
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,
    #[arg(long, value_enum, default_value_t = Engine::Sv)]
    pub engine: Engine,
    /// Compare against the state-vector oracle (n <= 14).
    #[arg(long)]
    pub verify: bool,
    /// Largest allowed `1 - fidelity` and amplitude deviation under `--verify`.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// Build and count the circuit without allocating a state.
    #[arg(long)]
    pub dry_run: bool,
    /// MPS bond cap; unbounded when absent.
    #[arg(long)]
    pub max_bond: Option<usize>,
    /// Global index bits for `sv-dist`.
    #[arg(long, default_value_t = 1)]
    pub global_bits: usize,
    /// Fuse gates up to this many qubits (sv engines; the other size defaults to 4 or 6).
    #[arg(long)]
    pub max_fused_gate_size: Option<usize>,
    /// Fuse diagonal gates up to this many qubits.
    #[arg(long)]
    pub max_fused_diagonal_gate_size: Option<usize>,
    /// Hyper-samples for the `tn` engine's path search.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    /// Amplitudes to report, as bit strings (qubit 0 last).
    #[arg(long, value_delimiter = ',')]
    pub amplitudes: Vec<String>,
}

/// Engine settings shared with `bench`.
#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub engine: Engine,
    pub workers: usize,
    pub global_bits: usize,
    pub fusion: Option<FusionConfig>,
    pub max_bond: Option<usize>,
    pub samples: usize,
    pub seed: u64,
}

impl EngineOptions {
    pub fn describe(&self) -> String {
        match self.engine {
            Engine::Sv | Engine::SvDist => {
                let mut s = match self.fusion {
                    Some(f) => format!("fusion={}/{}", f.max_fused_gate_size, f.max_fused_diagonal_gate_size),
                    None => "fusion=off".to_string(),
                };
                if self.engine == Engine::SvDist {
                    s += &format!(";global_bits={};workers={}", self.global_bits, self.workers);
                }
                s
            }
            Engine::Mps => format!("max_bond={}", self.max_bond.map_or("inf".to_string(), |d| d.to_string())),
            Engine::Tn => format!("samples={}", self.samples),
        }
    }
}

pub struct EngineRun {
    /// Full state, when the engine produced or could expand it.
    pub state: Option<Vec<C64>>,
    /// Requested amplitudes, in request order.
    pub amplitudes: Vec<C64>,
    pub counters: Map<String, Value>,
}

fn capacity(n: usize, limit: usize, what: &str) -> CliResult<()> {
    if n > limit {
        return Err(CliError::Infeasible(format!("{what} supports at most {limit} qubits, circuit has {n}")));
    }
    Ok(())
}

/// Runs `circuit` and returns the final state or the requested amplitudes.
pub fn run_engine(circuit: &Circuit, opts: &EngineOptions, requested: &[u64]) -> CliResult<EngineRun> {
    let n = circuit.num_qubits();
    let gates = circuit.gates();
    let mut counters = Map::new();
    counters.insert("gates".into(), json!(gates.len()));
    let pick = |state: &[C64]| requested.iter().map(|&i| state[i as usize]).collect::<Vec<_>>();
    let applied: Vec<Gate> = match (opts.engine, opts.fusion) {
        (Engine::Sv | Engine::SvDist, Some(cfg)) => {
            let f = fuse(&gates, &cfg);
            counters.insert("fused_gates".into(), json!(f.len()));
            f.gates
        }
        (_, Some(_)) => return Err(CliError::invalid("gate fusion applies to the sv and sv-dist engines")),
        _ => gates,
    };
    match opts.engine {
        Engine::Sv => {
            capacity(n, MAX_DENSE_QUBITS, "the sv engine")?;
            let mut sv = StateVector::<f64>::zero(n)?;
            sv.apply_circuit(&applied)?;
            let state = sv.logical_amplitudes();
            Ok(EngineRun { amplitudes: pick(&state), state: Some(state), counters })
        }
        Engine::SvDist => {
            capacity(n, MAX_DENSE_QUBITS, "the sv-dist engine")?;
            let mut ssv = SegmentedStateVector::<f64>::zero(n, opts.global_bits, opts.workers)?;
            ssv.run_circuit(&applied)?;
            let stats = ssv.transfer_stats();
            counters.insert("reorders".into(), json!(stats.num_reorders));
            counters.insert("amplitudes_moved".into(), json!(stats.amplitudes_moved));
            counters.insert("exchanges".into(), json!(stats.exchanges));
            counters.insert("inter_worker_amplitudes".into(), json!(stats.inter_worker_amplitudes));
            let state = ssv.to_state_vector().logical_amplitudes();
            Ok(EngineRun { amplitudes: pick(&state), state: Some(state), counters })
        }
        Engine::Mps => {
            let policy = opts.max_bond.map_or_else(SvdPolicy::exact, SvdPolicy::max_extent);
            let mut mps = MpsState::zero(n)?;
            mps.apply_circuit(&applied, &policy)?;
            counters.insert("max_bond".into(), json!(mps.max_bond()));
            counters.insert("discarded_weight".into(), json!(mps.discarded_weight()));
            let amplitudes = requested.iter().map(|&i| mps.amplitude(i)).collect();
            let state = (n <= MAX_EXPANDED_QUBITS).then(|| mps.to_statevector());
            Ok(EngineRun { state, amplitudes, counters })
        }
        Engine::Tn => {
            let cfg = OptimizerConfig { num_hyper_samples: opts.samples, seed: opts.seed, ..OptimizerConfig::default() };
            let mut amplitudes = Vec::with_capacity(requested.len());
            for &i in requested {
                let tn = circuit_to_network(circuit, &ConversionTarget::amplitude(&format_bits(i, n)))?;
                amplitudes.push(contract_network(&tn, &cfg)?.data()[0]);
            }
            let state = if requested.is_empty() {
                capacity(n, MAX_EXPANDED_QUBITS, "full-state tn contraction (use --amplitudes)")?;
                let tn = circuit_to_network(circuit, &ConversionTarget::state_vector())?;
                counters.insert("tensors".into(), json!(tn.num_tensors()));
                Some(contract_network(&tn, &cfg)?.into_data())
            } else {
                None
            };
            Ok(EngineRun { state, amplitudes, counters })
        }
    }
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let overlap: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    overlap.norm_sqr() / (na * nb)
}

/// Compares a run against the unfused state-vector result. Returns the
/// structured diff and whether it passed.
pub fn verify(circuit: &Circuit, run: &EngineRun, requested: &[u64], engine: Engine, tolerance: f64) -> CliResult<(Value, bool)> {
    let n = circuit.num_qubits();
    if n > MAX_VERIFY_QUBITS {
        return Ok((json!({ "skipped": format!("verification needs n <= {MAX_VERIFY_QUBITS}") }), true));
    }
    let mut sv = StateVector::<f64>::zero(n)?;
    sv.apply_circuit(&circuit.gates())?;
    let oracle = sv.logical_amplitudes();
    let (indices, actual): (Vec<u64>, Vec<C64>) = match &run.state {
        Some(s) => ((0..s.len() as u64).collect(), s.clone()),
        None => (requested.to_vec(), run.amplitudes.clone()),
    };
    let expected: Vec<C64> = indices.iter().map(|&i| oracle[i as usize]).collect();
    let (worst, max_diff) = actual
        .iter()
        .zip(&expected)
        .map(|(a, e)| (a - e).norm())
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    let fid = if run.state.is_some() { Some(fidelity(&expected, &actual)) } else { None };
    let fid_ok = fid.is_none_or(|f| 1.0 - f <= tolerance);
    let diff_ok = engine == Engine::Mps || max_diff <= tolerance;
    let passed = fid_ok && diff_ok;
    let mut diff = json!({
        "passed": passed,
        "tolerance": tolerance,
        "fidelity": fid,
        "max_abs_diff": max_diff,
        "compared": actual.len(),
    });
    if !passed {
        let idx = indices.get(worst).copied().unwrap_or(0);
        diff["worst"] = json!({
            "bits": format_bits(idx, n),
            "expected": complex_json(expected.get(worst).copied().unwrap_or_default()),
            "actual": complex_json(actual.get(worst).copied().unwrap_or_default()),
        });
    }
    Ok((diff, passed))
}

pub fn fusion_config(dense: Option<usize>, diagonal: Option<usize>) -> CliResult<Option<FusionConfig>> {
    if dense.is_none() && diagonal.is_none() {
        return Ok(None);
    }
    let d = FusionConfig::default();
    Ok(Some(FusionConfig::new(dense.unwrap_or(d.max_fused_gate_size), diagonal.unwrap_or(d.max_fused_diagonal_gate_size))?))
}

pub fn run(args: &SimulateArgs, seed: u64, workers: usize) -> CliResult<RunReport> {
    let mut report = RunReport::new(seed);
    report.engine = Some(args.engine.name().to_string());
    let mut clock = Stopwatch::start();
    let circuit = clock.time("build", || args.circuit.build(seed))?;
    let n = circuit.num_qubits();
    let opts = EngineOptions {
        engine: args.engine,
        workers,
        global_bits: args.global_bits,
        fusion: fusion_config(args.max_fused_gate_size, args.max_fused_diagonal_gate_size)?,
        max_bond: args.max_bond,
        samples: args.samples,
        seed,
    };
    report.result("config", opts.describe());
    report.counter("qubits", n);
    report.counter("gates", circuit.len());
    if args.dry_run {
        if let Some(cfg) = opts.fusion {
            let fused = clock.time("fuse", || fuse(&circuit.gates(), &cfg));
            report.counter("fused_gates", fused.len());
        }
        if matches!(args.engine, Engine::Sv | Engine::SvDist) {
            report.result("state_bytes", 16.0 * 2f64.powi(n as i32));
        }
        report.result("dry_run", true);
        report.timings = clock.finish();
        return Ok(report);
    }
    let requested = args.amplitudes.iter().map(|b| checked_bits(b, n)).collect::<CliResult<Vec<_>>>()?;
    let run = clock.time("simulate", || run_engine(&circuit, &opts, &requested))?;
    report.counters.extend(run.counters.clone());
    if let Some(state) = &run.state {
        report.result("norm_squared", qcsim::numeric::norm_squared(state));
        report.result("digest", digest(state));
    }
    if !requested.is_empty() {
        let amps: Map<String, Value> = args.amplitudes.iter().zip(&run.amplitudes).map(|(b, &z)| (b.clone(), complex_json(z))).collect();
        report.result("amplitudes", amps);
    }
    if args.verify {
        let (diff, passed) = clock.time("verify", || verify(&circuit, &run, &requested, args.engine, args.tolerance))?;
        report.result("verify", diff);
        report.verification_failed = !passed;
    }
    report.timings = clock.finish();
    Ok(report)
}

fn checked_bits(bits: &str, n: usize) -> CliResult<u64> {
    if bits.len() != n {
        return Err(CliError::invalid(format!("amplitude `{bits}` needs {n} bits")));
    }
    Ok(parse_bits(bits)?)
}
