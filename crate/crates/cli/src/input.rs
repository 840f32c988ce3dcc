//! Circuit and network sources shared by the subcommands.

use std::path::PathBuf;

use clap::Args;
use qcsim::frontend::{circuit_to_network, gen_qaoa_maxcut, gen_qft, gen_qv, gen_rqc, random_regular_graph, Circuit, ConversionTarget};
use qcsim::statevec::PauliString;
use qcsim::tn::TensorNetwork;
use qcsim::C64;

use crate::report::{CliError, CliResult};

#[derive(Args, Debug, Clone)]
pub struct CircuitArgs {
    /// Generator (`qft`, `qv`, `qaoa`, `rqc`) or a circuit JSON file.
    #[arg(long)]
    pub circuit: Option<String>,
    /// Qubit count for generators.
    #[arg(long)]
    pub n: Option<usize>,
    /// Layers for `qv` (default `n`) or cycles for `rqc` (default 8).
    #[arg(long)]
    pub depth: Option<usize>,
    /// QAOA layers.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Degree of the random regular QAOA graph.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Grid rows for `rqc`.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Grid columns for `rqc`.
    #[arg(long)]
    pub cols: Option<usize>,
}

impl CircuitArgs {
    pub fn is_set(&self) -> bool {
        self.circuit.is_some()
    }

    pub fn build(&self, seed: u64) -> CliResult<Circuit> {
        let name = self.circuit.as_deref().ok_or_else(|| CliError::invalid("--circuit is required"))?;
        let n = || self.n.ok_or_else(|| CliError::invalid(format!("--n is required for the `{name}` generator")));
        let c = match name {
            "qft" => gen_qft(n()?)?,
            "qv" => {
                let n = n()?;
                gen_qv(n, self.depth.unwrap_or(n), seed)?
            }
            "qaoa" => gen_qaoa_maxcut(&random_regular_graph(n()?, self.degree, seed)?, self.p, None, seed)?,
            "rqc" => {
                let (rows, cols) = match (self.rows, self.cols) {
                    (Some(r), Some(c)) => (r, c),
                    _ => grid(n()?),
                };
                gen_rqc(rows, cols, self.depth.unwrap_or(8), seed)?
            }
            path => Circuit::from_json(&std::fs::read_to_string(path)?)?,
        };
        Ok(c)
    }
}

/// Most square `rows x cols` factorization of `n`.
fn grid(n: usize) -> (usize, usize) {
    let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n.is_multiple_of(*r)).last().unwrap_or(1);
    (rows, n / rows)
}

/// Parses a conversion target: `state`, `amplitude[:BITS]`, `rdm:Q,Q,...`,
/// `expectation:LABEL,LABEL,...` (dense Pauli labels, qubit 0 first, unit
/// coefficients) or a target JSON object.
pub fn parse_target(spec: &str, n: usize, lightcone: bool) -> CliResult<ConversionTarget> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let t = match kind {
        _ if spec.trim_start().starts_with('{') => serde_json::from_str(spec)?,
        "state" => ConversionTarget::state_vector(),
        "amplitude" if arg.is_empty() => ConversionTarget::amplitude(&"0".repeat(n)),
        "amplitude" => ConversionTarget::amplitude(arg),
        "rdm" => {
            let kept = arg
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.trim().parse::<usize>().map_err(|e| CliError::invalid(format!("bad qubit `{s}`: {e}"))))
                .collect::<CliResult<Vec<_>>>()?;
            ConversionTarget::rdm(kept, Vec::new())
        }
        "expectation" => {
            let terms = arg.split(',').map(|l| PauliString::from_label(l.trim(), C64::new(1.0, 0.0))).collect::<qcsim::Result<Vec<_>>>()?;
            ConversionTarget::expectation(terms)
        }
        _ => return Err(CliError::invalid(format!("unknown target `{spec}`"))),
    };
    Ok(if lightcone { t.with_lightcone() } else { t })
}

/// A network file, or a circuit converted for a target.
#[derive(Args, Debug, Clone)]
pub struct NetworkArgs {
    /// Tensor network JSON file.
    #[arg(long, conflicts_with = "circuit")]
    pub network: Option<PathBuf>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Conversion target for circuit input.
    #[arg(long, default_value = "amplitude")]
    pub target: String,
    /// Drop gates outside the reverse lightcone (rdm and expectation targets).
    #[arg(long)]
    pub lightcone: bool,
}

impl NetworkArgs {
    pub fn build(&self, seed: u64) -> CliResult<TensorNetwork> {
        match &self.network {
            Some(path) => {
                let mut tn = TensorNetwork::from_json(&std::fs::read_to_string(path)?)?;
                tn.resolve_data_refs(path.parent().unwrap_or(std::path::Path::new(".")))?;
                Ok(tn)
            }
            None if self.circuit.is_set() => {
                let c = self.circuit.build(seed)?;
                Ok(circuit_to_network(&c, &parse_target(&self.target, c.num_qubits(), self.lightcone)?)?)
            }
            None => Err(CliError::invalid("give --network or --circuit")),
        }
    }
}
