//! Converts a circuit to networks and contracts amplitudes, reduced density matrices and
//! expectations; the latter two are trimmed to their light cone.

use qcsim::exec::contract_network;
use qcsim::frontend::{circuit_to_einsum, circuit_to_network, gen_rqc, ConversionTarget};
use qcsim::pathfinder::OptimizerConfig;
use qcsim::statevec::PauliString;

fn main() -> qcsim::Result<()> {
    let c = gen_rqc(3, 3, 4, 9)?;
    let cfg = OptimizerConfig::default();
    let targets = [
        ("rdm of qubits 0,1", ConversionTarget::rdm(vec![0, 1], vec![])),
        ("<Z0 Z1>", ConversionTarget::expectation(vec![PauliString::from_label("ZZ", qcsim::C64::new(1.0, 0.0))?])),
    ];
    for (name, t) in targets {
        let full = circuit_to_network(&c, &t)?;
        let cone = circuit_to_network(&c, &t.clone().with_lightcone())?;
        let value = contract_network(&cone, &cfg)?;
        println!("{name}: {} tensors, {} in the light cone, first value {:.6}", full.num_tensors(), cone.num_tensors(), value.data()[0]);
    }
    let amp = contract_network(&circuit_to_network(&c, &ConversionTarget::amplitude("000000000"))?, &cfg)?;
    println!("<000000000|C|0> = {:.6}", amp.data()[0]);
    let (expr, ops) = circuit_to_einsum(&c, &ConversionTarget::amplitude("000000000"))?;
    println!("einsum over {} operands: {}...", ops.len(), &expr[..expr.len().min(60)]);
    Ok(())
}
