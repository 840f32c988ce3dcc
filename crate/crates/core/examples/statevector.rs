//! Runs a 20-qubit QFT on the state-vector engine and checks a Pauli expectation.

use qcsim::frontend::gen_qft;
use qcsim::statevec::{standard, PauliString, StateVector};

fn main() -> qcsim::Result<()> {
    let n = 20;
    let mut sv = StateVector::<f64>::zero(n)?;
    sv.apply_gate(&standard::x(3))?;
    let c = gen_qft(n)?;
    sv.apply_circuit(&c.gates())?;
    let amps = sv.logical_amplitudes();
    println!("{} gates, norm^2 = {:.12}", c.len(), amps.iter().map(|z| z.norm_sqr()).sum::<f64>());
    println!("|amp[0]|^2 = {:.3e} (uniform is {:.3e})", amps[0].norm_sqr(), 1.0 / (1u64 << n) as f64);
    let z0 = PauliString::from_label("Z", qcsim::C64::new(1.0, 0.0))?;
    println!("<Z0> = {:.6}", sv.expectation_pauli(&[z0])?.re);
    Ok(())
}
