//! Fuses a quantum-volume circuit and compares gate counts and results.

use qcsim::frontend::gen_qv;
use qcsim::fusion::{fuse, FusionConfig};
use qcsim::statevec::StateVector;

fn main() -> qcsim::Result<()> {
    let c = gen_qv(14, 14, 1)?;
    let gates = c.gates();
    let mut plain = StateVector::<f64>::zero(14)?;
    plain.apply_circuit(&gates)?;
    for (dense, diag) in [(2, 4), (3, 5), (4, 6)] {
        let fused = fuse(&gates, &FusionConfig::new(dense, diag)?);
        let mut sv = StateVector::<f64>::zero(14)?;
        sv.apply_circuit(&fused.gates)?;
        let diff = sv
            .logical_amplitudes()
            .iter()
            .zip(plain.logical_amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!("max size {dense}/{diag}: {} -> {} gates, max diff {diff:.1e}", gates.len(), fused.len());
    }
    Ok(())
}
