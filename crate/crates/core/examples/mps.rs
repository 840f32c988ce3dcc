//! Runs a random circuit as an MPS at several bond limits.

use qcsim::approx::{MpsState, SvdPolicy};
use qcsim::frontend::gen_qv;
use qcsim::statevec::StateVector;

fn main() -> qcsim::Result<()> {
    let gates = gen_qv(12, 8, 2)?.gates();
    let mut sv = StateVector::<f64>::zero(12)?;
    sv.apply_circuit(&gates)?;
    let exact = sv.logical_amplitudes();
    for d in [2, 4, 8, 16, 32, 64] {
        let mut m = MpsState::zero(12)?;
        m.apply_circuit(&gates, &SvdPolicy::max_extent(d))?;
        println!("D = {d:>2}: max bond {:>2}, fidelity {:.6}, discarded {:.2e}", m.max_bond(), m.fidelity(&exact)?, m.discarded_weight());
    }
    Ok(())
}
