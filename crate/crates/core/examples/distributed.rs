//! Simulates a QFT with the amplitudes split across workers and reports the traffic.

use qcsim::distsim::SegmentedStateVector;
use qcsim::frontend::gen_qft;

fn main() -> qcsim::Result<()> {
    let n = 16;
    let gates = gen_qft(n)?.gates();
    for global in 1..=3 {
        let mut s = SegmentedStateVector::<f64>::zero(n, global, 1 << global)?;
        s.run_circuit(&gates)?;
        let t = s.transfer_stats();
        println!(
            "{global} global qubits: {} reorders, {} amplitudes moved, {} between workers",
            t.num_reorders, t.amplitudes_moved, t.inter_worker_amplitudes
        );
    }
    Ok(())
}
