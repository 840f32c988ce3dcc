//! Compares greedy and hyper-optimized contraction paths on a random circuit.

use qcsim::frontend::{circuit_to_network, gen_rqc, ConversionTarget};
use qcsim::pathfinder::{find_path, greedy_path, OptimizerConfig};

fn main() -> qcsim::Result<()> {
    let c = gen_rqc(4, 4, 8, 3)?;
    let tn = circuit_to_network(&c, &ConversionTarget::amplitude(&"0".repeat(16)))?;
    let greedy = greedy_path(&tn, Default::default(), 0)?.total_flops(&tn);
    println!("{} tensors, greedy {greedy:.3e} flops", tn.num_tensors());
    for samples in [1, 8, 64] {
        let r = find_path(&tn, &OptimizerConfig { num_hyper_samples: samples, ..OptimizerConfig::default() })?;
        println!("{samples:>3} samples: {:.3e} flops, largest intermediate {:.0}", r.total_flops, r.largest_intermediate);
    }
    Ok(())
}
