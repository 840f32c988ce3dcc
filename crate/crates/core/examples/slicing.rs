//! Contracts a network under a memory budget, slice by slice and across workers.

use qcsim::exec::{contract, contract_distributed, make_plan, SliceRange, WorkspaceArena};
use qcsim::frontend::{circuit_to_network, gen_qv, ConversionTarget};
use qcsim::pathfinder::{find_path, OptimizerConfig};

fn main() -> qcsim::Result<()> {
    let c = gen_qv(12, 12, 4)?;
    let tn = circuit_to_network(&c, &ConversionTarget::state_vector())?;
    let free = find_path(&tn, &OptimizerConfig::default())?;
    let budget = free.largest_intermediate * 16.0 / 8.0;
    let r = find_path(&tn, &OptimizerConfig { memory_budget: Some(budget), ..OptimizerConfig::default() })?;
    println!("{} slices, overhead {:.2}x", r.num_slices, r.slicing_overhead_factor);

    let plan = make_plan(&tn, &r)?;
    let mut arena = WorkspaceArena::for_plan(&plan);
    let whole = contract(&plan, &tn, &mut arena, SliceRange::full(&plan))?;
    let mut arenas = Vec::new();
    let parallel = contract_distributed(&plan, &tn, &mut arenas, 4)?;
    println!("norm^2 {:.12}, identical across workers: {}", whole.data().iter().map(|z| z.norm_sqr()).sum::<f64>(), whole.data() == parallel.data());
    Ok(())
}
