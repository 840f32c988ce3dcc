//! Re-contracts a network with one changing input and reuses the constant work.

use qcsim::exec::{contract, make_plan, SliceRange, WorkspaceArena};
use qcsim::frontend::{circuit_to_network, gen_qaoa_maxcut, random_regular_graph, ConversionTarget};
use qcsim::pathfinder::{find_path, OptimizerConfig};
use qcsim::C64;

fn main() -> qcsim::Result<()> {
    let g = random_regular_graph(10, 3, 1)?;
    let c = gen_qaoa_maxcut(&g, 2, None, 1)?;
    let mut tn = circuit_to_network(&c, &ConversionTarget::amplitude(&"0".repeat(10)))?;
    // tensor 0 is the initial state of qubit 0; everything else stays fixed
    let constant: Vec<usize> = (1..tn.num_tensors()).collect();
    tn.mark_constant(&constant)?;
    let plan = make_plan(&tn, &find_path(&tn, &OptimizerConfig::default())?)?;
    let mut arena = WorkspaceArena::for_plan(&plan);
    for k in 0..4 {
        let theta = k as f64 * 0.4;
        tn.bind(0, vec![C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)])?;
        arena.reset_counters();
        let amp = contract(&plan, &tn, &mut arena, SliceRange::full(&plan))?;
        println!("run {k}: amplitude {:.6}, {:.3e} flops", amp.data()[0], arena.flops_executed());
    }
    let s = arena.cache_stats();
    println!("cache: {} hits, {} recomputes, {} bytes", s.hits, s.recomputes, s.used_bytes);
    Ok(())
}
