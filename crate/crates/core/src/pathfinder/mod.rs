//! Contraction path optimization and slicing.

mod graph;
mod greedy;
mod optimal;
mod partition;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tn::{kernel, ContractionTree, Label, Tensor, TensorNetwork, ELEMENT_BYTES};
use graph::{Graph, Merger};

pub use greedy::GreedyParams;
pub use optimal::MAX_OPTIMAL_TENSORS;
pub use partition::{PartitionParams, BUBBLING_HOTSPOTS, BUBBLING_PASSES};

/// Intermediates whose labels are considered when choosing a slice.
pub const SLICE_CANDIDATE_NODES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub num_hyper_samples: usize,
    /// Inclusive range of parts per partitioning level.
    pub partition_arity: (usize, usize),
    pub imbalance: (f64, f64),
    /// Inclusive range of exact-solve scope sizes in partition samples.
    pub leaf_cutoff: (usize, usize),
    pub greedy_weight: (f64, f64),
    pub greedy_temperature: (f64, f64),
    /// Largest per-slice intermediate in bytes; `None` is unbounded.
    pub memory_budget: Option<f64>,
    /// Samples whose slicing overhead exceeds this are used only if no sample
    /// stays within it.
    pub slicing_overhead_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            num_hyper_samples: 16,
            partition_arity: (2, 4),
            imbalance: (0.05, 0.5),
            leaf_cutoff: (6, 10),
            greedy_weight: (0.5, 1.5),
            greedy_temperature: (0.0, 1.0),
            memory_budget: None,
            slicing_overhead_tolerance: f64::INFINITY,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_hyper_samples == 0 {
            return bad("num_hyper_samples must be at least 1");
        }
        if self.partition_arity.0 < 2 || self.partition_arity.0 > self.partition_arity.1 {
            return bad("partition arity range must satisfy 2 <= lo <= hi");
        }
        if self.leaf_cutoff.0 < 1 || self.leaf_cutoff.0 > self.leaf_cutoff.1 || self.leaf_cutoff.1 > MAX_OPTIMAL_TENSORS {
            return bad("leaf cutoff range must lie in 1..=12");
        }
        if !(self.imbalance.0 >= 0.0 && self.imbalance.0 <= self.imbalance.1) {
            return bad("imbalance range must be non-negative and ordered");
        }
        if !(self.greedy_weight.0 <= self.greedy_weight.1) || !(0.0 <= self.greedy_temperature.0 && self.greedy_temperature.0 <= self.greedy_temperature.1) {
            return bad("greedy parameter ranges must be ordered");
        }
        if self.memory_budget.is_some_and(|b| b.is_nan() || b < 0.0) {
            return bad("memory budget must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    /// Tree with the chosen slices applied.
    pub tree: ContractionTree,
    /// Multiply-adds over all slices.
    pub total_flops: f64,
    /// Sliced labels and their extents.
    pub slices: Vec<(Label, usize)>,
    pub num_slices: f64,
    pub slicing_overhead_factor: f64,
    /// Largest per-slice intermediate, elements.
    pub largest_intermediate: f64,
    /// Which hyper-sample won.
    pub sample: usize,
}

impl OptimizerResult {
    /// `{pairs, sliced, flops, overhead}`.
    pub fn to_path_json(&self, tn: &TensorNetwork) -> serde_json::Value {
        serde_json::json!({
            "pairs": self.tree.pairs(),
            "sliced": self.slices.iter().map(|(l, _)| tn.label_name(*l)).collect::<Vec<_>>(),
            "flops": self.total_flops,
            "overhead": self.slicing_overhead_factor,
        })
    }
}

/// A network after pre-contractions whose results are no larger than their
/// larger operand.
#[derive(Debug, Clone)]
pub struct Simplified {
    /// Remaining tensors (data contracted when the input was bound).
    pub network: TensorNetwork,
    /// Pre-contractions as SSA pairs over the original tensors.
    pub pre: Vec<(usize, usize)>,
    /// SSA id, in the original numbering, of each remaining tensor.
    pub ids: Vec<usize>,
    num_original: usize,
}

impl Simplified {
    /// Maps pairs over the simplified network to a full path on the original.
    pub fn lift(&self, pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let m = self.ids.len();
        let base = self.num_original + self.pre.len();
        let map = |r: usize| if r < m { self.ids[r] } else { base + (r - m) };
        self.pre.iter().copied().chain(pairs.iter().map(|&(x, y)| (map(x), map(y)))).collect()
    }
}

fn simplify_pairs(g: &Graph) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut st = Merger::new(g);
    loop {
        let size = |st: &Merger, id: usize| g.size(st.live[id].as_ref().expect("live"));
        let mut cands = st.neighbor_pairs();
        let live = st.live_ids();
        if live.len() > 1 {
            for &s in live.iter().filter(|&&i| st.live[i].as_ref().is_some_and(|b| b.is_empty())) {
                if let Some(&o) = live.iter().filter(|&&o| o != s).min_by(|&&a, &&b| size(&st, a).total_cmp(&size(&st, b)).then(a.cmp(&b))) {
                    cands.push((s.min(o), s.max(o)));
                }
            }
        }
        let best = cands
            .into_iter()
            .filter_map(|(a, b)| {
                let r = g.size(&st.result_modes(a, b));
                (r <= size(&st, a).max(size(&st, b))).then_some((r, a, b))
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        match best {
            Some((_, a, b)) => {
                st.merge(a, b);
            }
            None => break,
        }
    }
    let live = st.live_ids();
    (st.pairs, live)
}

/// Repeatedly contracts pairs whose result is no larger than the larger
/// operand.
pub fn simplify(tn: &TensorNetwork) -> Result<Simplified> {
    simplify_impl(tn, true)
}

fn simplify_structure(tn: &TensorNetwork) -> Result<Simplified> {
    simplify_impl(tn, false)
}

fn simplify_impl(tn: &TensorNetwork, with_data: bool) -> Result<Simplified> {
    let g = Graph::from_network(tn);
    let (pre, ids) = simplify_pairs(&g);
    let n = tn.num_tensors();
    // node modes along the pre-contractions
    let mut modes: Vec<Vec<Label>> = tn.tensors().iter().map(|t| t.modes.clone()).collect();
    let mut data: Vec<Option<Tensor>> =
        if with_data && tn.is_bound() { (0..n).map(|i| tn.tensor(i).map(|v| Some(v.to_tensor()))).collect::<Result<_>>()? } else { vec![None; n] };
    let mut st = Merger::new(&g);
    for &(a, b) in &pre {
        let id = st.merge(a, b);
        let m: Vec<Label> = st.live[id].as_ref().expect("live").iter().map(|i| g.labels[i]).collect();
        let t = match (data[a].take(), data[b].take()) {
            (Some(x), Some(y)) => Some(kernel::contract_views(x.view(), y.view(), &m, kernel::KernelVariant::Direct)?),
            _ => None,
        };
        modes.push(m);
        data.push(t);
    }
    let mut net = TensorNetwork::new();
    for &id in &ids {
        let ext: Vec<usize> = modes[id].iter().map(|&l| tn.extent(l).expect("label")).collect();
        let d = data[id].take().map(Tensor::into_data);
        let new = net.add_tensor(modes[id].clone(), ext, d)?;
        if id < n && tn.is_constant(id) {
            net.mark_constant(&[new])?;
        }
    }
    for l in tn.labels() {
        net.set_name(l, tn.label_name(l));
    }
    if net.num_tensors() > 0 {
        net.set_output(tn.output().to_vec())?;
    }
    Ok(Simplified { network: net, pre, ids, num_original: n })
}

fn check_nonempty(tn: &TensorNetwork) -> Result<()> {
    if tn.num_tensors() == 0 {
        return Err(Error::InvalidArgument("network has no tensors".into()));
    }
    Ok(())
}

/// Greedy path over the simplified network, lifted back to `tn`.
pub fn greedy_path(tn: &TensorNetwork, params: GreedyParams, seed: u64) -> Result<ContractionTree> {
    check_nonempty(tn)?;
    let s = simplify_structure(tn)?;
    let g = Graph::from_network(&s.network);
    let pairs = greedy::greedy_pairs(&g, params, &mut ChaCha8Rng::seed_from_u64(seed));
    ContractionTree::new(tn, s.lift(&pairs))
}

/// Exact minimum-flop tree by subset DP; at most [`MAX_OPTIMAL_TENSORS`] tensors.
pub fn optimal_path(tn: &TensorNetwork) -> Result<ContractionTree> {
    check_nonempty(tn)?;
    if tn.num_tensors() > MAX_OPTIMAL_TENSORS {
        return Err(Error::InvalidArgument(format!("exact search supports at most {MAX_OPTIMAL_TENSORS} tensors")));
    }
    let (pairs, _) = optimal::optimal_pairs(&Graph::from_network(tn));
    ContractionTree::new(tn, pairs)
}

/// Tree from recursive k-way partitioning followed by bubbling.
pub fn partition_path(tn: &TensorNetwork, params: PartitionParams, seed: u64) -> Result<ContractionTree> {
    check_nonempty(tn)?;
    let g = Graph::from_network(tn);
    let pairs = partition_pairs(&g, &params, &mut ChaCha8Rng::seed_from_u64(seed));
    ContractionTree::new(tn, pairs)
}

fn partition_pairs(g: &Graph, params: &PartitionParams, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut b = partition::Builder::new(g);
    let scope: Vec<usize> = (0..g.items.len()).collect();
    let root = b.build(&scope, params, rng);
    b.bubble(root);
    b.pairs(root)
}

fn top_nodes(tree: &ContractionTree, k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (tree.num_leaves()..tree.nodes().len()).collect();
    ids.sort_by(|&a, &b| tree.node(b).size.total_cmp(&tree.node(a).size).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Greedily slices labels of the largest intermediates until every
/// per-slice intermediate fits in `memory_budget` bytes. Returns the sliced
/// tree and the overhead factor relative to `tree` unsliced.
pub fn select_slices(tn: &TensorNetwork, tree: &ContractionTree, memory_budget: f64) -> Result<(ContractionTree, f64)> {
    if memory_budget < ELEMENT_BYTES {
        return Err(Error::Infeasible { budget: memory_budget, achievable: ELEMENT_BYTES });
    }
    let base = tree.resliced(tn, Vec::new())?;
    let base_flops = base.total_flops(tn);
    let mut cur = tree.clone();
    while cur.largest_intermediate() * ELEMENT_BYTES > memory_budget {
        let top = top_nodes(&cur, SLICE_CANDIDATE_NODES);
        let mut cands: Vec<Label> = top.iter().flat_map(|&v| cur.node(v).modes.iter().copied()).collect();
        cands.sort_unstable();
        cands.dedup();
        let old_max = cur.largest_intermediate();
        let old_top: f64 = top.iter().map(|&v| cur.node(v).size).sum();
        let old_flops = cur.total_flops(tn);
        let mut best: Option<(f64, ContractionTree)> = None;
        for l in cands {
            let mut s = cur.sliced().to_vec();
            s.push(l);
            let t = cur.resliced(tn, s)?;
            let new_top: f64 = top.iter().map(|&v| t.node(v).size).sum();
            let reduction = (old_max - t.largest_intermediate()) + 1e-6 * (old_top - new_top);
            let added = (t.total_flops(tn) - old_flops).max(1.0);
            let score = reduction / added;
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, t));
            }
        }
        let Some((_, t)) = best else {
            return Err(Error::Infeasible { budget: memory_budget, achievable: old_max * ELEMENT_BYTES });
        };
        cur = t;
    }
    let overhead = if base_flops > 0.0 { cur.total_flops(tn) / base_flops } else { 1.0 };
    Ok((cur, overhead.max(1.0)))
}

enum Sample {
    Greedy(GreedyParams),
    Partition(PartitionParams),
}

fn draw_sample(cfg: &OptimizerConfig, i: usize) -> (Sample, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let sample = if i == 0 {
        Sample::Greedy(GreedyParams::default())
    } else if i % 2 == 1 {
        Sample::Partition(PartitionParams {
            arity: rng.random_range(cfg.partition_arity.0..=cfg.partition_arity.1),
            imbalance: uniform(&mut rng, cfg.imbalance),
            cutoff: rng.random_range(cfg.leaf_cutoff.0..=cfg.leaf_cutoff.1),
        })
    } else {
        Sample::Greedy(GreedyParams {
            weight: uniform(&mut rng, cfg.greedy_weight),
            temperature: uniform(&mut rng, cfg.greedy_temperature),
        })
    };
    (sample, rng)
}

/// Hyper-optimized path search. Sample 0 is [`greedy_path`] with default
/// parameters; later samples alternate partition-based searches on the full
/// network and randomized greedy searches on the simplified network. Each sample is sliced to the
/// budget and the cheapest sliced cost wins (ties by tree hash). Sample `i`
/// depends only on `(seed, i)`, so more samples never give a worse result.
pub fn find_path(tn: &TensorNetwork, cfg: &OptimizerConfig) -> Result<OptimizerResult> {
    cfg.validate()?;
    check_nonempty(tn)?;
    let simplified = simplify_structure(tn)?;
    let g_full = Graph::from_network(tn);
    let g_simple = Graph::from_network(&simplified.network);
    let evaluate = |i: usize| -> Result<(ContractionTree, f64, f64)> {
        let (sample, mut rng) = draw_sample(cfg, i);
        let pairs = match sample {
            Sample::Greedy(p) => simplified.lift(&greedy::greedy_pairs(&g_simple, p, &mut rng)),
            Sample::Partition(p) => partition_pairs(&g_full, &p, &mut rng),
        };
        let tree = ContractionTree::new(tn, pairs)?;
        match cfg.memory_budget {
            Some(b) => {
                let (t, o) = select_slices(tn, &tree, b)?;
                let f = t.total_flops(tn);
                Ok((t, f, o))
            }
            None => {
                let f = tree.total_flops(tn);
                Ok((tree, f, 1.0))
            }
        }
    };
    let results: Vec<Result<(ContractionTree, f64, f64)>> = (0..cfg.num_hyper_samples).into_par_iter().map(evaluate).collect();
    let mut ok = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        ok.push((i, r?));
    }
    let within = ok.iter().any(|(_, (_, _, o))| *o <= cfg.slicing_overhead_tolerance);
    let (sample, (tree, total_flops, overhead)) = ok
        .into_iter()
        .filter(|(_, (_, _, o))| !within || *o <= cfg.slicing_overhead_tolerance)
        .min_by(|(_, (ta, fa, _)), (_, (tb, fb, _))| fa.total_cmp(fb).then(ta.structure_hash().cmp(&tb.structure_hash())))
        .expect("at least one sample");
    Ok(OptimizerResult {
        slices: tree.sliced().iter().map(|&l| (l, tn.extent(l).expect("label"))).collect(),
        num_slices: tree.num_slices(tn),
        largest_intermediate: tree.largest_intermediate(),
        slicing_overhead_factor: overhead,
        total_flops,
        tree,
        sample,
    })
}

#[cfg(test)]
mod tests;
