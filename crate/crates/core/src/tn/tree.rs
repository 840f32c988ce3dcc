//! Contraction trees and the cost model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{kernel::pair_cost, Label, TensorNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairwiseCost {
    /// Complex multiply-adds: product of extents over the union of both operands' modes.
    pub flops: f64,
    /// Elements of the result.
    pub intermediate_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    /// Modes of this node's tensor in label order (sliced labels removed).
    pub modes: Vec<Label>,
    /// Elements per slice.
    pub size: f64,
    /// Zero for leaves.
    pub cost: PairwiseCost,
    pub children: Option<(usize, usize)>,
}

/// Binary contraction tree in single-assignment form: leaves are ids
/// `0..n`, and pair `k` produces node `n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTree {
    num_leaves: usize,
    pairs: Vec<(usize, usize)>,
    sliced: Vec<Label>,
    nodes: Vec<NodeInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeCost {
    /// Multiply-adds summed over every slice.
    pub total_flops: f64,
    /// Largest simultaneous live intermediate elements under the minimum-peak order.
    pub peak_intermediate_size: f64,
    pub largest_intermediate: f64,
    pub num_slices: f64,
}

impl ContractionTree {
    pub fn new(tn: &TensorNetwork, pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_sliced(tn, pairs, Vec::new())
    }

    pub fn with_sliced(tn: &TensorNetwork, pairs: Vec<(usize, usize)>, mut sliced: Vec<Label>) -> Result<Self> {
        let n = tn.num_tensors();
        if n == 0 {
            return Err(Error::TreeMismatch("network has no tensors".into()));
        }
        if pairs.len() + 1 != n {
            return Err(Error::TreeMismatch(format!("{} pairs for {n} tensors", pairs.len())));
        }
        sliced.sort_unstable();
        sliced.dedup();
        if let Some(l) = sliced.iter().find(|l| tn.extent(**l).is_none()) {
            return Err(Error::UnknownLabel(tn.label_name(*l)));
        }
        let total: BTreeMap<Label, usize> = tn.labels().map(|l| (l, tn.leg_count(l))).collect();
        let ext = |l: Label| tn.extent(l).expect("label in network");
        let mut used = vec![false; n + pairs.len()];
        let mut open: Vec<BTreeMap<Label, usize>> = Vec::with_capacity(n + pairs.len());
        let mut nodes = Vec::with_capacity(n + pairs.len());
        for slot in tn.tensors() {
            let modes: Vec<Label> = {
                let mut m: Vec<Label> = slot.modes.iter().copied().filter(|l| !sliced.contains(l)).collect();
                m.sort_unstable();
                m
            };
            let size = modes.iter().map(|&l| ext(l) as f64).product();
            open.push(slot.modes.iter().filter(|l| total[l] > 1).map(|&l| (l, 1)).collect());
            nodes.push(NodeInfo { modes, size, cost: PairwiseCost::default(), children: None });
        }
        for (k, &(x, y)) in pairs.iter().enumerate() {
            let id = n + k;
            for c in [x, y] {
                if c >= id || used[c] {
                    return Err(Error::TreeMismatch(format!("pair {k} reuses or forward-references node {c}")));
                }
                used[c] = true;
            }
            if x == y {
                return Err(Error::TreeMismatch(format!("pair {k} contracts node {x} with itself")));
            }
            let mut merged = open[x].clone();
            for (&l, &c) in &open[y] {
                *merged.entry(l).or_insert(0) += c;
            }
            merged.retain(|l, c| *c < total[l]);
            let modes: Vec<Label> = merged.keys().copied().filter(|l| !sliced.contains(l)).collect();
            let cost = pair_cost(&nodes[x].modes, &nodes[y].modes, &modes, ext);
            nodes.push(NodeInfo { size: cost.intermediate_size, modes, cost, children: Some((x, y)) });
            open.push(merged);
        }
        Ok(ContractionTree { num_leaves: n, pairs, sliced, nodes })
    }

    /// Same structure with a different slice set.
    pub fn resliced(&self, tn: &TensorNetwork, sliced: Vec<Label>) -> Result<Self> {
        Self::with_sliced(tn, self.pairs.clone(), sliced)
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn sliced(&self) -> &[Label] {
        &self.sliced
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NodeInfo {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        id < self.num_leaves
    }

    pub fn num_slices(&self, tn: &TensorNetwork) -> f64 {
        self.sliced.iter().map(|&l| tn.extent(l).unwrap_or(1) as f64).product()
    }

    /// Multiply-adds of one slice.
    pub fn slice_flops(&self) -> f64 {
        self.nodes.iter().map(|n| n.cost.flops).sum()
    }

    pub fn total_flops(&self, tn: &TensorNetwork) -> f64 {
        self.slice_flops() * self.num_slices(tn)
    }

    /// Largest internal-node size per slice (0 for a single tensor).
    pub fn largest_intermediate(&self) -> f64 {
        self.nodes[self.num_leaves..].iter().map(|n| n.size).fold(0.0, f64::max)
    }

    /// Leaves below `id`, in ascending order.
    pub fn leaves_under(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            match self.nodes[v].children {
                Some((x, y)) => stack.extend([x, y]),
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }

    /// Stable 64-bit FNV-1a digest of the structure, used for tie-breaking.
    pub fn structure_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.num_leaves as u64);
        for &(x, y) in &self.pairs {
            feed(x as u64);
            feed(y as u64);
        }
        for l in &self.sliced {
            feed(u64::from(l.0));
        }
        h
    }
}

/// Depth-first evaluation order minimizing the peak of simultaneously live
/// tensors, and that peak.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakOrder {
    /// Internal nodes in evaluation order.
    pub order: Vec<usize>,
    pub peak: f64,
}

/// At each node, evaluates whichever child first gives the smaller peak.
/// `leaf_size(i)` is the live size charged to leaf `i` (zero for inputs that
/// are read in place).
pub fn min_peak_order(tree: &ContractionTree, leaf_size: impl Fn(usize) -> f64) -> PeakOrder {
    let total = tree.nodes.len();
    let mut peak = vec![0.0; total];
    let mut size = vec![0.0; total];
    let mut left_first = vec![true; total];
    for v in 0..total {
        match tree.nodes[v].children {
            None => {
                size[v] = leaf_size(v);
                peak[v] = size[v];
            }
            Some((x, y)) => {
                size[v] = tree.nodes[v].size;
                let during = size[x] + size[y] + size[v];
                let xy = peak[x].max(size[x] + peak[y]).max(during);
                let yx = peak[y].max(size[y] + peak[x]).max(during);
                left_first[v] = xy <= yx;
                peak[v] = xy.min(yx);
            }
        }
    }
    let mut order = Vec::with_capacity(tree.pairs.len());
    // explicit post-order: (node, children pushed)
    let mut stack = vec![(tree.root(), false)];
    while let Some((v, expanded)) = stack.pop() {
        let Some((x, y)) = tree.nodes[v].children else { continue };
        if expanded {
            order.push(v);
        } else {
            let (first, second) = if left_first[v] { (x, y) } else { (y, x) };
            stack.push((v, true));
            stack.push((second, false));
            stack.push((first, false));
        }
    }
    PeakOrder { order, peak: peak[tree.root()] }
}

pub fn path_cost(tn: &TensorNetwork, tree: &ContractionTree) -> Result<TreeCost> {
    if tree.num_leaves != tn.num_tensors() {
        return Err(Error::TreeMismatch(format!("tree has {} leaves, network {} tensors", tree.num_leaves, tn.num_tensors())));
    }
    let po = min_peak_order(tree, |_| 0.0);
    Ok(TreeCost {
        total_flops: tree.total_flops(tn),
        peak_intermediate_size: po.peak,
        largest_intermediate: tree.largest_intermediate(),
        num_slices: tree.num_slices(tn),
    })
}
