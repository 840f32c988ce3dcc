//! Recursive hypergraph partitioning with subtree bubbling.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Bits, Graph};
use super::greedy::{greedy_pairs, GreedyParams};
use super::optimal::{optimal_pairs, MAX_OPTIMAL_TENSORS};

/// Subtrees re-optimized per bubbling pass.
pub const BUBBLING_HOTSPOTS: usize = 5;
pub const BUBBLING_PASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    /// Parts per recursion level.
    pub arity: usize,
    /// Allowed part size excess over `n / arity`, as a fraction.
    pub imbalance: f64,
    /// Scopes at or below this many tensors are solved exactly.
    pub cutoff: usize,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams { arity: 2, imbalance: 0.2, cutoff: 8 }
    }
}

#[derive(Debug, Clone)]
struct Node {
    children: Option<(usize, usize)>,
    modes: Bits,
    /// (label, occurrences inside) for labels still open.
    open: Vec<(usize, usize)>,
    flops: f64,
}

pub(crate) struct Builder<'g> {
    g: &'g Graph,
    total: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'g> Builder<'g> {
    pub fn new(g: &'g Graph) -> Self {
        let total = g.counts();
        let nodes = g
            .items
            .iter()
            .map(|b| Node {
                children: None,
                modes: b.clone(),
                open: b.iter().filter(|&l| total[l] > 1).map(|l| (l, 1)).collect(),
                flops: 0.0,
            })
            .collect();
        Builder { g, total, nodes }
    }

    fn merge_open(&self, a: &[(usize, usize)], b: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (l, c) = match (a.get(i), b.get(j)) {
                (Some(&(la, ca)), Some(&(lb, cb))) if la == lb => {
                    i += 1;
                    j += 1;
                    (la, ca + cb)
                }
                (Some(&(la, ca)), Some(&(lb, _))) if la < lb => {
                    i += 1;
                    (la, ca)
                }
                (Some(&(la, ca)), None) => {
                    i += 1;
                    (la, ca)
                }
                (_, Some(&(lb, cb))) => {
                    j += 1;
                    (lb, cb)
                }
                (None, None) => unreachable!(),
            };
            if c < self.total[l] {
                out.push((l, c));
            }
        }
        out
    }

    fn join(&mut self, a: usize, b: usize) -> usize {
        let open = self.merge_open(&self.nodes[a].open, &self.nodes[b].open);
        let mut modes = Bits::empty(self.g.words());
        open.iter().for_each(|&(l, _)| modes.set(l));
        let flops = self.g.size(&self.nodes[a].modes.or(&self.nodes[b].modes));
        self.nodes.push(Node { children: Some((a, b)), modes, open, flops });
        self.nodes.len() - 1
    }

    /// Labels needed outside the union of `roots`' leaves.
    fn exterior(&self, roots: &[usize]) -> Bits {
        let mut open: Vec<(usize, usize)> = Vec::new();
        for &r in roots {
            open = self.merge_open(&open, &self.nodes[r].open);
        }
        let mut b = Bits::empty(self.g.words());
        open.iter().for_each(|&(l, _)| b.set(l));
        b
    }

    /// Contracts the subtrees `roots` into one, exactly when small enough.
    fn combine(&mut self, roots: &[usize]) -> usize {
        if roots.len() == 1 {
            return roots[0];
        }
        let sub = self.g.sub(roots.iter().map(|&r| self.nodes[r].modes.clone()).collect(), self.exterior(roots));
        let pairs = if roots.len() <= MAX_OPTIMAL_TENSORS {
            optimal_pairs(&sub).0
        } else {
            greedy_pairs(&sub, GreedyParams::default(), &mut ChaCha8Rng::seed_from_u64(0))
        };
        self.graft(roots, &pairs)
    }

    /// Appends joins for SSA `pairs` over `roots`; returns the final node.
    fn graft(&mut self, roots: &[usize], pairs: &[(usize, usize)]) -> usize {
        let mut ids = roots.to_vec();
        for &(x, y) in pairs {
            let j = self.join(ids[x], ids[y]);
            ids.push(j);
        }
        *ids.last().expect("non-empty")
    }

    pub fn build(&mut self, scope: &[usize], params: &PartitionParams, rng: &mut ChaCha8Rng) -> usize {
        if scope.len() <= params.cutoff.clamp(1, MAX_OPTIMAL_TENSORS) {
            return self.combine(scope);
        }
        let comps = components(self.g, scope);
        if comps.len() > 1 {
            let roots: Vec<usize> = comps.iter().map(|c| self.build(c, params, rng)).collect();
            return self.combine(&roots);
        }
        let k = params.arity.clamp(2, MAX_OPTIMAL_TENSORS).min(scope.len());
        let parts = partition(self.g, scope, k, params.imbalance, rng);
        let roots: Vec<usize> = parts.iter().map(|p| self.build(p, params, rng)).collect();
        self.combine(&roots)
    }

    fn reachable(&self, root: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            seen[v] = true;
            if let Some((x, y)) = self.nodes[v].children {
                stack.extend([x, y]);
            }
        }
        seen
    }

    /// Re-solves the most expensive subtrees exactly over a frontier of at
    /// most `MAX_OPTIMAL_TENSORS` nodes.
    pub fn bubble(&mut self, root: usize) {
        for _ in 0..BUBBLING_PASSES {
            let seen = self.reachable(root);
            let mut hot: Vec<usize> = (0..self.nodes.len()).filter(|&v| seen[v] && self.nodes[v].children.is_some()).collect();
            hot.sort_by(|&a, &b| self.nodes[b].flops.total_cmp(&self.nodes[a].flops).then(a.cmp(&b)));
            hot.truncate(BUBBLING_HOTSPOTS);
            for v in hot {
                if self.reachable(root)[v] {
                    self.reoptimize(v);
                }
            }
        }
    }

    fn reoptimize(&mut self, v: usize) {
        let (x, y) = self.nodes[v].children.expect("internal");
        let mut frontier = vec![x, y];
        let mut old = self.nodes[v].flops;
        while frontier.len() < MAX_OPTIMAL_TENSORS {
            let pick = frontier
                .iter()
                .enumerate()
                .filter(|(_, &f)| self.nodes[f].children.is_some())
                .max_by(|(_, &a), (_, &b)| self.nodes[a].flops.total_cmp(&self.nodes[b].flops).then(b.cmp(&a)));
            let Some((i, &f)) = pick else { break };
            let (a, b) = self.nodes[f].children.expect("internal");
            old += self.nodes[f].flops;
            frontier.swap_remove(i);
            frontier.extend([a, b]);
        }
        frontier.sort_unstable();
        let sub = self.g.sub(frontier.iter().map(|&r| self.nodes[r].modes.clone()).collect(), self.nodes[v].modes.clone());
        let (pairs, new) = optimal_pairs(&sub);
        if new < old * (1.0 - 1e-12) {
            let (last, init) = pairs.split_last().expect("frontier has two nodes");
            let mut ids = frontier.clone();
            for &(p, q) in init {
                let j = self.join(ids[p], ids[q]);
                ids.push(j);
            }
            let (p, q) = *last;
            self.nodes[v].children = Some((ids[p], ids[q]));
            self.nodes[v].flops = self.g.size(&self.nodes[ids[p]].modes.or(&self.nodes[ids[q]].modes));
        }
    }

    /// SSA pairs over the leaf items, in post-order from `root`.
    pub fn pairs(&self, root: usize) -> Vec<(usize, usize)> {
        let n = self.g.items.len();
        let mut out = Vec::new();
        let mut ssa = vec![usize::MAX; self.nodes.len()];
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            match self.nodes[v].children {
                None => ssa[v] = v,
                Some((x, y)) if expanded => {
                    out.push((ssa[x], ssa[y]));
                    ssa[v] = n + out.len() - 1;
                }
                Some((x, y)) => {
                    stack.push((v, true));
                    stack.push((y, false));
                    stack.push((x, false));
                }
            }
        }
        out
    }
}

/// Hyperedges with at least two pins inside `scope`: (weight, local pins).
fn hyperedges(g: &Graph, scope: &[usize]) -> Vec<(f64, Vec<usize>)> {
    let mut pins: Vec<Vec<usize>> = vec![Vec::new(); g.labels.len()];
    for (local, &item) in scope.iter().enumerate() {
        g.items[item].iter().for_each(|l| pins[l].push(local));
    }
    pins.into_iter()
        .enumerate()
        .filter(|(_, p)| p.len() >= 2)
        .map(|(l, p)| (g.extent[l].log2().max(0.0), p))
        .collect()
}

fn components(g: &Graph, scope: &[usize]) -> Vec<Vec<usize>> {
    let n = scope.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (_, pins) in hyperedges(g, scope) {
        for w in pins.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(scope[i]);
    }
    groups
}

/// k-way partition of a connected `scope` minimizing the connectivity cut
/// `sum w * (parts touched - 1)`: region-growing starts refined by greedy
/// single-vertex moves, best of several tries.
fn partition(g: &Graph, scope: &[usize], k: usize, imbalance: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    const TRIES: usize = 4;
    const PASSES: usize = 8;
    let n = scope.len();
    let edges = hyperedges(g, scope);
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, (_, pins)) in edges.iter().enumerate() {
        pins.iter().for_each(|&v| incident[v].push(e));
    }
    let max_part = ((n as f64 / k as f64) * (1.0 + imbalance)).ceil().max(1.0) as usize;
    let target = n.div_ceil(k);
    let cut_of = |assign: &[usize]| -> f64 {
        edges
            .iter()
            .map(|(w, pins)| {
                let mut touched: Vec<usize> = pins.iter().map(|&v| assign[v]).collect();
                touched.sort_unstable();
                touched.dedup();
                w * (touched.len() - 1) as f64
            })
            .sum()
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..TRIES {
        let mut assign = vec![usize::MAX; n];
        let mut sizes = vec![0usize; k];
        for p in 0..k {
            let free: Vec<usize> = (0..n).filter(|&v| assign[v] == usize::MAX).collect();
            let Some(&seed) = free.choose(rng) else { break };
            let mut queue = std::collections::VecDeque::from([seed]);
            while let Some(v) = queue.pop_front() {
                if assign[v] != usize::MAX || sizes[p] >= target {
                    continue;
                }
                assign[v] = p;
                sizes[p] += 1;
                for &e in &incident[v] {
                    queue.extend(edges[e].1.iter().copied().filter(|&u| assign[u] == usize::MAX));
                }
            }
        }
        for v in 0..n {
            if assign[v] == usize::MAX {
                let p = (0..k).min_by_key(|&p| (sizes[p], p)).expect("k >= 1");
                assign[v] = p;
                sizes[p] += 1;
            }
        }
        let mut pin_count: Vec<Vec<usize>> = edges
            .iter()
            .map(|(_, pins)| {
                let mut c = vec![0usize; k];
                pins.iter().for_each(|&v| c[assign[v]] += 1);
                c
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..PASSES {
            order.shuffle(rng);
            let mut moved = false;
            for &v in &order {
                let p = assign[v];
                if sizes[p] <= 1 {
                    continue;
                }
                let leave_gain: f64 = incident[v].iter().filter(|&&e| pin_count[e][p] == 1).map(|&e| edges[e].0).sum();
                let mut best_q = None;
                let mut best_gain = 0.0;
                for q in (0..k).filter(|&q| q != p && sizes[q] < max_part) {
                    let join_cost: f64 = incident[v].iter().filter(|&&e| pin_count[e][q] == 0).map(|&e| edges[e].0).sum();
                    let gain = leave_gain - join_cost;
                    if gain > best_gain + 1e-12 {
                        best_gain = gain;
                        best_q = Some(q);
                    }
                }
                if let Some(q) = best_q {
                    for &e in &incident[v] {
                        pin_count[e][p] -= 1;
                        pin_count[e][q] += 1;
                    }
                    sizes[p] -= 1;
                    sizes[q] += 1;
                    assign[v] = q;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        let cut = cut_of(&assign);
        if best.as_ref().is_none_or(|(c, _)| cut < *c) {
            best = Some((cut, assign));
        }
    }
    let (_, assign) = best.expect("at least one try");
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &p) in assign.iter().enumerate() {
        parts[p].push(scope[v]);
    }
    parts.retain(|p| !p.is_empty());
    if parts.len() == 1 {
        let all = parts.pop().expect("one part");
        let half = all.len() / 2;
        parts = vec![all[..half].to_vec(), all[half..].to_vec()];
    }
    parts
}
