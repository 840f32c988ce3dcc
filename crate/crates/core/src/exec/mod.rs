//! Contraction planning and execution.
//!
//! A [`ContractionPlan`] fixes the evaluation order and kernel choice for a
//! tree; [`contract`] runs any range of its slices inside a
//! [`WorkspaceArena`], serving constant intermediates from the arena's cache.

mod arena;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use arena::{CacheStats, WorkspaceArena};

use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::pathfinder::{find_path, OptimizerConfig, OptimizerResult};
use crate::tn::kernel::{contract_views_into, ttgt_staging};
use crate::tn::{einsum_from_shapes, min_peak_order, ContractionTree, KernelVariant, Label, Tensor, TensorNetwork, TensorView};

const BYTES: usize = 16;

static NEXT_PLAN: AtomicU64 = AtomicU64::new(1);

/// Scratch sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: usize,
    pub recommended: usize,
    pub max: usize,
}

/// Half-open range of slice ordinals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRange {
    pub begin: usize,
    pub end: usize,
    /// Add into the target instead of overwriting it.
    pub accumulate: bool,
}

impl SliceRange {
    pub fn new(begin: usize, end: usize, accumulate: bool) -> Self {
        SliceRange { begin, end, accumulate }
    }

    pub fn full(plan: &ContractionPlan) -> Self {
        SliceRange { begin: 0, end: plan.num_slices(), accumulate: false }
    }
}

#[derive(Debug, Clone)]
pub struct ContractionPlan {
    id: u64,
    tree: ContractionTree,
    order: Vec<usize>,
    workspace: Workspace,
    variants: Vec<KernelVariant>,
    tuned: bool,
    slices: Vec<(Label, usize)>,
    num_slices: usize,
    /// Indices into `slices` of the sliced labels below each node.
    sliced_below: Vec<Vec<usize>>,
    /// Multiply-adds of each node's subtree, per slice.
    subtree_flops: Vec<f64>,
    constant: Vec<bool>,
    cache_recommended: usize,
}

pub fn make_plan(tn: &TensorNetwork, result: &OptimizerResult) -> Result<ContractionPlan> {
    ContractionPlan::new(tn, result.tree.clone())
}

impl ContractionPlan {
    pub fn new(tn: &TensorNetwork, tree: ContractionTree) -> Result<Self> {
        check_tree(tn, &tree)?;
        let slices: Vec<(Label, usize)> = tree.sliced().iter().map(|&l| (l, tn.extent(l).expect("checked"))).collect();
        let num_slices = slices.iter().map(|s| s.1).product();
        let n = tree.num_leaves();
        let total = tree.nodes().len();
        let mut sliced_below = vec![Vec::new(); total];
        let mut subtree_flops = vec![0.0; total];
        for v in 0..total {
            match tree.node(v).children {
                None => {
                    sliced_below[v] = (0..slices.len()).filter(|&s| tn.slot(v).modes.contains(&slices[s].0)).collect();
                }
                Some((x, y)) => {
                    let mut s = sliced_below[x].clone();
                    s.extend(&sliced_below[y]);
                    s.sort_unstable();
                    s.dedup();
                    sliced_below[v] = s;
                    subtree_flops[v] = subtree_flops[x] + subtree_flops[y] + tree.node(v).cost.flops;
                }
            }
        }
        let leaf_charge = |i: usize| if sliced_below[i].is_empty() { 0.0 } else { tree.node(i).size };
        let po = min_peak_order(&tree, leaf_charge);
        let staging = tree.nodes()[n..]
            .iter()
            .map(|nd| {
                let (x, y) = nd.children.expect("internal");
                ttgt_staging(tree.node(x).size, tree.node(y).size, nd.size)
            })
            .fold(0.0, f64::max);
        let all: f64 = tree.nodes()[n..].iter().map(|nd| nd.size).sum::<f64>() + (0..n).map(leaf_charge).sum::<f64>();
        let min = po.peak as usize * BYTES;
        let workspace = Workspace {
            min,
            recommended: min + staging as usize * BYTES,
            max: (all + staging) as usize * BYTES,
        };
        let mut plan = ContractionPlan {
            id: NEXT_PLAN.fetch_add(1, Ordering::Relaxed),
            order: po.order,
            workspace,
            variants: vec![KernelVariant::Direct; total],
            tuned: false,
            slices,
            num_slices,
            sliced_below,
            subtree_flops,
            constant: Vec::new(),
            cache_recommended: 0,
            tree,
        };
        plan.refresh_constness(tn);
        Ok(plan)
    }

    /// Recomputes the constant-subtree marks from the network.
    pub fn refresh_constness(&mut self, tn: &TensorNetwork) {
        let (constant, recommended) = self.constness(tn);
        self.constant = constant;
        self.cache_recommended = recommended;
    }

    fn constness(&self, tn: &TensorNetwork) -> (Vec<bool>, usize) {
        let total = self.tree.nodes().len();
        let mut constant = vec![false; total];
        let mut bytes = 0usize;
        for v in 0..total {
            constant[v] = match self.tree.node(v).children {
                None => tn.is_constant(v),
                Some((x, y)) => constant[x] && constant[y],
            };
            if constant[v] && v != self.tree.root() && !self.tree.is_leaf(v) {
                bytes += self.tree.node(v).size as usize * BYTES * self.projections(v);
            }
        }
        (constant, bytes)
    }

    fn projections(&self, v: usize) -> usize {
        self.sliced_below[v].iter().map(|&s| self.slices[s].1).product()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn tree(&self) -> &ContractionTree {
        &self.tree
    }

    /// Internal nodes in evaluation order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn workspace(&self) -> Workspace {
        self.workspace
    }

    /// Kernel used for each node (leaves carry the default).
    pub fn variants(&self) -> &[KernelVariant] {
        &self.variants
    }

    pub fn is_tuned(&self) -> bool {
        self.tuned
    }

    pub fn slices(&self) -> &[(Label, usize)] {
        &self.slices
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    /// Per node: every leaf below it is constant.
    pub fn constant_marks(&self) -> &[bool] {
        &self.constant
    }

    /// Bytes needed to cache every constant intermediate of every slice.
    pub fn cache_recommended_bytes(&self) -> usize {
        self.cache_recommended
    }

    fn slice_values(&self, ordinal: usize) -> Vec<usize> {
        let mut vals = vec![0; self.slices.len()];
        let mut r = ordinal;
        for (k, &(_, e)) in self.slices.iter().enumerate().rev() {
            vals[k] = r % e;
            r /= e;
        }
        vals
    }

    fn projection_key(&self, v: usize, vals: &[usize]) -> u64 {
        self.sliced_below[v].iter().fold(0u64, |acc, &s| acc * self.slices[s].1 as u64 + vals[s] as u64)
    }
}

fn check_tree(tn: &TensorNetwork, tree: &ContractionTree) -> Result<()> {
    if tree.num_leaves() != tn.num_tensors() {
        return Err(Error::TreeMismatch(format!("tree has {} leaves, network {} tensors", tree.num_leaves(), tn.num_tensors())));
    }
    for (i, slot) in tn.tensors().iter().enumerate() {
        let mut modes: Vec<Label> = slot.modes.iter().copied().filter(|l| !tree.sliced().contains(l)).collect();
        modes.sort_unstable();
        if modes != tree.node(i).modes {
            return Err(Error::TreeMismatch(format!("leaf {i} modes differ from tensor {i}")));
        }
    }
    Ok(())
}

/// Per-call facts shared by every slice.
struct CallState {
    /// Maximal constant internal nodes other than the root.
    cache_root: Vec<bool>,
    open: Vec<Label>,
    open_pos: Vec<usize>,
    sliced_out: Vec<(usize, usize)>,
    out_strides: Vec<usize>,
}

impl CallState {
    fn new(plan: &ContractionPlan, tn: &TensorNetwork) -> Self {
        let (constant, _) = plan.constness(tn);
        let tree = &plan.tree;
        let root = tree.root();
        let mut cache_root = vec![false; constant.len()];
        for v in tree.num_leaves()..constant.len() {
            let (x, y) = tree.node(v).children.expect("internal");
            for c in [x, y] {
                if constant[c] && !tree.is_leaf(c) && !(constant[v] && v != root) {
                    cache_root[c] = true;
                }
            }
        }
        let output = tn.output();
        let out_ext = tn.output_extents();
        let mut out_strides = vec![1usize; output.len()];
        for i in (0..output.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * out_ext[i + 1];
        }
        let mut open = Vec::new();
        let mut open_pos = Vec::new();
        let mut sliced_out = Vec::new();
        for (i, l) in output.iter().enumerate() {
            match plan.slices.iter().position(|s| s.0 == *l) {
                Some(s) => sliced_out.push((s, i)),
                None => {
                    open.push(*l);
                    open_pos.push(i);
                }
            }
        }
        CallState { cache_root, open, open_pos, sliced_out, out_strides }
    }
}

enum Value<'a> {
    View(TensorView<'a>),
    Owned(Tensor),
    Shared(Arc<Tensor>),
}

impl Value<'_> {
    fn view(&self) -> TensorView<'_> {
        match self {
            Value::View(v) => *v,
            Value::Owned(t) => t.view(),
            Value::Shared(t) => t.view(),
        }
    }
}

fn release(arena: &mut WorkspaceArena, v: Value) {
    if let Value::Owned(t) = v {
        let len = t.len();
        arena.give(t.into_data(), len);
    }
}

fn check_call(plan: &ContractionPlan, tn: &TensorNetwork, arena: &WorkspaceArena) -> Result<()> {
    check_tree(tn, &plan.tree)?;
    if let Some(i) = (0..tn.num_tensors()).find(|&i| tn.slot(i).data.is_none()) {
        return Err(Error::UnboundData(i));
    }
    if arena.scratch_bytes() < plan.workspace.min {
        return Err(Error::WorkspaceTooSmall { required: plan.workspace.min, available: arena.scratch_bytes() });
    }
    Ok(())
}

/// Contracts one slice; the result carries the open output labels in output order.
fn run_slice(plan: &ContractionPlan, tn: &TensorNetwork, arena: &mut WorkspaceArena, st: &CallState, ordinal: usize) -> Result<Tensor> {
    let tree = &plan.tree;
    let vals = plan.slice_values(ordinal);
    let fixed: Vec<(Label, usize)> = plan.slices.iter().zip(&vals).map(|(s, &v)| (s.0, v)).collect();
    let total = tree.nodes().len();
    let root = tree.root();
    let mut values: Vec<Option<Value>> = (0..total).map(|_| None).collect();
    // nodes whose value is already available from the cache; their subtrees are skipped
    let mut served = vec![false; total];
    for v in (tree.num_leaves()..total).rev() {
        if served[v] {
            if let Some((x, y)) = tree.node(v).children {
                served[x] = true;
                served[y] = true;
            }
            continue;
        }
        if st.cache_root[v] {
            let key = (plan.id, v, plan.projection_key(v, &vals));
            if let Some(t) = arena.cache.lookup(&key) {
                values[v] = Some(Value::Shared(t));
                if let Some((x, y)) = tree.node(v).children {
                    served[x] = true;
                    served[y] = true;
                }
            }
        }
    }
    let leaf = |arena: &mut WorkspaceArena, i: usize| -> Result<Value> {
        let view = tn.tensor(i)?;
        if plan.sliced_below[i].is_empty() {
            Ok(Value::View(view))
        } else {
            let t = view.project(&fixed);
            arena.charge(t.len())?;
            Ok(Value::Owned(t))
        }
    };
    for &v in &plan.order {
        if served[v] || values[v].is_some() {
            continue;
        }
        let node = tree.node(v);
        let (x, y) = node.children.expect("internal");
        let vx = match values[x].take() {
            Some(val) => val,
            None => leaf(arena, x)?,
        };
        let vy = match values[y].take() {
            Some(val) => val,
            None => leaf(arena, y)?,
        };
        let len = node.size as usize;
        let buf = arena.take(len)?;
        let variant = plan.variants[v];
        let staging = match variant {
            KernelVariant::Direct => 0,
            KernelVariant::Ttgt => ttgt_staging(tree.node(x).size, tree.node(y).size, node.size) as usize,
        };
        arena.charge(staging)?;
        let out = contract_views_into(vx.view(), vy.view(), &node.modes, variant, buf);
        arena.release(staging);
        let out = out?;
        arena.count(node.cost.flops);
        release(arena, vx);
        release(arena, vy);
        values[v] = Some(if st.cache_root[v] {
            let key = (plan.id, v, plan.projection_key(v, &vals));
            let shared = Arc::new(out);
            if arena.cache.offer(key, &shared, plan.subtree_flops[v]) {
                arena.release(len);
                Value::Shared(shared)
            } else {
                Value::Owned(Arc::try_unwrap(shared).expect("sole owner"))
            }
        } else {
            Value::Owned(out)
        });
    }
    let root_val = match values[root].take() {
        Some(val) => val,
        None => leaf(arena, root)?,
    };
    let result = if tree.is_leaf(root) {
        let mut modes: Vec<Label> = st.open.clone();
        modes.sort_unstable();
        let one = Tensor::scalar(C64::new(1.0, 0.0));
        contract_views_into(root_val.view(), one.view(), &modes, KernelVariant::Direct, Vec::new())?.permuted(&st.open)?
    } else {
        root_val.view().permuted(&st.open)?
    };
    release(arena, root_val);
    Ok(result)
}

fn scatter(st: &CallState, plan: &ContractionPlan, ordinal: usize, part: &Tensor, target: &mut Tensor) {
    let vals = plan.slice_values(ordinal);
    let base: usize = st.sliced_out.iter().map(|&(s, i)| vals[s] * st.out_strides[i]).sum();
    let data = target.data_mut();
    if st.sliced_out.is_empty() {
        for (t, p) in data.iter_mut().zip(part.data()) {
            *t += p;
        }
        return;
    }
    let ext = part.extents();
    let strides: Vec<usize> = st.open_pos.iter().map(|&i| st.out_strides[i]).collect();
    let mut idx = vec![0usize; ext.len()];
    let mut off = base;
    for &p in part.data() {
        data[off] += p;
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            off += strides[k];
            if idx[k] < ext[k] {
                break;
            }
            off -= strides[k] * ext[k];
            idx[k] = 0;
        }
    }
}

fn check_range(plan: &ContractionPlan, range: SliceRange) -> Result<()> {
    if range.begin >= range.end || range.end > plan.num_slices {
        return Err(Error::InvalidArgument(format!(
            "slice range {}..{} outside 0..{}",
            range.begin, range.end, plan.num_slices
        )));
    }
    Ok(())
}

fn output_tensor(tn: &TensorNetwork) -> Result<Tensor> {
    Tensor::zeros(tn.output().to_vec(), tn.output_extents())
}

/// Contracts the slices in `range` and returns their sum.
pub fn contract(plan: &ContractionPlan, tn: &TensorNetwork, arena: &mut WorkspaceArena, range: SliceRange) -> Result<Tensor> {
    let mut target = output_tensor(tn)?;
    contract_into(plan, tn, arena, SliceRange { accumulate: true, ..range }, &mut target)?;
    Ok(target)
}

/// Contracts the slices in `range` into `target`, which must carry the
/// network's output modes. Slices are summed in ascending ordinal order.
pub fn contract_into(plan: &ContractionPlan, tn: &TensorNetwork, arena: &mut WorkspaceArena, range: SliceRange, target: &mut Tensor) -> Result<()> {
    check_call(plan, tn, arena)?;
    check_range(plan, range)?;
    if target.modes() != tn.output() || target.extents() != tn.output_extents().as_slice() {
        return Err(Error::InvalidArgument("target modes differ from the network output".into()));
    }
    if !range.accumulate {
        target.data_mut().fill(C64::default());
    }
    let st = CallState::new(plan, tn);
    arena.cache.sync_generation(tn.generation());
    arena.cache.recommended = plan.constness(tn).1;
    for ordinal in range.begin..range.end {
        let part = run_slice(plan, tn, arena, &st, ordinal)?;
        scatter(&st, plan, ordinal, &part, target);
    }
    Ok(())
}

/// Contracts every slice on `workers` threads, slices assigned round-robin by
/// ordinal. Partial results are summed in ordinal order, so the value does
/// not depend on the worker count. Missing arenas are created at the plan's
/// recommended size.
pub fn contract_distributed(plan: &ContractionPlan, tn: &TensorNetwork, arenas: &mut Vec<WorkspaceArena>, workers: usize) -> Result<Tensor> {
    let workers = workers.max(1);
    while arenas.len() < workers {
        arenas.push(WorkspaceArena::for_plan(plan));
    }
    if workers == 1 {
        return contract(plan, tn, &mut arenas[0], SliceRange::full(plan));
    }
    for arena in arenas.iter() {
        check_call(plan, tn, arena)?;
    }
    let st = CallState::new(plan, tn);
    let recommended = plan.constness(tn).1;
    let mut target = output_tensor(tn)?;
    let total = plan.num_slices;
    std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel::<(usize, Result<Tensor>)>();
        for (w, arena) in arenas.iter_mut().take(workers).enumerate() {
            let tx = tx.clone();
            let st = &st;
            scope.spawn(move || {
                arena.cache.sync_generation(tn.generation());
                arena.cache.recommended = recommended;
                for ordinal in (w..total).step_by(workers) {
                    let part = run_slice(plan, tn, arena, st, ordinal);
                    let failed = part.is_err();
                    if tx.send((ordinal, part)).is_err() || failed {
                        return;
                    }
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        while next < total {
            let (ordinal, part) = rx.recv().map_err(|_| Error::InvalidArgument("worker stopped early".into()))?;
            pending.insert(ordinal, part?);
            while let Some(part) = pending.remove(&next) {
                scatter(&st, plan, next, &part, &mut target);
                next += 1;
            }
        }
        Ok(())
    })?;
    Ok(target)
}

fn time_variant(a: TensorView, b: TensorView, out: &[Label], variant: KernelVariant, reps: usize) -> Result<(Duration, Tensor)> {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..reps {
        let start = Instant::now();
        let t = contract_views_into(a, b, out, variant, Vec::new())?;
        best = best.min(start.elapsed());
        last = Some(t);
    }
    Ok((best, last.expect("reps > 0")))
}

/// Times each kernel variant on every node of slice 0 and records the
/// fastest. The transpose-first kernel is only considered when the arena's
/// scratch reaches the recommended size.
pub fn autotune(plan: &mut ContractionPlan, tn: &TensorNetwork, arena: &WorkspaceArena) -> Result<()> {
    check_call(plan, tn, arena)?;
    let allow_ttgt = arena.scratch_bytes() >= plan.workspace.recommended;
    let fixed: Vec<(Label, usize)> = plan.slices.iter().map(|s| (s.0, 0)).collect();
    let tree = &plan.tree;
    let mut values: Vec<Option<Tensor>> = vec![None; tree.nodes().len()];
    let mut variants = plan.variants.clone();
    for &v in &plan.order {
        let node = tree.node(v);
        let (x, y) = node.children.expect("internal");
        let mut operand = |c: usize| -> Result<Tensor> {
            match values[c].take() {
                Some(t) => Ok(t),
                None => Ok(tn.tensor(c)?.project(&fixed)),
            }
        };
        let (a, b) = (operand(x)?, operand(y)?);
        let reps = if node.cost.flops > 1e6 { 1 } else { 3 };
        let (td, direct) = time_variant(a.view(), b.view(), &node.modes, KernelVariant::Direct, reps)?;
        let mut chosen = (KernelVariant::Direct, direct);
        if allow_ttgt {
            let (tt, t) = time_variant(a.view(), b.view(), &node.modes, KernelVariant::Ttgt, reps)?;
            if tt < td {
                chosen = (KernelVariant::Ttgt, t);
            }
        }
        variants[v] = chosen.0;
        values[v] = Some(chosen.1);
    }
    plan.variants = variants;
    plan.tuned = true;
    Ok(())
}

impl WorkspaceArena {
    /// Scratch at the recommended size and a cache holding every constant
    /// intermediate.
    pub fn for_plan(plan: &ContractionPlan) -> Self {
        WorkspaceArena::new(plan.workspace.recommended, plan.cache_recommended)
    }
}

pub fn cache_stats(arena: &WorkspaceArena) -> CacheStats {
    arena.cache_stats()
}

/// Evaluates an einsum expression with explicit output, e.g. `"ij,jk->ik"`.
/// Operand modes are taken from the expression; only extents and data are
/// read from `operands`.
pub fn einsum(expr: &str, operands: &[&Tensor]) -> Result<Tensor> {
    let shapes: Vec<Vec<usize>> = operands.iter().map(|t| t.extents().to_vec()).collect();
    let mut tn = einsum_from_shapes(expr, &shapes)?;
    for (i, t) in operands.iter().enumerate() {
        tn.bind(i, t.data().to_vec())?;
    }
    contract_network(&tn, &OptimizerConfig { num_hyper_samples: 4, ..OptimizerConfig::default() })
}

/// Finds a path with `cfg`, plans and contracts every slice of a bound network.
pub fn contract_network(tn: &TensorNetwork, cfg: &OptimizerConfig) -> Result<Tensor> {
    let path = find_path(tn, cfg)?;
    let plan = make_plan(tn, &path)?;
    let mut arena = WorkspaceArena::for_plan(&plan);
    contract(&plan, tn, &mut arena, SliceRange::full(&plan))
}
