//! Segmented state vector that emulates multi-device execution.
//!
//! The `2^n` amplitudes are split into `2^g` equal segments selected by the
//! top `g` index bits ("global" bits). Each segment is owned by one worker
//! thread. Gates only ever run on local bits; a target that currently sits on a
//! global bit is first swapped with a local bit, which exchanges half of every
//! paired segment.

use std::ops::Range;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{validate_bit_pairs, Real};
use crate::statevec::{kernel, Gate, StateVector};

/// Cumulative communication counters since construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferStats {
    /// Reorder phases that moved data between segments.
    pub num_reorders: u64,
    /// Amplitudes that changed segment.
    pub amplitudes_moved: u64,
    /// Two-party exchanges (messages) issued.
    pub exchanges: u64,
    /// Amplitudes moved between segments owned by different workers.
    pub inter_worker_amplitudes: u64,
}

/// One rendezvous between a segment whose global bit is 0 (`low`) and its
/// partner with that bit set (`high`). `low` sends its elements with
/// `local_bit = 1`; `high` sends its elements with `local_bit = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exchange {
    pub low: usize,
    pub high: usize,
    pub local_bit: usize,
    pub segment_len: usize,
}

impl Exchange {
    /// Contiguous blocks sent by `low` (`value = true`) or `high` (`value = false`).
    pub fn blocks(&self, value: bool) -> impl Iterator<Item = Range<usize>> {
        let width = 1usize << self.local_bit;
        let first = if value { width } else { 0 };
        (0..self.segment_len / (2 * width)).map(move |k| {
            let start = k * 2 * width + first;
            start..start + width
        })
    }

    pub fn volume(&self) -> usize {
        self.segment_len
    }
}

/// Transfer plan for one set of index-bit swaps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReorderPlan {
    /// `(global bit, local bit)` pairs exchanged by amplitude transfer.
    pub swaps: Vec<(usize, usize)>,
    /// Pairs of local bits handled without communication.
    pub local_swaps: Vec<(usize, usize)>,
    /// Pairs of global bits handled by relabelling whole segments.
    pub global_swaps: Vec<(usize, usize)>,
    /// Exchanges grouped into phases, one phase per global/local pair.
    pub phases: Vec<Vec<Exchange>>,
}

impl ReorderPlan {
    pub fn is_empty(&self) -> bool {
        self.phases.is_empty() && self.global_swaps.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SegmentedStateVector<T: Real = f64> {
    segments: Vec<Vec<Complex<T>>>,
    num_qubits: usize,
    global_bits: usize,
    workers: usize,
    qubit_map: Vec<usize>,
    stats: TransferStats,
}

impl<T: Real> SegmentedStateVector<T> {
    /// `|0...0>` split over `2^global_bits` segments.
    pub fn zero(num_qubits: usize, global_bits: usize, workers: usize) -> Result<Self> {
        Self::from_state_vector(&StateVector::zero(num_qubits)?, global_bits, workers)
    }

    pub fn from_state_vector(sv: &StateVector<T>, global_bits: usize, workers: usize) -> Result<Self> {
        let n = sv.num_qubits();
        if global_bits >= n {
            return Err(Error::InvalidArgument(format!(
                "global bits ({global_bits}) must be fewer than qubits ({n})"
            )));
        }
        if workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        let logical = sv.logical_amplitudes();
        let seg_len = 1usize << (n - global_bits);
        let segments = logical.chunks(seg_len).map(|c| c.to_vec()).collect();
        Ok(SegmentedStateVector {
            segments,
            num_qubits: n,
            global_bits,
            workers,
            qubit_map: (0..n).collect(),
            stats: TransferStats::default(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn local_bits(&self) -> usize {
        self.num_qubits - self.global_bits
    }

    pub fn global_bits(&self) -> usize {
        self.global_bits
    }

    pub fn segments(&self) -> &[Vec<Complex<T>>] {
        &self.segments
    }

    /// Qubit -> index bit; bits at or above `local_bits()` are global.
    pub fn qubit_map(&self) -> &[usize] {
        &self.qubit_map
    }

    pub fn worker_of(&self, segment: usize) -> usize {
        segment % self.workers
    }

    pub fn transfer_stats(&self) -> TransferStats {
        self.stats
    }

    /// Concatenated amplitudes as a single-segment state (same qubit mapping).
    pub fn to_state_vector(&self) -> StateVector<T> {
        let amps: Vec<Complex<T>> = self.segments.iter().flatten().copied().collect();
        StateVector::from_parts(amps, self.qubit_map.clone())
    }

    fn is_global(&self, bit: usize) -> bool {
        bit >= self.local_bits()
    }

    /// Builds the transfer schedule for a set of disjoint index-bit pairs.
    pub fn plan_swaps(&self, pairs: &[(usize, usize)]) -> Result<ReorderPlan> {
        let p32: Vec<(u32, u32)> = pairs.iter().map(|&(a, b)| (a as u32, b as u32)).collect();
        validate_bit_pairs(&p32, self.num_qubits as u32)?;
        let local = self.local_bits();
        let seg_len = 1usize << local;
        let mut plan = ReorderPlan::default();
        for &(a, b) in pairs {
            match (self.is_global(a), self.is_global(b)) {
                (false, false) => plan.local_swaps.push((a, b)),
                (true, true) => plan.global_swaps.push((a, b)),
                (ga, _) => {
                    let (g, l) = if ga { (a, b) } else { (b, a) };
                    plan.swaps.push((g, l));
                    let gbit = 1usize << (g - local);
                    let phase = (0..self.segments.len())
                        .filter(|s| s & gbit == 0)
                        .map(|s| Exchange { low: s, high: s | gbit, local_bit: l, segment_len: seg_len })
                        .collect();
                    plan.phases.push(phase);
                }
            }
        }
        Ok(plan)
    }

    /// Distributed equivalent of [`StateVector::swap_index_bits`].
    pub fn distributed_index_bit_swap(&mut self, pairs: &[(usize, usize)]) -> Result<ReorderPlan> {
        let plan = self.plan_swaps(pairs)?;
        if !plan.local_swaps.is_empty() {
            let local = plan.local_swaps.clone();
            self.for_each_segment(|_, seg| kernel::swap_bits(seg, &local));
        }
        let local = self.local_bits();
        for &(a, b) in &plan.global_swaps {
            let (ma, mb) = (1usize << (a - local), 1usize << (b - local));
            for s in 0..self.segments.len() {
                if s & ma != 0 && s & mb == 0 {
                    let t = (s & !ma) | mb;
                    self.segments.swap(s, t);
                    self.record_exchange(s, t, 2 * (1usize << local));
                }
            }
        }
        for phase in &plan.phases {
            self.run_exchange_phase(phase);
            for ex in phase {
                self.record_exchange(ex.low, ex.high, ex.volume());
            }
        }
        if !plan.is_empty() {
            self.stats.num_reorders += 1;
        }
        for b in self.qubit_map.iter_mut() {
            for &(x, y) in pairs {
                if *b == x {
                    *b = y;
                } else if *b == y {
                    *b = x;
                }
            }
        }
        Ok(plan)
    }

    fn record_exchange(&mut self, a: usize, b: usize, amplitudes: usize) {
        self.stats.exchanges += 1;
        self.stats.amplitudes_moved += amplitudes as u64;
        if self.worker_of(a) != self.worker_of(b) {
            self.stats.inter_worker_amplitudes += amplitudes as u64;
        }
    }

    /// Two barriers: every segment first stages its outgoing blocks, then
    /// every segment reads its partner's staging buffer.
    fn run_exchange_phase(&mut self, phase: &[Exchange]) {
        let n_seg = self.segments.len();
        let mut role: Vec<Option<(Exchange, bool)>> = vec![None; n_seg];
        for ex in phase {
            role[ex.low] = Some((*ex, true));
            role[ex.high] = Some((*ex, false));
        }
        let staged: Vec<Vec<Complex<T>>> = {
            let role = &role;
            self.map_segments(|s, seg| match role[s] {
                Some((ex, is_low)) => ex.blocks(is_low).flat_map(|r| seg[r].to_vec()).collect(),
                None => Vec::new(),
            })
        };
        let role = &role;
        let staged = &staged;
        self.for_each_segment(|s, seg| {
            if let Some((ex, is_low)) = role[s] {
                let partner = if is_low { ex.high } else { ex.low };
                let mut incoming = staged[partner].iter();
                for r in ex.blocks(is_low) {
                    for slot in &mut seg[r] {
                        *slot = *incoming.next().expect("staging sizes match");
                    }
                }
            }
        });
    }

    fn owned_segments(&mut self) -> Vec<Vec<(usize, &mut Vec<Complex<T>>)>> {
        let workers = self.workers.min(self.segments.len());
        let mut per_worker: Vec<Vec<(usize, &mut Vec<Complex<T>>)>> = (0..workers).map(|_| Vec::new()).collect();
        for (s, seg) in self.segments.iter_mut().enumerate() {
            per_worker[s % workers].push((s, seg));
        }
        per_worker
    }

    fn for_each_segment<F>(&mut self, f: F)
    where
        F: Fn(usize, &mut [Complex<T>]) + Sync,
    {
        let groups = self.owned_segments();
        if groups.len() == 1 {
            for (s, seg) in groups.into_iter().flatten() {
                f(s, seg);
            }
            return;
        }
        std::thread::scope(|scope| {
            for group in groups {
                let f = &f;
                scope.spawn(move || {
                    for (s, seg) in group {
                        f(s, seg);
                    }
                });
            }
        });
    }

    fn map_segments<R, F>(&mut self, f: F) -> Vec<R>
    where
        R: Send + Default,
        F: Fn(usize, &[Complex<T>]) -> R + Sync,
    {
        let n_seg = self.segments.len();
        let groups = self.owned_segments();
        let mut out: Vec<R> = (0..n_seg).map(|_| R::default()).collect();
        let results: Vec<Vec<(usize, R)>> = if groups.len() == 1 {
            groups.into_iter().map(|g| g.into_iter().map(|(s, seg)| (s, f(s, seg))).collect()).collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = groups
                    .into_iter()
                    .map(|group| {
                        let f = &f;
                        scope.spawn(move || group.into_iter().map(|(s, seg)| (s, f(s, &seg[..]))).collect::<Vec<_>>())
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        for (s, r) in results.into_iter().flatten() {
            out[s] = r;
        }
        out
    }

    /// Picks local bits to receive globally-mapped targets of `gate`. The local
    /// bit chosen is the one whose qubit is next targeted furthest in the future.
    fn reorder_pairs(&self, gate: &Gate, upcoming: &[Gate]) -> Vec<(usize, usize)> {
        let local = self.local_bits();
        let targets = gate.targets();
        let mut taken: Vec<usize> = targets.iter().map(|&q| self.qubit_map[q]).filter(|&b| b < local).collect();
        let mut pairs = Vec::new();
        let mut bit_to_qubit = vec![0usize; self.num_qubits];
        for (q, &b) in self.qubit_map.iter().enumerate() {
            bit_to_qubit[b] = q;
        }
        for &q in targets {
            let gbit = self.qubit_map[q];
            if gbit < local {
                continue;
            }
            let next_use = |qubit: usize| {
                upcoming.iter().position(|g| g.targets().contains(&qubit)).unwrap_or(usize::MAX)
            };
            let best = (0..local)
                .filter(|b| !taken.contains(b))
                .max_by_key(|&b| (next_use(bit_to_qubit[b]), std::cmp::Reverse(b)))
                .expect("arity checked against local capacity");
            taken.push(best);
            pairs.push((gbit, best));
        }
        pairs
    }

    /// Applies a gate, first reordering any globally-mapped targets. `upcoming`
    /// is the rest of the circuit, used to choose which local bits to evict.
    pub fn apply_gate_with_lookahead(&mut self, gate: &Gate, upcoming: &[Gate]) -> Result<()> {
        let local = self.local_bits();
        if gate.targets().len() > local {
            return Err(Error::ArityTooLarge(gate.targets().len(), local));
        }
        for q in gate.qubits() {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
            }
        }
        let pairs = self.reorder_pairs(gate, upcoming);
        if !pairs.is_empty() {
            self.distributed_index_bit_swap(&pairs)?;
        }
        let targets: Vec<usize> = gate.targets().iter().map(|&q| self.qubit_map[q]).collect();
        let mut local_controls = Vec::new();
        let mut global_mask = 0usize;
        let mut global_value = 0usize;
        for c in gate.controls() {
            let b = self.qubit_map[c.qubit];
            if b < local {
                local_controls.push((b, c.value));
            } else {
                global_mask |= 1 << (b - local);
                if c.value {
                    global_value |= 1 << (b - local);
                }
            }
        }
        let targets = &targets;
        let local_controls = &local_controls;
        self.for_each_segment(|s, seg| {
            if s & global_mask != global_value {
                return;
            }
            match gate {
                Gate::Dense(d) => kernel::apply_dense(seg, local, d.matrix(), targets, local_controls),
                Gate::Permutation(p) => kernel::apply_permutation(
                    seg,
                    local,
                    p.permutation(),
                    p.diagonal_values(),
                    targets,
                    local_controls,
                ),
            }
        });
        Ok(())
    }

    /// Applies a gate without lookahead (evicts the lowest-index free bit).
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        self.apply_gate_with_lookahead(gate, &[])
    }

    pub fn run_circuit(&mut self, gates: &[Gate]) -> Result<()> {
        for (i, g) in gates.iter().enumerate() {
            self.apply_gate_with_lookahead(g, &gates[i + 1..])?;
        }
        Ok(())
    }
}
