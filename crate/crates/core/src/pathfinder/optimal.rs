//! Exact subset dynamic programming over small item sets.

use super::graph::{Bits, Graph};

/// Largest item count solved exactly.
pub const MAX_OPTIMAL_TENSORS: usize = 12;

/// Minimum-flop pairs over `g.items` (SSA ids as in a contraction tree) and
/// their total flops. Outer products are allowed.
pub(crate) fn optimal_pairs(g: &Graph) -> (Vec<(usize, usize)>, f64) {
    let m = g.items.len();
    assert!(m <= 16, "subset DP over {m} items");
    if m <= 1 {
        return (Vec::new(), 0.0);
    }
    let full: u32 = (1u32 << m) - 1;
    let nl = g.labels.len();
    let mut label_mask = vec![0u32; nl];
    for (i, b) in g.items.iter().enumerate() {
        b.iter().for_each(|l| label_mask[l] |= 1 << i);
    }
    let subsets = 1usize << m;
    let mut union: Vec<Bits> = vec![Bits::empty(g.words()); subsets];
    let mut modes: Vec<Bits> = vec![Bits::empty(g.words()); subsets];
    for s in 1..subsets {
        let low = s.trailing_zeros() as usize;
        union[s] = union[s & (s - 1)].or(&g.items[low]);
        if s.count_ones() == 1 {
            modes[s] = g.items[low].clone();
            continue;
        }
        let mut md = Bits::empty(g.words());
        for l in union[s].iter() {
            if g.external.contains(l) || label_mask[l] & !(s as u32) & full != 0 {
                md.set(l);
            }
        }
        modes[s] = md;
    }
    let mut cost = vec![0.0f64; subsets];
    let mut split = vec![0u32; subsets];
    for s in 1..subsets {
        if s.count_ones() < 2 {
            continue;
        }
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut best = f64::INFINITY;
        let mut best_a = 0usize;
        // a = low | sub, b = rest ^ sub, with b non-empty
        let mut sub = (rest - 1) & rest;
        loop {
            let a = low | sub;
            let b = rest ^ sub;
            let base = cost[a] + cost[b];
            if base < best {
                let total = base + g.size(&modes[a].or(&modes[b]));
                if total < best {
                    best = total;
                    best_a = a;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        cost[s] = best;
        split[s] = best_a as u32;
    }
    let mut pairs = Vec::with_capacity(m - 1);
    fn emit(s: usize, m: usize, split: &[u32], pairs: &mut Vec<(usize, usize)>) -> usize {
        if s.count_ones() == 1 {
            return s.trailing_zeros() as usize;
        }
        let a = split[s] as usize;
        let x = emit(a, m, split, pairs);
        let y = emit(s ^ a, m, split, pairs);
        pairs.push((x, y));
        m + pairs.len() - 1
    }
    emit(full as usize, m, &split, &mut pairs);
    (pairs, cost[full as usize])
}
