//! Reference implementations shared by the integration tests. Everything here
//! works from definitions (full matrices, explicit sums) rather than the
//! library's kernels.

#![allow(dead_code)]

use std::collections::BTreeMap;

use qcsim::statevec::{Control, Pauli};
use qcsim::tn::{Label, Tensor, TensorNetwork};
use qcsim::C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

pub fn random_data(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len).map(|_| random_complex(rng)).collect()
}

pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v = random_data(1 << n, rng);
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Distinct qubits drawn from `0..n`.
pub fn pick_qubits(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut q: Vec<usize> = (0..n).collect();
    q.shuffle(rng);
    q.truncate(k);
    q
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `2^n x 2^n` operator of a gate on `targets` (matrix index bit `j` is
/// `targets[j]`) with controls, straight from the definition.
pub fn full_operator(m: &[C64], targets: &[usize], controls: &[Control], n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let mut out = vec![C64::default(); dim * dim];
    let sub = |i: usize| targets.iter().enumerate().fold(0, |acc, (j, &q)| acc | (((i >> q) & 1) << j));
    let tmask: usize = targets.iter().map(|&q| 1 << q).sum();
    let k = 1usize << targets.len();
    for col in 0..dim {
        let active = controls.iter().all(|ctl| ((col >> ctl.qubit) & 1 == 1) == ctl.value);
        if !active {
            out[col * dim + col] = c(1.0, 0.0);
            continue;
        }
        for row in 0..dim {
            if row & !tmask == col & !tmask {
                out[row * dim + col] = m[sub(row) * k + sub(col)];
            }
        }
    }
    out
}

/// Full operator of a Pauli string, coefficient ignored.
pub fn full_pauli(factors: &[(usize, Pauli)], n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let mut out = vec![C64::default(); dim * dim];
    for row in 0..dim {
        for col in 0..dim {
            let mut v = c(1.0, 0.0);
            for q in 0..n {
                let (r, cc) = ((row >> q) & 1, (col >> q) & 1);
                let p = factors.iter().find(|f| f.0 == q).map(|f| f.1).unwrap_or(Pauli::I);
                v *= pauli_entry(p, r, cc);
            }
            out[row * dim + col] = v;
        }
    }
    out
}

fn pauli_entry(p: Pauli, r: usize, col: usize) -> C64 {
    match (p, r, col) {
        (Pauli::I, a, b) if a == b => c(1.0, 0.0),
        (Pauli::X, a, b) if a != b => c(1.0, 0.0),
        (Pauli::Y, 0, 1) => c(0.0, -1.0),
        (Pauli::Y, 1, 0) => c(0.0, 1.0),
        (Pauli::Z, 0, 0) => c(1.0, 0.0),
        (Pauli::Z, 1, 1) => c(-1.0, 0.0),
        _ => C64::default(),
    }
}

pub fn matvec(m: &[C64], v: &[C64]) -> Vec<C64> {
    let d = v.len();
    (0..d).map(|r| m[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Reduced density matrix of `kept` with `projected` qubits fixed (no
/// renormalization) and the rest traced out. Index bit `j` is `kept[j]`;
/// row-major, rows index the ket.
pub fn rdm(state: &[C64], n: usize, kept: &[usize], projected: &[(usize, bool)]) -> Vec<C64> {
    let k = kept.len();
    let dk = 1usize << k;
    let mut out = vec![C64::default(); dk * dk];
    let place = |bits: usize| kept.iter().enumerate().fold(0, |acc, (j, &q)| acc | (((bits >> j) & 1) << q));
    let fixed: usize = projected.iter().map(|&(q, v)| usize::from(v) << q).sum();
    let fixed_mask: usize = projected.iter().map(|&(q, _)| 1 << q).sum();
    let kept_mask: usize = kept.iter().map(|&q| 1 << q).sum();
    for rest in 0..1usize << n {
        if rest & (kept_mask | fixed_mask) != 0 {
            continue;
        }
        for r in 0..dk {
            for col in 0..dk {
                let a = state[rest | fixed | place(r)];
                let b = state[rest | fixed | place(col)];
                out[r * dk + col] += a * b.conj();
            }
        }
    }
    out
}

/// Random network: `n` tensors of rank `1..=max_rank` over a pool of labels
/// with extents `2..=max_extent`; labels may be shared by several tensors.
pub fn random_network(n: usize, pool: u32, max_rank: usize, max_extent: usize, rng: &mut ChaCha8Rng) -> TensorNetwork {
    let extents: Vec<usize> = (0..pool).map(|_| rng.random_range(2..=max_extent)).collect();
    let mut tn = TensorNetwork::new();
    let mut used = Vec::new();
    for _ in 0..n {
        let mut labels: Vec<u32> = (0..pool).collect();
        labels.shuffle(rng);
        let k = rng.random_range(1..=max_rank);
        let modes: Vec<Label> = labels[..k].iter().map(|&m| Label(m)).collect();
        let ext: Vec<usize> = labels[..k].iter().map(|&m| extents[m as usize]).collect();
        let len = ext.iter().product();
        used.extend(modes.iter().copied());
        tn.add_tensor(modes, ext, Some(random_data(len, rng))).unwrap();
    }
    used.sort_unstable();
    used.dedup();
    used.shuffle(rng);
    let keep = rng.random_range(0..=used.len().min(2));
    tn.set_output(used[..keep].to_vec()).unwrap();
    tn
}

/// Sums the product of all tensors over every label assignment.
pub fn brute_force(tn: &TensorNetwork) -> Tensor {
    let labels: Vec<Label> = tn.labels().collect();
    let ext: Vec<usize> = labels.iter().map(|&l| tn.extent(l).unwrap()).collect();
    let out_ext = tn.output_extents();
    let mut result = vec![C64::default(); out_ext.iter().product()];
    let tensors: Vec<Tensor> = (0..tn.num_tensors()).map(|i| tn.tensor(i).unwrap().to_tensor()).collect();
    let total: usize = ext.iter().product();
    let mut value: BTreeMap<Label, usize> = BTreeMap::new();
    for flat in 0..total {
        let mut rem = flat;
        for (l, e) in labels.iter().zip(&ext).rev() {
            value.insert(*l, rem % e);
            rem /= e;
        }
        let mut prod = c(1.0, 0.0);
        for t in &tensors {
            let idx: Vec<usize> = t.modes().iter().map(|l| value[l]).collect();
            prod *= t.get(&idx).unwrap();
        }
        let o = tn.output().iter().zip(&out_ext).fold(0, |acc, (l, e)| acc * e + value[l]);
        result[o] += prod;
    }
    Tensor::new(tn.output().to_vec(), out_ext, result).unwrap()
}

/// Number of label assignments `brute_force` would enumerate.
pub fn label_space(tn: &TensorNetwork) -> f64 {
    tn.labels().map(|l| tn.extent(l).unwrap() as f64).product()
}

/// Minimum total multiply-adds over all contraction trees, by dynamic
/// programming over tensor subsets. A pairwise step costs the product of the
/// extents of every label on either operand.
pub fn optimal_flops(tn: &TensorNetwork) -> f64 {
    let n = tn.num_tensors();
    assert!(n <= 16);
    let full = (1usize << n) - 1;
    let labels: Vec<Label> = tn.labels().collect();
    let holders: Vec<usize> = labels
        .iter()
        .map(|l| (0..n).filter(|&i| tn.slot(i).modes.contains(l)).fold(0, |m, i| m | (1 << i)))
        .collect();
    let open: Vec<bool> = labels.iter().map(|l| tn.output().contains(l)).collect();
    let ext: Vec<f64> = labels.iter().map(|&l| tn.extent(l).unwrap() as f64).collect();
    // labels carried by the intermediate of subset s; inputs keep all modes
    let carried = |s: usize| -> Vec<usize> {
        (0..labels.len())
            .filter(|&j| holders[j] & s != 0 && (s.count_ones() == 1 || open[j] || holders[j] & !s & full != 0))
            .collect()
    };
    let mut best = vec![f64::INFINITY; full + 1];
    for i in 0..n {
        best[1 << i] = 0.0;
    }
    for s in 1..=full {
        if s.count_ones() < 2 {
            continue;
        }
        let mut a = (s - 1) & s;
        while a > 0 {
            let b = s ^ a;
            if a < b {
                let (ca, cb) = (carried(a), carried(b));
                let mut union = ca.clone();
                union.extend(cb.iter().copied());
                union.sort_unstable();
                union.dedup();
                let cost: f64 = union.iter().map(|&j| ext[j]).product();
                let total = best[a] + best[b] + cost;
                if total < best[s] {
                    best[s] = total;
                }
            }
            a = (a - 1) & s;
        }
    }
    best[full]
}
