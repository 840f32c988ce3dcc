//! Dense and diagonal gate fusion.
//!
//! Gates are scanned in time order. A window collects gates whose qubits fit
//! within the configured size; later gates may join the window when they are
//! qubit-disjoint from every gate left behind, so they commute past them.
//! Windows opened by a diagonal gate only absorb diagonal gates and become a
//! single diagonal [`PermutationGate`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::statevec::{kernel, Control, DenseGate, Gate, PermutationGate};

/// Largest qubit set `fused_matrix` will expand to.
pub const MAX_FUSED_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub max_fused_gate_size: usize,
    pub max_fused_diagonal_gate_size: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { max_fused_gate_size: 4, max_fused_diagonal_gate_size: 6 }
    }
}

impl FusionConfig {
    pub fn new(max_fused_gate_size: usize, max_fused_diagonal_gate_size: usize) -> Result<Self> {
        if max_fused_gate_size == 0 || max_fused_diagonal_gate_size == 0 {
            return Err(Error::InvalidArgument("fusion sizes must be at least 1".into()));
        }
        if max_fused_gate_size > MAX_FUSED_QUBITS || max_fused_diagonal_gate_size > MAX_FUSED_QUBITS {
            return Err(Error::InvalidArgument(format!("fusion sizes are capped at {MAX_FUSED_QUBITS}")));
        }
        Ok(FusionConfig { max_fused_gate_size, max_fused_diagonal_gate_size })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCircuit {
    pub gates: Vec<Gate>,
    /// For each output gate, the ascending indices of the source gates it covers.
    pub provenance: Vec<Vec<usize>>,
}

impl FusedCircuit {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// Fuses `circuit`, repeating whole passes while they still shrink the gate
/// count, so fusing the result again never reduces it further.
pub fn fuse(circuit: &[Gate], cfg: &FusionConfig) -> FusedCircuit {
    let mut current: Vec<(Gate, Vec<usize>)> =
        circuit.iter().cloned().enumerate().map(|(i, g)| (g, vec![i])).collect();
    loop {
        let next = fusion_pass(&current, cfg);
        if next.len() < current.len() {
            current = next;
        } else {
            break;
        }
    }
    let (gates, provenance) = current.into_iter().unzip();
    FusedCircuit { gates, provenance }
}

fn fusion_pass(items: &[(Gate, Vec<usize>)], cfg: &FusionConfig) -> Vec<(Gate, Vec<usize>)> {
    let mut remaining: Vec<usize> = (0..items.len()).collect();
    let mut out = Vec::new();
    while let Some(&first) = remaining.first() {
        let head = &items[first].0;
        let diagonal_mode = head.is_diagonal();
        let limit = if diagonal_mode { cfg.max_fused_diagonal_gate_size } else { cfg.max_fused_gate_size };
        let head_qubits: BTreeSet<usize> = head.qubits().into_iter().collect();
        if head_qubits.len() > limit {
            out.push(items[first].clone());
            remaining.remove(0);
            continue;
        }
        let mut span = head_qubits;
        let mut window = vec![first];
        let mut pending = Vec::new();
        let mut blocked: BTreeSet<usize> = BTreeSet::new();
        for &idx in &remaining[1..] {
            let g = &items[idx].0;
            let q: BTreeSet<usize> = g.qubits().into_iter().collect();
            let g_diag = g.is_diagonal();
            let absorbed = if !q.is_disjoint(&blocked) {
                false
            } else if diagonal_mode {
                g_diag && span.union(&q).count() <= limit
            } else if g_diag {
                q.is_subset(&span)
            } else {
                span.union(&q).count() <= limit
            };
            if absorbed {
                span.extend(q);
                window.push(idx);
            } else {
                // a diagonal gate left behind still commutes with a diagonal window
                if !(diagonal_mode && g_diag) {
                    blocked.extend(q);
                }
                pending.push(idx);
            }
        }
        let span: Vec<usize> = span.into_iter().collect();
        if window.len() == 1 {
            out.push(items[first].clone());
        } else {
            let gates: Vec<Gate> = window.iter().map(|&i| items[i].0.clone()).collect();
            let mut prov: Vec<usize> = window.iter().flat_map(|&i| items[i].1.iter().copied()).collect();
            prov.sort_unstable();
            let fused = if diagonal_mode {
                Gate::Permutation(fused_diagonal(&gates, &span).expect("span covers window"))
            } else {
                Gate::Dense(fused_matrix(&gates, &span).expect("span covers window"))
            };
            out.push((fused, prov));
        }
        remaining = pending;
    }
    out
}

fn local_positions(gate: &Gate, union: &[usize]) -> Result<(Vec<usize>, Vec<(usize, bool)>)> {
    let pos = |q: usize| {
        union
            .iter()
            .position(|&u| u == q)
            .ok_or_else(|| Error::InvalidArgument(format!("qubit {q} is not in the fused target set")))
    };
    let t = gate.targets().iter().map(|&q| pos(q)).collect::<Result<Vec<_>>>()?;
    let c = gate
        .controls()
        .iter()
        .map(|c: &Control| pos(c.qubit).map(|p| (p, c.value)))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, c))
}

fn apply_local(v: &mut [C64], m: usize, gate: &Gate, t: &[usize], c: &[(usize, bool)]) {
    match gate {
        Gate::Dense(d) => kernel::apply_dense(v, m, d.matrix(), t, c),
        Gate::Permutation(p) => kernel::apply_permutation(v, m, p.permutation(), p.diagonal_values(), t, c),
    }
}

/// Ordered product `G_last ... G_first`, each gate expanded to `union_targets`
/// (controls folded in as projectors). Matrix bit `j` is `union_targets[j]`.
pub fn fused_matrix(gates: &[Gate], union_targets: &[usize]) -> Result<DenseGate> {
    let m = union_targets.len();
    if m == 0 || m > MAX_FUSED_QUBITS {
        return Err(Error::InvalidArgument(format!("fused target count {m} not in 1..={MAX_FUSED_QUBITS}")));
    }
    let layouts = gates.iter().map(|g| local_positions(g, union_targets)).collect::<Result<Vec<_>>>()?;
    let dim = 1usize << m;
    let mut matrix = vec![C64::default(); dim * dim];
    let mut col = vec![C64::default(); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|z| *z = C64::default());
        col[j] = C64::new(1.0, 0.0);
        for (g, (t, c)) in gates.iter().zip(&layouts) {
            apply_local(&mut col, m, g, t, c);
        }
        for (r, z) in col.iter().enumerate() {
            matrix[r * dim + j] = *z;
        }
    }
    let unitary = gates.iter().all(|g| match g {
        Gate::Dense(d) => d.is_unitary(),
        Gate::Permutation(p) => p.diagonal_values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-8),
    });
    DenseGate::from_trusted(matrix, union_targets.to_vec(), unitary)
}

/// Product of diagonal gates as one diagonal gate over `union_targets`.
fn fused_diagonal(gates: &[Gate], union_targets: &[usize]) -> Result<PermutationGate> {
    let m = union_targets.len();
    let mut d = vec![C64::new(1.0, 0.0); 1 << m];
    for g in gates {
        debug_assert!(g.is_diagonal());
        let (t, c) = local_positions(g, union_targets)?;
        apply_local(&mut d, m, g, &t, &c);
    }
    PermutationGate::diagonal(d, union_targets.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{standard, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kron_x_identity() -> Vec<C64> {
        // X on bit 0, identity on bit 1
        let mut m = vec![C64::default(); 16];
        for r in 0..4usize {
            m[r * 4 + (r ^ 1)] = C64::new(1.0, 0.0);
        }
        m
    }

    fn random_unitary(k: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let d = 1 << k;
        let mut cols: Vec<Vec<C64>> = Vec::new();
        while cols.len() < d {
            let mut v: Vec<C64> = (0..d).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            for u in &cols {
                let dot: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            cols.push(v.into_iter().map(|z| z / nrm).collect());
        }
        let mut m = vec![C64::default(); d * d];
        for (j, col) in cols.iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                m[i * d + j] = *z;
            }
        }
        m
    }

    fn random_circuit(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Gate> {
        use rand::seq::SliceRandom;
        (0..len)
            .map(|_| {
                let mut q: Vec<usize> = (0..n).collect();
                q.shuffle(rng);
                match rng.random_range(0..4) {
                    0 => standard::cz(q[0], q[1]),
                    1 => standard::rz(rng.random::<f64>(), q[0]),
                    _ => {
                        let k = rng.random_range(1..=2);
                        DenseGate::new(random_unitary(k, rng), q[..k].to_vec()).unwrap().into()
                    }
                }
            })
            .collect()
    }

    fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
        let mut c = vec![C64::default(); d * d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    c[i * d + j] += a[i * d + k] * b[k * d + j];
                }
            }
        }
        c
    }

    #[test]
    fn two_hadamards_fuse_to_identity() {
        let f = fuse(&[standard::h(0), standard::h(0)], &FusionConfig::new(2, 2).unwrap());
        assert_eq!(f.len(), 1);
        let m = f.gates[0].to_dense();
        let id = [C64::new(1.0, 0.0), C64::default(), C64::default(), C64::new(1.0, 0.0)];
        assert!(m.matrix().iter().zip(&id).all(|(a, b)| (a - b).norm() < 1e-15));
        assert_eq!(f.provenance, vec![vec![0, 1]]);
    }

    #[test]
    fn diagonal_run_fuses_to_single_diagonal() {
        let gates = [standard::cz(0, 1), standard::rz(0.7, 1), standard::cz(1, 2)];
        let f = fuse(&gates, &FusionConfig::new(2, 3).unwrap());
        assert_eq!(f.len(), 1);
        let Gate::Permutation(p) = &f.gates[0] else { panic!("expected diagonal gate") };
        assert!(p.is_diagonal());
        // dense 8x8 product oracle over (q0,q1,q2)
        let span = p.targets().to_vec();
        let expand = |g: &Gate| fused_matrix(std::slice::from_ref(g), &span).unwrap().matrix().to_vec();
        let want = matmul(&expand(&gates[2]), &matmul(&expand(&gates[1]), &expand(&gates[0]), 8), 8);
        let got = p.to_dense();
        assert!(got.matrix().iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn fused_matrix_examples() {
        let m = fused_matrix(&[standard::x(0)], &[0, 1]).unwrap();
        assert_eq!(m.matrix(), &kron_x_identity()[..]);
        let m = fused_matrix(&[standard::cnot(0, 1), standard::cnot(0, 1)], &[0, 1]).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m.matrix()[r * 4 + c] - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
        assert!(fused_matrix(&[standard::x(2)], &[0, 1]).is_err());
    }

    #[test]
    fn fused_matrix_matches_left_multiplied_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let span = [4usize, 1, 7];
        let mut gates = Vec::new();
        let mut want = fused_matrix(&[], &span).unwrap().matrix().to_vec();
        for _ in 0..5 {
            let a = rng.random_range(0..3);
            let b = (a + rng.random_range(1..3)) % 3;
            let u = random_unitary(2, &mut rng);
            let g: Gate = DenseGate::new(u.clone(), vec![span[a], span[b]]).unwrap().into();
            // expand u to the 3-qubit span by index arithmetic
            let mut e = vec![C64::default(); 64];
            for col in 0..8usize {
                let sc = ((col >> a) & 1) | (((col >> b) & 1) << 1);
                for sr in 0..4usize {
                    let row = (col & !(1 << a) & !(1 << b)) | ((sr & 1) << a) | ((sr >> 1) << b);
                    e[row * 8 + col] += u[sr * 4 + sc];
                }
            }
            want = matmul(&e, &want, 8);
            gates.push(g);
        }
        let got = fused_matrix(&gates, &span).unwrap();
        assert!(got.matrix().iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn random_circuit_equivalence_and_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 8;
        let circuit = random_circuit(n, 200, &mut rng);
        let f = fuse(&circuit, &FusionConfig::new(4, 6).unwrap());
        assert!(f.len() < circuit.len());
        assert!(f.gates.iter().all(|g| g.qubits().len() <= 6));
        assert!(f.gates.iter().filter(|g| matches!(g, Gate::Dense(_))).all(|g| g.qubits().len() <= 4 || circuit.iter().any(|c| c == g)));
        let mut a = StateVector::<f64>::zero(n).unwrap();
        let mut b = a.clone();
        a.apply_circuit(&circuit).unwrap();
        b.apply_circuit(&f.gates).unwrap();
        let err = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
        let mut covered: Vec<usize> = f.provenance.iter().flatten().copied().collect();
        covered.sort_unstable();
        assert_eq!(covered, (0..circuit.len()).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_gates_pass_through() {
        let big = DenseGate::new(random_unitary(3, &mut ChaCha8Rng::seed_from_u64(3)), vec![0, 1, 2]).unwrap();
        let f = fuse(&[big.clone().into(), standard::h(0)], &FusionConfig::new(2, 2).unwrap());
        assert_eq!(f.gates[0], Gate::Dense(big));
    }

    #[test]
    fn diagonal_only_circuits_stay_diagonal() {
        let gates: Vec<Gate> = (0..12).map(|i| standard::rzz(0.1 * i as f64, i % 5, (i + 1) % 5)).collect();
        let f = fuse(&gates, &FusionConfig::new(3, 3).unwrap());
        assert!(f.gates.iter().all(|g| matches!(g, Gate::Permutation(_)) && g.is_diagonal()));
        assert!(f.len() < gates.len());
    }

    #[test]
    fn config_validation() {
        assert!(FusionConfig::new(0, 2).is_err());
        assert!(FusionConfig::new(2, 11).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn fusion_is_idempotent_in_count(seed in 0u64..10_000, dense in 1usize..5, diag in 1usize..6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let circuit = random_circuit(6, 60, &mut rng);
                let cfg = FusionConfig::new(dense, diag).unwrap();
                let once = fuse(&circuit, &cfg);
                let twice = fuse(&once.gates, &cfg);
                prop_assert_eq!(once.len(), twice.len());
            }

            #[test]
            fn fusion_preserves_semantics(seed in 0u64..10_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(2..=7);
                let circuit = random_circuit(n, 40, &mut rng);
                let f = fuse(&circuit, &FusionConfig::new(3, 4).unwrap());
                let mut a = StateVector::<f64>::zero(n).unwrap();
                let mut b = a.clone();
                a.apply_circuit(&circuit).unwrap();
                b.apply_circuit(&f.gates).unwrap();
                let err = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                prop_assert!(err < 1e-10);
            }
        }
    }
}
