//! Circuit to tensor-network conversion.

use serde::{Deserialize, Serialize};

use super::Circuit;
use crate::error::{Error, Result};
use crate::fusion::fused_matrix;
use crate::numeric::C64;
use crate::statevec::{Gate, Pauli, PauliString};
use crate::tn::{to_einsum, Label, Tensor, TensorNetwork};

/// What the network evaluates to. Bit strings are written most significant
/// qubit first, so character `i` of an `n`-bit string is qubit `n - 1 - i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// All `2^n` amplitudes; flat index bit `q` is qubit `q`.
    StateVector,
    Amplitude { bits: String },
    /// Every qubit is either fixed or open; flat index bit `j` is `open[j]`.
    BatchedAmplitudes { fixed: Vec<(usize, bool)>, open: Vec<usize> },
    /// Reduced density matrix of `kept`, with `projected` qubits fixed to the
    /// given values (unnormalized) and the rest traced out. Rows index the
    /// ket, columns the bra; index bit `j` is `kept[j]`.
    Rdm { kept: Vec<usize>, projected: Vec<(usize, bool)> },
    /// `sum_k <psi| P_k |psi>`, coefficients included.
    Expectation { terms: Vec<PauliString> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionTarget {
    pub kind: TargetKind,
    /// Drop gates outside the reverse lightcone of the observed qubits. Only
    /// valid for `Rdm` and `Expectation`.
    #[serde(default)]
    pub lightcone: bool,
}

impl ConversionTarget {
    pub fn new(kind: TargetKind) -> Self {
        ConversionTarget { kind, lightcone: false }
    }

    pub fn state_vector() -> Self {
        Self::new(TargetKind::StateVector)
    }

    pub fn amplitude(bits: &str) -> Self {
        Self::new(TargetKind::Amplitude { bits: bits.to_string() })
    }

    pub fn batched_amplitudes(fixed: Vec<(usize, bool)>, open: Vec<usize>) -> Self {
        Self::new(TargetKind::BatchedAmplitudes { fixed, open })
    }

    pub fn rdm(kept: Vec<usize>, projected: Vec<(usize, bool)>) -> Self {
        Self::new(TargetKind::Rdm { kept, projected })
    }

    pub fn expectation(terms: Vec<PauliString>) -> Self {
        Self::new(TargetKind::Expectation { terms })
    }

    pub fn with_lightcone(mut self) -> Self {
        self.lightcone = true;
        self
    }

    /// Qubits whose reduced state the target depends on, or `None` for
    /// pure-state targets.
    fn observed(&self) -> Option<Vec<usize>> {
        match &self.kind {
            TargetKind::Rdm { kept, projected } => Some(kept.iter().copied().chain(projected.iter().map(|p| p.0)).collect()),
            TargetKind::Expectation { terms } => {
                let mut q: Vec<usize> = terms.iter().flat_map(|t| t.support().map(|f| f.0)).collect();
                q.sort_unstable();
                q.dedup();
                Some(q)
            }
            _ => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |q: usize| if q < n { Ok(()) } else { Err(Error::QubitOutOfRange { qubit: q, num_qubits: n }) };
        let distinct = |qs: &mut dyn Iterator<Item = usize>| -> Result<()> {
            let mut seen = vec![false; n];
            for q in qs {
                check(q)?;
                if std::mem::replace(&mut seen[q], true) {
                    return Err(Error::DuplicateQubit(q));
                }
            }
            Ok(())
        };
        match &self.kind {
            TargetKind::StateVector => {}
            TargetKind::Amplitude { bits } => {
                parse_bits(bits, n)?;
            }
            TargetKind::BatchedAmplitudes { fixed, open } => {
                distinct(&mut fixed.iter().map(|f| f.0).chain(open.iter().copied()))?;
                if fixed.len() + open.len() != n {
                    return Err(Error::InvalidArgument(format!("fixed and open qubits must cover all {n} qubits")));
                }
            }
            TargetKind::Rdm { kept, projected } => distinct(&mut kept.iter().copied().chain(projected.iter().map(|p| p.0)))?,
            TargetKind::Expectation { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidArgument("expectation needs at least one Pauli string".into()));
                }
                for t in terms {
                    t.factors().iter().try_for_each(|f| check(f.0))?;
                }
            }
        }
        if self.lightcone && self.observed().is_none() {
            return Err(Error::InvalidArgument("lightcone reduction applies to rdm and expectation targets only".into()));
        }
        Ok(())
    }
}

/// Per-qubit values of an `n`-character bit string.
fn parse_bits(bits: &str, n: usize) -> Result<Vec<bool>> {
    if bits.chars().count() != n {
        return Err(Error::InvalidArgument(format!("bit string `{bits}` does not have {n} bits")));
    }
    let mut v: Vec<bool> = bits
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::InvalidArgument(format!("bit string `{bits}` contains `{c}`"))),
        })
        .collect::<Result<_>>()?;
    v.reverse();
    Ok(v)
}

/// The gates inside the reverse lightcone of `observed`, in circuit order.
pub fn lightcone_circuit(c: &Circuit, observed: &[usize]) -> Circuit {
    let mut live = vec![false; c.num_qubits()];
    observed.iter().for_each(|&q| live[q] = true);
    let mut keep = vec![false; c.len()];
    for (i, op) in c.ops().iter().enumerate().rev() {
        if op.qubits().any(|q| live[q]) {
            keep[i] = true;
            op.qubits().for_each(|q| live[q] = true);
        }
    }
    let mut out = Circuit::new(c.num_qubits()).expect("non-empty register");
    out.ops = c.ops().iter().zip(&keep).filter(|p| *p.1).map(|p| p.0.clone()).collect();
    out
}

/// Builds the network of `target` for `c`, dropping gates (and idle qubits)
/// outside the reverse lightcone of the observed qubits. The value is the
/// same as that of the full network; the tensor count never grows.
pub fn apply_lightcone(c: &Circuit, target: &ConversionTarget) -> Result<TensorNetwork> {
    circuit_to_network(c, &ConversionTarget { lightcone: true, ..target.clone() })
}

struct Builder {
    tensors: Vec<Tensor>,
    next: u32,
}

impl Builder {
    fn fresh(&mut self) -> Label {
        self.next += 1;
        Label(self.next - 1)
    }

    fn push(&mut self, modes: Vec<Label>, extents: Vec<usize>, data: Vec<C64>) {
        self.tensors.push(Tensor::new(modes, extents, data).expect("consistent shape"));
    }

    fn basis(&mut self, wire: Label, bit: bool) {
        let one = C64::new(1.0, 0.0);
        self.push(vec![wire], vec![2], if bit { vec![C64::default(), one] } else { vec![one, C64::default()] });
    }

    /// Adds `|0>` inputs on the active qubits and one tensor per gate, modes
    /// `[out..., in...]` over the gate's qubits. Returns the final wires.
    fn circuit(&mut self, active: &[bool], gates: &[(Vec<usize>, Vec<C64>)], conj: bool) -> Vec<Option<Label>> {
        let mut wires: Vec<Option<Label>> = active.iter().map(|&a| a.then_some(Label(0))).collect();
        for w in wires.iter_mut().flatten() {
            *w = self.fresh();
            self.basis(*w, false);
        }
        for (qubits, m) in gates {
            let k = qubits.len();
            let ins: Vec<Label> = qubits.iter().map(|&q| wires[q].expect("gate on an active qubit")).collect();
            let outs: Vec<Label> = (0..k).map(|_| self.fresh()).collect();
            let dim = 1usize << k;
            let mut data = Vec::with_capacity(dim * dim);
            for flat in 0..dim * dim {
                let bit = |mode: usize| (flat >> (2 * k - 1 - mode)) & 1;
                let row: usize = (0..k).map(|j| bit(j) << j).sum();
                let col: usize = (0..k).map(|j| bit(k + j) << j).sum();
                let z = m[row * dim + col];
                data.push(if conj { z.conj() } else { z });
            }
            self.push(outs.iter().chain(&ins).copied().collect(), vec![2; 2 * k], data);
            for (&q, &o) in qubits.iter().zip(&outs) {
                wires[q] = Some(o);
            }
        }
        wires
    }
}

fn gate_matrix(g: &Gate) -> Result<(Vec<usize>, Vec<C64>)> {
    let qubits = g.qubits();
    let m = if g.controls().is_empty() { g.to_dense().matrix().to_vec() } else { fused_matrix(std::slice::from_ref(g), &qubits)?.matrix().to_vec() };
    Ok((qubits, m))
}

/// Turns a circuit applied to `|0...0>` into a tensor network whose
/// contraction is the requested quantity: one rank-1 tensor per input, one
/// rank-`2k` tensor per `k`-qubit gate (controls included), basis projectors
/// on closed outputs, and for `Rdm`/`Expectation` a ket network joined to its
/// conjugate. Multi-term expectations share one extra summed label indexing
/// the term, carried by every Pauli tensor and a coefficient vector.
pub fn circuit_to_network(c: &Circuit, target: &ConversionTarget) -> Result<TensorNetwork> {
    let n = c.num_qubits();
    target.validate(n)?;
    let (circuit, active) = match (&target.observed(), target.lightcone) {
        (Some(obs), true) => {
            let reduced = lightcone_circuit(c, obs);
            let mut active = vec![false; n];
            obs.iter().chain(reduced.ops().iter().flat_map(|op| op.targets.iter().chain(&op.controls))).for_each(|&q| active[q] = true);
            // an empty cone still needs one <0|0> pair to carry the value 1
            active[0] |= obs.is_empty();
            (reduced, active)
        }
        _ => (c.clone(), vec![true; n]),
    };
    let gates = circuit.gates().iter().map(gate_matrix).collect::<Result<Vec<_>>>()?;
    let mut b = Builder { tensors: Vec::new(), next: 0 };
    let ket = b.circuit(&active, &gates, false);
    let wire = |q: usize| ket[q].expect("active qubit");
    let mut output = Vec::new();
    match &target.kind {
        TargetKind::StateVector => output = (0..n).rev().map(wire).collect(),
        TargetKind::Amplitude { bits } => {
            for (q, bit) in parse_bits(bits, n)?.into_iter().enumerate() {
                b.basis(wire(q), bit);
            }
        }
        TargetKind::BatchedAmplitudes { fixed, open } => {
            for &(q, bit) in fixed {
                b.basis(wire(q), bit);
            }
            output = open.iter().rev().map(|&q| wire(q)).collect();
        }
        TargetKind::Rdm { .. } | TargetKind::Expectation { .. } => {
            let split = b.tensors.len();
            let bra = b.circuit(&active, &gates, true);
            let bra_wire = |q: usize| bra[q].expect("active qubit");
            // qubits joined ket-to-bra (traced or identity)
            let mut joined = active.clone();
            match &target.kind {
                TargetKind::Rdm { kept, projected } => {
                    kept.iter().for_each(|&q| joined[q] = false);
                    for &(q, bit) in projected {
                        joined[q] = false;
                        b.basis(wire(q), bit);
                        b.basis(bra_wire(q), bit);
                    }
                    output = kept.iter().rev().map(|&q| wire(q)).chain(kept.iter().rev().map(|&q| bra_wire(q))).collect();
                }
                TargetKind::Expectation { terms } => {
                    let term = b.fresh();
                    let t = terms.len();
                    for q in target.observed().expect("expectation") {
                        joined[q] = false;
                        let mut data = Vec::with_capacity(4 * t);
                        for p in terms {
                            let pauli = p.factors().iter().find(|f| f.0 == q).map_or(Pauli::I, |f| f.1);
                            data.extend(pauli.matrix());
                        }
                        b.push(vec![term, bra_wire(q), wire(q)], vec![t, 2, 2], data);
                    }
                    b.push(vec![term], vec![t], terms.iter().map(|p| p.coefficient()).collect());
                }
                _ => unreachable!(),
            }
            let rename: Vec<(Label, Label)> = (0..n).filter(|&q| joined[q]).map(|q| (bra_wire(q), wire(q))).collect();
            for t in &mut b.tensors[split..] {
                let modes: Vec<Label> = t.modes().iter().map(|l| rename.iter().find(|r| r.0 == *l).map_or(*l, |r| r.1)).collect();
                *t = std::mem::replace(t, Tensor::scalar(C64::default())).relabeled(modes)?;
            }
        }
    }
    let mut tn = TensorNetwork::new();
    for t in b.tensors {
        tn.add(t)?;
    }
    tn.set_output(output)?;
    Ok(tn)
}

/// Einsum expression (in the [`crate::tn::parse_einsum`] dialect) and operands
/// of [`circuit_to_network`].
pub fn circuit_to_einsum(c: &Circuit, target: &ConversionTarget) -> Result<(String, Vec<Tensor>)> {
    let tn = circuit_to_network(c, target)?;
    let operands = tn
        .tensors()
        .iter()
        .map(|s| Tensor::new(s.modes.clone(), s.extents.clone(), s.data.clone().expect("bound by construction")))
        .collect::<Result<Vec<_>>>()?;
    Ok((to_einsum(&tn), operands))
}
