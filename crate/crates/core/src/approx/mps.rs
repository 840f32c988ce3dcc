//! Matrix product state simulator.

use serde::{Deserialize, Serialize};

use super::decomp::{gate_split, tensor_qr, Partition, SplitAlgorithm, SvdPolicy};
use crate::error::{Error, Result};
use crate::fusion::fused_matrix;
use crate::numeric::{counter_uniform, C64};
use crate::statevec::{DenseGate, Gate};
use crate::tn::{contract_pair, decode_c64, encode_c64, Label, Tensor};

fn rename(t: Tensor, from: Label, to: Label) -> Result<Tensor> {
    let m = t.modes().iter().map(|&l| if l == from { to } else { l }).collect();
    t.relabeled(m)
}

/// Chain of rank-3 site tensors `(left bond, physical, right bond)`. Qubit `q`
/// lives on site `q`; amplitude index bit `q` is qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    n: usize,
    sites: Vec<Tensor>,
    center: Option<usize>,
    algorithm: SplitAlgorithm,
    discarded: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    num_qubits: usize,
    bond_extents: Vec<usize>,
    center: Option<usize>,
}

impl MpsState {
    /// `|0...0>`
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        let mut m = MpsState { n, sites: Vec::with_capacity(n), center: Some(0), algorithm: SplitAlgorithm::Reduced, discarded: 0.0 };
        for i in 0..n {
            let t = Tensor::new(m.site_modes(i), vec![1, 2, 1], vec![C64::new(1.0, 0.0), C64::default()])?;
            m.sites.push(t);
        }
        Ok(m)
    }

    pub fn with_algorithm(mut self, algorithm: SplitAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    fn bond(&self, i: usize) -> Label {
        Label(i as u32)
    }

    fn phys(&self, i: usize) -> Label {
        Label((self.n + 1 + i) as u32)
    }

    fn scratch(&self, k: u32) -> Label {
        Label((2 * self.n + 2) as u32 + k)
    }

    fn site_modes(&self, i: usize) -> Vec<Label> {
        vec![self.bond(i), self.phys(i), self.bond(i + 1)]
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    /// Extents of the `n + 1` bonds, boundaries included.
    pub fn bond_extents(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.sites.iter().map(|s| s.extents()[0]).collect();
        b.push(self.sites[self.n - 1].extents()[2]);
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_extents().into_iter().max().unwrap_or(1)
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Sum of squared singular values discarded by all truncations so far.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    fn shift_right(&mut self, j: usize) -> Result<()> {
        let (l, p, r) = (self.bond(j), self.phys(j), self.bond(j + 1));
        let (q, rr) = tensor_qr(&self.sites[j], &[l, p], &[r])?;
        let x = *q.modes().last().expect("bond");
        self.sites[j] = rename(q, x, r)?;
        let tmp = self.scratch(0);
        let rr = rename(rr, x, tmp)?;
        let next = contract_pair(&rr, &self.sites[j + 1], &[tmp, self.phys(j + 1), self.bond(j + 2)])?;
        self.sites[j + 1] = rename(next, tmp, r)?.permuted(&self.site_modes(j + 1))?;
        Ok(())
    }

    fn shift_left(&mut self, j: usize) -> Result<()> {
        let (l, p, r) = (self.bond(j), self.phys(j), self.bond(j + 1));
        let (q, rr) = tensor_qr(&self.sites[j], &[p, r], &[l])?;
        let x = *q.modes().last().expect("bond");
        self.sites[j] = rename(q, x, l)?.permuted(&self.site_modes(j))?;
        let tmp = self.scratch(0);
        let rr = rename(rr, x, tmp)?;
        let prev = contract_pair(&self.sites[j - 1], &rr, &[self.bond(j - 1), self.phys(j - 1), tmp])?;
        self.sites[j - 1] = rename(prev, tmp, l)?.permuted(&self.site_modes(j - 1))?;
        Ok(())
    }

    /// Makes every site left of `t` a left isometry and every site right of
    /// it a right isometry.
    pub fn move_center(&mut self, t: usize) -> Result<()> {
        if t >= self.n {
            return Err(Error::QubitOutOfRange { qubit: t, num_qubits: self.n });
        }
        let (from_left, from_right) = match self.center {
            Some(c) => (c.min(t), c.max(t)),
            None => (0, self.n - 1),
        };
        for j in from_left..t {
            self.shift_right(j)?;
        }
        for j in (t + 1..=from_right).rev() {
            self.shift_left(j)?;
        }
        self.center = Some(t);
        Ok(())
    }

    /// Applies a one- or two-qubit gate. Controls count towards the arity.
    pub fn apply(&mut self, g: &DenseGate, policy: &SvdPolicy) -> Result<()> {
        policy.validate()?;
        let mut qubits: Vec<usize> = g.targets().to_vec();
        qubits.extend(g.controls().iter().map(|c| c.qubit));
        if qubits.len() > 2 {
            return Err(Error::ArityTooLarge(qubits.len(), 2));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n) {
            return Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.n });
        }
        let matrix = if g.controls().is_empty() {
            g.matrix().to_vec()
        } else {
            fused_matrix(&[Gate::Dense(g.clone())], &qubits)?.matrix().to_vec()
        };
        match qubits[..] {
            [q] => self.apply_one(&matrix, q, g.is_unitary()),
            [q0, q1] => self.apply_two(&matrix, q0, q1, policy),
            _ => unreachable!("arity checked"),
        }
    }

    pub fn apply_gate(&mut self, g: &Gate, policy: &SvdPolicy) -> Result<()> {
        self.apply(&g.to_dense(), policy)
    }

    pub fn apply_circuit<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>, policy: &SvdPolicy) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.apply_gate(g, policy))
    }

    fn apply_one(&mut self, m: &[C64], q: usize, unitary: bool) -> Result<()> {
        let site = &self.sites[q];
        let (dl, dr) = (site.extents()[0], site.extents()[2]);
        let src = site.data();
        let mut out = vec![C64::default(); src.len()];
        for l in 0..dl {
            for po in 0..2 {
                for pi in 0..2 {
                    let w = m[po * 2 + pi];
                    if w == C64::default() {
                        continue;
                    }
                    for r in 0..dr {
                        out[(l * 2 + po) * dr + r] += w * src[(l * 2 + pi) * dr + r];
                    }
                }
            }
        }
        self.sites[q] = Tensor::new(self.site_modes(q), vec![dl, 2, dr], out)?;
        if !unitary && self.center != Some(q) {
            self.center = None;
        }
        Ok(())
    }

    /// `m` has matrix bit 0 on `q0` and bit 1 on `q1`.
    fn apply_two(&mut self, m: &[C64], q0: usize, q1: usize, policy: &SvdPolicy) -> Result<()> {
        let (lo, hi) = (q0.min(q1), q0.max(q1));
        let swap = swap_matrix();
        for s in (lo + 1..hi).rev() {
            self.split_adjacent(&swap, s, false, policy)?;
        }
        // qubit `hi` now sits on site lo + 1
        self.split_adjacent(m, lo, q0 == lo, policy)?;
        for s in lo + 1..hi {
            self.split_adjacent(&swap, s, false, policy)?;
        }
        Ok(())
    }

    /// Applies `m` to sites `s`, `s + 1`; `low_first` says matrix bit 0 is site `s`.
    fn split_adjacent(&mut self, m: &[C64], s: usize, low_first: bool, policy: &SvdPolicy) -> Result<()> {
        self.move_center(s)?;
        let (ka, kb) = if low_first { (0, 1) } else { (1, 0) };
        let mut g = vec![C64::default(); 16];
        for oa in 0..2 {
            for ob in 0..2 {
                for ia in 0..2 {
                    for ib in 0..2 {
                        let row = (oa << ka) | (ob << kb);
                        let col = (ia << ka) | (ib << kb);
                        g[((oa * 2 + ob) * 2 + ia) * 2 + ib] = m[row * 4 + col];
                    }
                }
            }
        }
        let gate = Tensor::new(vec![self.scratch(1), self.scratch(2), self.phys(s), self.phys(s + 1)], vec![2; 4], g)?;
        let policy = SvdPolicy { partition: Some(Partition::ToV), ..*policy };
        let (a, b, info) = gate_split(&self.sites[s], &self.sites[s + 1], &gate, self.algorithm, &policy)?;
        self.sites[s] = a;
        self.sites[s + 1] = b;
        self.discarded += info.discarded_weight;
        self.center = Some(s + 1);
        Ok(())
    }

    /// Amplitude of the basis state whose bit `q` is qubit `q`.
    pub fn amplitude(&self, index: u64) -> C64 {
        let mut v = vec![C64::new(1.0, 0.0)];
        for (j, site) in self.sites.iter().enumerate() {
            let p = ((index >> j) & 1) as usize;
            v = bond_step(&v, site, p);
        }
        v[0]
    }

    /// Full `2^n` amplitude vector.
    pub fn to_statevector(&self) -> Vec<C64> {
        let mut psi = vec![C64::new(1.0, 0.0)];
        let mut dim = 1usize;
        for site in &self.sites {
            let (dl, dr) = (site.extents()[0], site.extents()[2]);
            let a = site.data();
            let mut next = vec![C64::default(); dim * 2 * dr];
            for p in 0..2 {
                for b in 0..dim {
                    let row = &mut next[(b + p * dim) * dr..(b + p * dim + 1) * dr];
                    for l in 0..dl {
                        let x = psi[b * dl + l];
                        if x == C64::default() {
                            continue;
                        }
                        for (o, &y) in row.iter_mut().zip(&a[(l * 2 + p) * dr..(l * 2 + p + 1) * dr]) {
                            *o += x * y;
                        }
                    }
                }
            }
            psi = next;
            dim *= 2;
        }
        psi
    }

    pub fn norm_squared(&self) -> f64 {
        let mut m = self.clone();
        if m.move_center(0).is_err() {
            return 0.0;
        }
        m.sites[0].norm().powi(2)
    }

    /// `|<reference|self>|^2 / (<self|self> <reference|reference>)`.
    pub fn fidelity(&self, reference: &[C64]) -> Result<f64> {
        let psi = self.to_statevector();
        if psi.len() != reference.len() {
            return Err(Error::DimensionMismatch { expected: psi.len(), actual: reference.len() });
        }
        let overlap: C64 = reference.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        let na: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
        let nb: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        Ok(overlap.norm_sqr() / (na * nb))
    }

    /// Draws `shots` bitstrings site by site from conditional probabilities.
    /// Shot `i` at site `j` uses the counter-based variate `(seed, i * n + j)`.
    pub fn sample(&self, shots: usize, seed: u64) -> Result<Vec<u64>> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        if self.n > 64 {
            return Err(Error::InvalidArgument("sampling returns 64-bit strings; at most 64 sites".into()));
        }
        let mut m = self.clone();
        m.move_center(0)?;
        let mut out = Vec::with_capacity(shots);
        for shot in 0..shots {
            let mut v = vec![C64::new(1.0, 0.0)];
            let mut bits = 0u64;
            for (j, site) in m.sites.iter().enumerate() {
                let w0 = bond_step(&v, site, 0);
                let w1 = bond_step(&v, site, 1);
                let p0: f64 = w0.iter().map(|z| z.norm_sqr()).sum();
                let p1: f64 = w1.iter().map(|z| z.norm_sqr()).sum();
                if p0 + p1 <= 0.0 {
                    return Err(Error::DegenerateState(p0 + p1));
                }
                let u = counter_uniform(seed, (shot * self.n + j) as u64);
                if u * (p0 + p1) < p0 {
                    v = w0;
                } else {
                    bits |= 1 << j;
                    v = w1;
                }
            }
            out.push(bits);
        }
        Ok(out)
    }

    /// JSON header line, then the site tensors as little-endian `f64` pairs.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header { num_qubits: self.n, bond_extents: self.bond_extents(), center: self.center };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        for s in &self.sites {
            out.extend(encode_c64(s.data()));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Serde("missing MPS header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..split])?;
        let n = header.num_qubits;
        if n == 0 || header.bond_extents.len() != n + 1 || header.center.is_some_and(|c| c >= n) {
            return Err(Error::Serde("inconsistent MPS header".into()));
        }
        let data = decode_c64(&bytes[split + 1..])?;
        let mut m = MpsState { n, sites: Vec::with_capacity(n), center: header.center, algorithm: SplitAlgorithm::Reduced, discarded: 0.0 };
        let mut off = 0;
        for i in 0..n {
            let (dl, dr) = (header.bond_extents[i], header.bond_extents[i + 1]);
            let len = dl * 2 * dr;
            let chunk = data.get(off..off + len).ok_or_else(|| Error::Serde("truncated MPS data".into()))?;
            m.sites.push(Tensor::new(m.site_modes(i), vec![dl, 2, dr], chunk.to_vec())?);
            off += len;
        }
        if off != data.len() {
            return Err(Error::Serde("trailing MPS data".into()));
        }
        Ok(m)
    }
}

/// `v' = v . A[:, p, :]`
fn bond_step(v: &[C64], site: &Tensor, p: usize) -> Vec<C64> {
    let (dl, dr) = (site.extents()[0], site.extents()[2]);
    let a = site.data();
    let mut out = vec![C64::default(); dr];
    for l in 0..dl {
        for (o, &y) in out.iter_mut().zip(&a[(l * 2 + p) * dr..(l * 2 + p + 1) * dr]) {
            *o += v[l] * y;
        }
    }
    out
}

fn swap_matrix() -> Vec<C64> {
    let mut m = vec![C64::default(); 16];
    for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        m[r * 4 + c] = C64::new(1.0, 0.0);
    }
    m
}
