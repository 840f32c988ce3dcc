//! Single-segment state-vector engine.

mod gate;
pub(crate) mod kernel;

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numeric::{counter_uniform, norm_squared, to_c64, to_complex, Real, C64};

pub use gate::{standard, Control, DenseGate, Gate, Pauli, PauliString, PermutationGate};
pub(crate) use kernel::PauliMasks;

/// Largest register the engine will allocate.
pub const MAX_QUBITS: usize = 40;

/// Probabilities below this are treated as a degenerate (zero) state.
const DEGENERATE_NORM: f64 = 1e-12;

/// `2^n` complex amplitudes plus the mapping from qubits to index bits.
///
/// Qubit `q` initially lives at index bit `q` (little-endian). Index-bit swaps
/// move amplitudes and update the mapping, so gate and measurement calls keep
/// addressing logical qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real = f64> {
    amps: Vec<Complex<T>>,
    num_qubits: usize,
    bit_map: Vec<usize>,
}

impl<T: Real> StateVector<T> {
    /// `|0...0>`
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "{num_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit"
            )));
        }
        let mut amps = vec![Complex::<T>::default(); 1 << num_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(StateVector { amps, num_qubits, bit_map: (0..num_qubits).collect() })
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: u64) -> Result<Self> {
        let mut sv = Self::zero(num_qubits)?;
        if index >= (1u64 << num_qubits) {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        sv.amps[0] = Complex::default();
        sv.amps[index as usize] = Complex::new(T::one(), T::zero());
        Ok(sv)
    }

    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let n = amps.len().trailing_zeros() as usize;
        Ok(StateVector { amps, num_qubits: n, bit_map: (0..n).collect() })
    }

    /// Raw amplitudes with an explicit qubit -> index-bit mapping.
    pub(crate) fn from_parts(amps: Vec<Complex<T>>, bit_map: Vec<usize>) -> Self {
        let num_qubits = amps.len().trailing_zeros() as usize;
        debug_assert_eq!(bit_map.len(), num_qubits);
        StateVector { amps, num_qubits, bit_map }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Raw amplitudes in the current index-bit layout.
    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// Qubit -> index bit.
    pub fn bit_map(&self) -> &[usize] {
        &self.bit_map
    }

    /// Amplitudes ordered so that bit `q` of the position is qubit `q`.
    pub fn logical_amplitudes(&self) -> Vec<Complex<T>> {
        let identity: Vec<usize> = (0..self.num_qubits).collect();
        self.access(&identity, 0..self.amps.len()).expect("identity ordering is valid")
    }

    pub fn norm_squared(&self) -> f64 {
        norm_squared(&self.amps)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
        }
        Ok(())
    }

    fn resolve(&self, targets: &[usize], controls: &[Control]) -> Result<(Vec<usize>, Vec<(usize, bool)>)> {
        for &q in targets.iter().chain(controls.iter().map(|c| &c.qubit)) {
            self.check_qubit(q)?;
        }
        let t = targets.iter().map(|&q| self.bit_map[q]).collect();
        let c = controls.iter().map(|c| (self.bit_map[c.qubit], c.value)).collect();
        Ok((t, c))
    }

    pub fn apply_matrix(&mut self, g: &DenseGate) -> Result<()> {
        let (t, c) = self.resolve(g.targets(), g.controls())?;
        kernel::apply_dense(&mut self.amps, self.num_qubits, g.matrix(), &t, &c);
        Ok(())
    }

    pub fn apply_generalized_permutation(&mut self, g: &PermutationGate) -> Result<()> {
        let (t, c) = self.resolve(g.targets(), g.controls())?;
        kernel::apply_permutation(
            &mut self.amps,
            self.num_qubits,
            g.permutation(),
            g.diagonal_values(),
            &t,
            &c,
        );
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        match g {
            Gate::Dense(d) => self.apply_matrix(d),
            Gate::Permutation(p) => self.apply_generalized_permutation(p),
        }
    }

    pub fn apply_circuit<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    pub(crate) fn pauli_masks(&self, p: &PauliString) -> Result<PauliMasks> {
        let mut m = PauliMasks { x: 0, z: 0, ny: 0 };
        for &(q, op) in p.factors() {
            self.check_qubit(q)?;
            let bit = 1usize << self.bit_map[q];
            match op {
                Pauli::I => {}
                Pauli::X => m.x |= bit,
                Pauli::Z => m.z |= bit,
                Pauli::Y => {
                    m.x |= bit;
                    m.z |= bit;
                    m.ny += 1;
                }
            }
        }
        Ok(m)
    }

    /// `exp(-i theta/2 P)` for the Pauli factors of `p` (the coefficient is not
    /// part of the generator).
    pub fn apply_pauli_rotation(&mut self, theta: f64, p: &PauliString) -> Result<()> {
        if p.factors().is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        let masks = self.pauli_masks(p)?;
        kernel::apply_pauli_rotation(&mut self.amps, theta, masks);
        Ok(())
    }

    /// Marginal distribution over `qubits`; outcome bit `j` is `qubits[j]`.
    pub fn probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        let (bits, _) = self.resolve(qubits, &[])?;
        let mut sorted = bits.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateQubit(qubits[0]));
        }
        Ok(kernel::marginal_probabilities(&self.amps, self.num_qubits, &bits))
    }

    /// Measures `qubits` using `random_value` in `[0,1)` through the inverse CDF
    /// over outcomes in ascending order. Collapses and renormalizes if asked.
    pub fn measure(&mut self, qubits: &[usize], random_value: f64, collapse: bool) -> Result<u64> {
        let probs = self.probabilities(qubits)?;
        let total: f64 = crate::numeric::pairwise_sum(&probs);
        if total < DEGENERATE_NORM {
            return Err(Error::DegenerateState(total));
        }
        let outcome = inverse_cdf(&probs, total, random_value);
        if collapse {
            let (bits, _) = self.resolve(qubits, &[])?;
            let scale = 1.0 / probs[outcome].sqrt();
            kernel::collapse(&mut self.amps, &bits, outcome, scale);
        }
        Ok(outcome as u64)
    }

    pub fn expectation_dense(&self, obs: &DenseGate) -> Result<C64> {
        let (t, c) = self.resolve(obs.targets(), obs.controls())?;
        Ok(kernel::expectation_dense(&self.amps, self.num_qubits, obs.matrix(), &t, &c))
    }

    /// `sum_k c_k <psi|P_k|psi>`
    pub fn expectation_pauli(&self, terms: &[PauliString]) -> Result<C64> {
        let mut acc = C64::default();
        for p in terms {
            let masks = self.pauli_masks(p)?;
            acc += p.coefficient() * kernel::expectation_pauli(&self.amps, masks);
        }
        Ok(acc)
    }

    /// Draws `shots` outcomes over `qubit_order` without modifying the state.
    /// Shot `i` uses the counter-based variate `(seed, i)`.
    pub fn sample(&self, shots: usize, qubit_order: &[usize], seed: u64) -> Result<Vec<u64>> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        let probs = self.probabilities(qubit_order)?;
        let total = crate::numeric::pairwise_sum(&probs);
        if total < DEGENERATE_NORM {
            return Err(Error::DegenerateState(total));
        }
        let sampler = CdfSampler::new(&probs);
        Ok((0..shots as u64).map(|i| sampler.draw(counter_uniform(seed, i)) as u64).collect())
    }

    /// Amplitudes re-indexed so that output bit `k` holds qubit `ordering[k]`,
    /// for output positions in `range`.
    pub fn access(&self, ordering: &[usize], range: std::ops::Range<usize>) -> Result<Vec<Complex<T>>> {
        let src_bits = self.ordering_bits(ordering)?;
        if range.end > self.amps.len() || range.start > range.end {
            return Err(Error::InvalidArgument(format!("range {range:?} out of bounds")));
        }
        Ok(range.map(|j| self.amps[scatter(j, &src_bits)]).collect())
    }

    /// Inverse of [`access`](Self::access): writes `values` starting at output
    /// position `begin`.
    pub fn set_access(&mut self, ordering: &[usize], begin: usize, values: &[Complex<T>]) -> Result<()> {
        let src_bits = self.ordering_bits(ordering)?;
        if begin + values.len() > self.amps.len() {
            return Err(Error::InvalidArgument("write range out of bounds".into()));
        }
        for (k, v) in values.iter().enumerate() {
            self.amps[scatter(begin + k, &src_bits)] = *v;
        }
        Ok(())
    }

    fn ordering_bits(&self, ordering: &[usize]) -> Result<Vec<usize>> {
        if ordering.len() != self.num_qubits {
            return Err(Error::InvalidArgument("ordering must list every qubit".into()));
        }
        let mut seen = vec![false; self.num_qubits];
        for &q in ordering {
            self.check_qubit(q)?;
            if seen[q] {
                return Err(Error::InvalidArgument("ordering is not a permutation".into()));
            }
            seen[q] = true;
        }
        Ok(ordering.iter().map(|&q| self.bit_map[q]).collect())
    }

    /// Moves the amplitude at `i` to `bit_permute(i, pairs)` and updates the
    /// qubit mapping so logical qubits stay addressable.
    pub fn swap_index_bits(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        let p32: Vec<(u32, u32)> = pairs.iter().map(|&(a, b)| (a as u32, b as u32)).collect();
        crate::numeric::validate_bit_pairs(&p32, self.num_qubits as u32)?;
        kernel::swap_bits(&mut self.amps, pairs);
        for b in self.bit_map.iter_mut() {
            for &(x, y) in pairs {
                if *b == x {
                    *b = y;
                } else if *b == y {
                    *b = x;
                }
            }
        }
        Ok(())
    }

    /// Writes an 8-byte little-endian qubit count followed by interleaved
    /// `(re, im)` little-endian `f64` pairs in logical qubit order.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.num_qubits as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * 4096);
        for chunk in self.logical_amplitudes().chunks(4096) {
            buf.clear();
            for z in chunk {
                let z = to_c64(*z);
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        let n = u64::from_le_bytes(head) as usize;
        if n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("qubit count {n} in dump is too large")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        let mut pair = [0u8; 16];
        for _ in 0..(1usize << n) {
            r.read_exact(&mut pair)?;
            let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
            amps.push(to_complex(C64::new(re, im)));
        }
        Self::from_amplitudes(amps)
    }
}

#[inline]
fn scatter(j: usize, src_bits: &[usize]) -> usize {
    src_bits
        .iter()
        .enumerate()
        .filter(|(k, _)| (j >> k) & 1 == 1)
        .fold(0usize, |acc, (_, &b)| acc | (1 << b))
}

/// Smallest outcome whose cumulative probability exceeds `r * total`.
fn inverse_cdf(probs: &[f64], total: f64, r: f64) -> usize {
    let target = r * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p;
        if target < acc && p > 0.0 {
            return k;
        }
    }
    last_nonzero
}

/// Cumulative table built once, then queried per shot by binary search.
pub(crate) struct CdfSampler {
    cdf: Vec<f64>,
}

impl CdfSampler {
    pub(crate) fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        CdfSampler { cdf }
    }

    pub(crate) fn draw(&self, r: f64) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let target = r * total;
        let k = self.cdf.partition_point(|&c| c <= target);
        if k < self.cdf.len() {
            return k;
        }
        // r*total rounded past the last entry: take the last outcome with weight
        let mut k = self.cdf.len() - 1;
        while k > 0 && self.cdf[k] == self.cdf[k - 1] {
            k -= 1;
        }
        k
    }
}

#[cfg(test)]
mod tests;
