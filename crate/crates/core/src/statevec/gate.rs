use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::C64;

/// A control qubit together with the value it must hold for the gate to act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub value: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Control { qubit, value: true }
    }

    pub fn off(qubit: usize) -> Self {
        Control { qubit, value: false }
    }
}

const UNITARY_TOL: f64 = 1e-8;

/// Dense `2^k x 2^k` row-major gate matrix. Matrix index bit `j` corresponds to
/// `targets[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGate {
    matrix: Vec<C64>,
    targets: Vec<usize>,
    controls: Vec<Control>,
    unitary: bool,
}

impl DenseGate {
    /// Builds a unitary gate, rejecting matrices that deviate from unitarity.
    pub fn new(matrix: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        let g = Self::build(matrix, targets, true)?;
        let dev = unitarity_deviation(&g.matrix, g.dim());
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(g)
    }

    /// Builds a gate without the unitarity check. Used for observables and other
    /// non-unitary operators; norm invariants do not apply to them.
    pub fn non_unitary(matrix: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        Self::build(matrix, targets, false)
    }

    fn build(matrix: Vec<C64>, targets: Vec<usize>, unitary: bool) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("gate needs at least one target".into()));
        }
        let dim = 1usize << targets.len();
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: matrix.len() });
        }
        check_distinct(targets.iter().copied())?;
        Ok(DenseGate { matrix, targets, controls: Vec::new(), unitary })
    }

    /// Skips the O(d^3) unitarity check; `unitary` records what the caller knows.
    pub(crate) fn from_trusted(matrix: Vec<C64>, targets: Vec<usize>, unitary: bool) -> Result<Self> {
        Self::build(matrix, targets, unitary)
    }

    pub fn with_controls(mut self, controls: Vec<Control>) -> Result<Self> {
        check_distinct(self.targets.iter().copied().chain(controls.iter().map(|c| c.qubit)))?;
        self.controls = controls;
        Ok(self)
    }

    pub fn matrix(&self) -> &[C64] {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn dim(&self) -> usize {
        1 << self.targets.len()
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r == c || self.matrix[r * d + c] == C64::new(0.0, 0.0)))
    }
}

/// Generalized permutation gate: `M[perm[j], j] = diag[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationGate {
    permutation: Vec<usize>,
    diagonal: Vec<C64>,
    targets: Vec<usize>,
    controls: Vec<Control>,
}

impl PermutationGate {
    pub fn new(permutation: Vec<usize>, diagonal: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("gate needs at least one target".into()));
        }
        let dim = 1usize << targets.len();
        if permutation.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: permutation.len() });
        }
        if diagonal.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: diagonal.len() });
        }
        let mut seen = vec![false; dim];
        for &p in &permutation {
            if p >= dim || seen[p] {
                return Err(Error::InvalidArgument("permutation is not a bijection".into()));
            }
            seen[p] = true;
        }
        check_distinct(targets.iter().copied())?;
        Ok(PermutationGate { permutation, diagonal, targets, controls: Vec::new() })
    }

    /// Diagonal gate (identity permutation).
    pub fn diagonal(values: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        let perm = (0..values.len()).collect();
        Self::new(perm, values, targets)
    }

    pub fn with_controls(mut self, controls: Vec<Control>) -> Result<Self> {
        check_distinct(self.targets.iter().copied().chain(controls.iter().map(|c| c.qubit)))?;
        self.controls = controls;
        Ok(self)
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn diagonal_values(&self) -> &[C64] {
        &self.diagonal
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn is_diagonal(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Dense equivalent of this gate.
    pub fn to_dense(&self) -> DenseGate {
        let d = self.permutation.len();
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            m[self.permutation[j] * d + j] = self.diagonal[j];
        }
        let unitary = self.diagonal.iter().all(|z| (z.norm() - 1.0).abs() < UNITARY_TOL);
        DenseGate {
            matrix: m,
            targets: self.targets.clone(),
            controls: self.controls.clone(),
            unitary,
        }
    }
}

/// Either gate representation accepted by the engines.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Dense(DenseGate),
    Permutation(PermutationGate),
}

impl Gate {
    pub fn targets(&self) -> &[usize] {
        match self {
            Gate::Dense(g) => g.targets(),
            Gate::Permutation(g) => g.targets(),
        }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::Dense(g) => g.controls(),
            Gate::Permutation(g) => g.controls(),
        }
    }

    /// Targets followed by control qubits.
    pub fn qubits(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self.targets().to_vec();
        q.extend(self.controls().iter().map(|c| c.qubit));
        q
    }

    pub fn arity(&self) -> usize {
        self.targets().len() + self.controls().len()
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            Gate::Dense(g) => g.is_diagonal(),
            Gate::Permutation(g) => g.is_diagonal(),
        }
    }

    pub fn to_dense(&self) -> DenseGate {
        match self {
            Gate::Dense(g) => g.clone(),
            Gate::Permutation(g) => g.to_dense(),
        }
    }
}

impl From<DenseGate> for Gate {
    fn from(g: DenseGate) -> Self {
        Gate::Dense(g)
    }
}

impl From<PermutationGate> for Gate {
    fn from(g: PermutationGate) -> Self {
        Gate::Permutation(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> [C64; 4] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            _ => Err(Error::InvalidArgument(format!("unknown Pauli `{c}`"))),
        }
    }
}

/// `coefficient * P_{q1} ⊗ P_{q2} ⊗ ...`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
    coefficient: C64,
}

impl PauliString {
    pub fn new(factors: Vec<(usize, Pauli)>, coefficient: C64) -> Result<Self> {
        check_distinct(factors.iter().map(|f| f.0))?;
        Ok(PauliString { factors, coefficient })
    }

    /// Parses a dense label such as `"XIZ"`, where the leftmost character acts
    /// on qubit 0.
    pub fn from_label(label: &str, coefficient: C64) -> Result<Self> {
        let factors = label
            .chars()
            .enumerate()
            .map(|(q, c)| Pauli::from_char(c).map(|p| (q, p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors, coefficient)
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn coefficient(&self) -> C64 {
        self.coefficient
    }

    /// Factors other than identity.
    pub fn support(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.factors.iter().copied().filter(|f| f.1 != Pauli::I)
    }
}

fn check_distinct(qubits: impl Iterator<Item = usize>) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for q in qubits {
        if seen.contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
        seen.push(q);
    }
    Ok(())
}

fn unitarity_deviation(m: &[C64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..d {
                acc += m[k * d + i].conj() * m[k * d + j];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc - C64::new(expect, 0.0)).norm());
        }
    }
    worst
}

/// Common gate matrices.
pub mod standard {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub fn h(q: usize) -> Gate {
        let s = FRAC_1_SQRT_2;
        DenseGate::new(vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)], vec![q])
            .expect("H is unitary")
            .into()
    }

    pub fn x(q: usize) -> Gate {
        PermutationGate::new(vec![1, 0], vec![c(1.0, 0.0); 2], vec![q]).expect("valid").into()
    }

    pub fn y(q: usize) -> Gate {
        // Y|0> = i|1>, Y|1> = -i|0>
        PermutationGate::new(vec![1, 0], vec![c(0.0, 1.0), c(0.0, -1.0)], vec![q])
            .expect("valid")
            .into()
    }

    pub fn z(q: usize) -> Gate {
        phase(std::f64::consts::PI, q)
    }

    pub fn phase(theta: f64, q: usize) -> Gate {
        PermutationGate::diagonal(vec![c(1.0, 0.0), C64::from_polar(1.0, theta)], vec![q])
            .expect("valid")
            .into()
    }

    pub fn rz(theta: f64, q: usize) -> Gate {
        PermutationGate::diagonal(
            vec![C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)],
            vec![q],
        )
        .expect("valid")
        .into()
    }

    pub fn rx(theta: f64, q: usize) -> Gate {
        let (s, co) = (theta / 2.0).sin_cos();
        DenseGate::new(vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)], vec![q])
            .expect("unitary")
            .into()
    }

    pub fn ry(theta: f64, q: usize) -> Gate {
        let (s, co) = (theta / 2.0).sin_cos();
        DenseGate::new(vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)], vec![q])
            .expect("unitary")
            .into()
    }

    pub fn cnot(control: usize, target: usize) -> Gate {
        PermutationGate::new(vec![1, 0], vec![c(1.0, 0.0); 2], vec![target])
            .and_then(|g| g.with_controls(vec![Control::on(control)]))
            .expect("valid")
            .into()
    }

    pub fn cz(a: usize, b: usize) -> Gate {
        PermutationGate::diagonal(
            vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)],
            vec![a, b],
        )
        .expect("valid")
        .into()
    }

    pub fn cphase(theta: f64, control: usize, target: usize) -> Gate {
        PermutationGate::diagonal(vec![c(1.0, 0.0), C64::from_polar(1.0, theta)], vec![target])
            .and_then(|g| g.with_controls(vec![Control::on(control)]))
            .expect("valid")
            .into()
    }

    pub fn swap(a: usize, b: usize) -> Gate {
        PermutationGate::new(vec![0, 2, 1, 3], vec![c(1.0, 0.0); 4], vec![a, b])
            .expect("valid")
            .into()
    }

    /// `exp(-i theta/2 Z⊗Z)`
    pub fn rzz(theta: f64, a: usize, b: usize) -> Gate {
        let m = C64::from_polar(1.0, -theta / 2.0);
        let p = C64::from_polar(1.0, theta / 2.0);
        PermutationGate::diagonal(vec![m, p, p, m], vec![a, b]).expect("valid").into()
    }
}
