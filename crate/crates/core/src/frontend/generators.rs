//! Benchmark circuit generators.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Circuit, Op};
use crate::approx::linalg::{qr, Mat};
use crate::error::{Error, Result};
use crate::numeric::C64;

/// Quantum Fourier transform on `n` qubits: `n` Hadamards, `n(n-1)/2`
/// controlled phases and `n/2` swaps. Maps `|x>` to
/// `2^{-n/2} sum_y exp(2 pi i x y / 2^n) |y>` with qubit 0 as the least
/// significant bit.
pub fn gen_qft(n: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n)?;
    for j in (0..n).rev() {
        c.push(Op::new("h", vec![j]))?;
        for k in (0..j).rev() {
            let angle = PI / (1u64 << (j - k)) as f64;
            c.push(Op::new("phase", vec![j]).with_params(vec![angle]).with_controls(vec![k]))?;
        }
    }
    for i in 0..n / 2 {
        c.push(Op::new("swap", vec![i, n - 1 - i]))?;
    }
    Ok(c)
}

/// Haar-random `2^k x 2^k` unitary, row-major.
pub fn haar_unitary(k: usize, rng: &mut impl Rng) -> Vec<C64> {
    let d = 1usize << k;
    let z: Vec<C64> = (0..d * d)
        .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    // the positive diagonal of R makes Q Haar distributed
    let (q, _) = qr(&Mat::new(d, d, z));
    q.data
}

pub(super) fn determinant(m: &[C64], d: usize) -> C64 {
    let mut a = m.to_vec();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..d {
        let pivot = (col..d).max_by(|&x, &y| a[x * d + col].norm().total_cmp(&a[y * d + col].norm())).expect("non-empty");
        if a[pivot * d + col] == C64::default() {
            return C64::default();
        }
        if pivot != col {
            for j in 0..d {
                a.swap(pivot * d + j, col * d + j);
            }
            det = -det;
        }
        let p = a[col * d + col];
        det *= p;
        for r in col + 1..d {
            let f = a[r * d + col] / p;
            for j in col..d {
                let v = a[col * d + j];
                a[r * d + j] -= f * v;
            }
        }
    }
    det
}

/// Quantum-volume circuit: `depth` layers, each a uniformly random pairing of
/// the qubits with a Haar-random SU(4) gate on every pair (`n/2` gates per
/// layer).
pub fn gen_qv(n: usize, depth: usize, seed: u64) -> Result<Circuit> {
    let mut c = Circuit::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..depth {
        perm.shuffle(&mut rng);
        for pair in perm.chunks_exact(2) {
            let mut u = haar_unitary(2, &mut rng);
            let phase = C64::from_polar(1.0, -determinant(&u, 4).arg() / 4.0);
            u.iter_mut().for_each(|z| *z *= phase);
            c.push(Op::unitary(&u, vec![pair[0], pair[1]]))?;
        }
    }
    Ok(c)
}

/// Undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) references a node outside 0..{num_nodes}")));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self loop on node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Graph { num_nodes, edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Random `degree`-regular graph by the configuration model with restarts.
pub fn random_regular_graph(n: usize, degree: usize, seed: u64) -> Result<Graph> {
    if degree >= n || (n * degree) % 2 == 1 {
        return Err(Error::InvalidArgument(format!("no simple {degree}-regular graph on {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..10_000 {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(stubs.len() / 2);
        for e in stubs.chunks_exact(2) {
            let (a, b) = (e[0].min(e[1]), e[0].max(e[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
            edges.push((a, b));
        }
        edges.sort_unstable();
        return Graph::new(n, edges);
    }
    Err(Error::InvalidArgument(format!("failed to sample a {degree}-regular graph on {n} nodes")))
}

/// QAOA for MaxCut with `p` layers: Hadamards, then per layer
/// `exp(-i gamma C)` as one `rzz(-gamma)` per edge and the mixer
/// `exp(-i beta sum X)` as `rx(2 beta)` on every qubit. `params` is
/// `[gamma_1..gamma_p, beta_1..beta_p]`; when absent, angles are drawn from
/// `seed` (gamma in `[0, 2pi)`, beta in `[0, pi)`). Gate count is
/// `n + p (|E| + n)`.
pub fn gen_qaoa_maxcut(graph: &Graph, p: usize, params: Option<&[f64]>, seed: u64) -> Result<Circuit> {
    let n = graph.num_nodes;
    let angles: Vec<f64> = match params {
        Some(a) if a.len() == 2 * p => a.to_vec(),
        Some(a) => return Err(Error::InvalidArgument(format!("expected {} QAOA angles, got {}", 2 * p, a.len()))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gammas: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            let betas: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * PI).collect();
            gammas.into_iter().chain(betas).collect()
        }
    };
    let mut c = Circuit::new(n)?;
    for q in 0..n {
        c.push(Op::new("h", vec![q]))?;
    }
    for layer in 0..p {
        let (gamma, beta) = (angles[layer], angles[p + layer]);
        for &(a, b) in &graph.edges {
            c.push(Op::new("rzz", vec![a, b]).with_params(vec![-gamma]))?;
        }
        for q in 0..n {
            c.push(Op::new("rx", vec![q]).with_params(vec![2.0 * beta]))?;
        }
    }
    Ok(c)
}

/// Random circuit on a `rows x cols` grid. Cycle `t` applies Haar-random
/// two-qubit gates on coupler pattern `t mod 4`: horizontal pairs starting in
/// even columns, horizontal pairs starting in odd columns, then the same for
/// vertical pairs. Qubit `(r, c)` is `r * cols + c`.
pub fn gen_rqc(rows: usize, cols: usize, cycles: usize, seed: u64) -> Result<Circuit> {
    let mut c = Circuit::new(rows * cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = |r: usize, col: usize| r * cols + col;
    for t in 0..cycles {
        let mut pairs = Vec::new();
        match t % 4 {
            p @ (0 | 1) => {
                for r in 0..rows {
                    pairs.extend((p..cols.saturating_sub(1)).step_by(2).map(|col| (at(r, col), at(r, col + 1))));
                }
            }
            p => {
                for r in (p - 2..rows.saturating_sub(1)).step_by(2) {
                    pairs.extend((0..cols).map(|col| (at(r, col), at(r + 1, col))));
                }
            }
        }
        for (a, b) in pairs {
            c.push(Op::unitary(&haar_unitary(2, &mut rng), vec![a, b]))?;
        }
    }
    Ok(c)
}
