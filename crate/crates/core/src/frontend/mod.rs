//! Circuit description, benchmark generators and circuit-to-network conversion.

mod convert;
mod generators;

pub use convert::{apply_lightcone, circuit_to_einsum, circuit_to_network, lightcone_circuit, ConversionTarget, TargetKind};
pub use generators::{gen_qaoa_maxcut, gen_qft, gen_qv, gen_rqc, haar_unitary, random_regular_graph, Graph};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::statevec::{standard, Control, DenseGate, Gate};

/// One circuit operation. `name` is the base gate; `controls` turn it into its
/// controlled version (all controls act on `|1>`).
///
/// Names: `h x y z s sdg t tdg sx` (one target), `phase rx ry rz` (one target,
/// one angle), `swap` (two targets), `rzz` (two targets, one angle) and
/// `unitary`, which takes a row-major `matrix` of `[re, im]` pairs whose index
/// bit `j` is `targets[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Op {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl Op {
    pub fn new(name: &str, targets: Vec<usize>) -> Self {
        Op { name: name.to_string(), params: Vec::new(), targets, controls: Vec::new(), matrix: None }
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_controls(mut self, controls: Vec<usize>) -> Self {
        self.controls = controls;
        self
    }

    pub fn unitary(matrix: &[C64], targets: Vec<usize>) -> Self {
        Op { matrix: Some(matrix.iter().map(|z| [z.re, z.im]).collect()), ..Op::new("unitary", targets) }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().chain(&self.controls).copied()
    }

    /// Builds the engine gate.
    pub fn to_gate(&self) -> Result<Gate> {
        let (arity, nparams) = match self.name.as_str() {
            "h" | "x" | "y" | "z" | "s" | "sdg" | "t" | "tdg" | "sx" => (Some(1), 0),
            "phase" | "rx" | "ry" | "rz" => (Some(1), 1),
            "swap" => (Some(2), 0),
            "rzz" => (Some(2), 1),
            "unitary" => (None, 0),
            other => return Err(Error::InvalidArgument(format!("unknown gate `{other}`"))),
        };
        if arity.is_some_and(|a| a != self.targets.len()) {
            return Err(Error::InvalidArgument(format!("gate `{}` takes {} target(s), got {}", self.name, arity.unwrap_or(0), self.targets.len())));
        }
        if self.params.len() != nparams {
            return Err(Error::InvalidArgument(format!("gate `{}` takes {nparams} parameter(s), got {}", self.name, self.params.len())));
        }
        let t = &self.targets;
        let p = self.params.first().copied().unwrap_or(0.0);
        let c = |re: f64, im: f64| C64::new(re, im);
        let base = match self.name.as_str() {
            "h" => standard::h(t[0]),
            "x" => standard::x(t[0]),
            "y" => standard::y(t[0]),
            "z" => standard::z(t[0]),
            "s" => standard::phase(PI / 2.0, t[0]),
            "sdg" => standard::phase(-PI / 2.0, t[0]),
            "t" => standard::phase(PI / 4.0, t[0]),
            "tdg" => standard::phase(-PI / 4.0, t[0]),
            "sx" => DenseGate::new(vec![c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)], t.clone())?.into(),
            "phase" => standard::phase(p, t[0]),
            "rx" => standard::rx(p, t[0]),
            "ry" => standard::ry(p, t[0]),
            "rz" => standard::rz(p, t[0]),
            "swap" => standard::swap(t[0], t[1]),
            "rzz" => standard::rzz(p, t[0], t[1]),
            _ => {
                let m = self.matrix.as_ref().ok_or_else(|| Error::InvalidArgument("`unitary` needs a matrix".into()))?;
                DenseGate::new(m.iter().map(|&[re, im]| c(re, im)).collect(), t.clone())?.into()
            }
        };
        if self.controls.is_empty() {
            return Ok(base);
        }
        let controls: Vec<Control> = self.controls.iter().map(|&q| Control::on(q)).collect();
        Ok(match base {
            Gate::Dense(d) => d.with_controls(controls)?.into(),
            Gate::Permutation(g) => g.with_controls(controls)?.into(),
        })
    }
}

/// Ordered list of operations on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    #[serde(rename = "n")]
    num_qubits: usize,
    ops: Vec<Op>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("a circuit needs at least one qubit".into()));
        }
        Ok(Circuit { num_qubits, ops: Vec::new() })
    }

    /// Appends an operation after checking that it builds a valid gate.
    pub fn push(&mut self, op: Op) -> Result<()> {
        if let Some(q) = op.qubits().find(|&q| q >= self.num_qubits) {
            return Err(Error::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
        }
        op.to_gate()?;
        self.ops.push(op);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn gates(&self) -> Vec<Gate> {
        self.ops.iter().map(|op| op.to_gate().expect("validated on push")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            ops: Vec<Op>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let mut c = Circuit::new(raw.n)?;
        for op in raw.ops {
            c.push(op)?;
        }
        Ok(c)
    }
}
