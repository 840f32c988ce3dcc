//! Einsum expressions: `ab,b[long]->a`.
//!
//! A label is one character, or any text inside square brackets. Labels get
//! ids in order of first appearance.

use std::collections::BTreeMap;

use super::{Label, TensorNetwork};
use crate::error::{Error, Result};

struct Parsed {
    inputs: Vec<Vec<String>>,
    output: Vec<String>,
}

fn tokenize(term: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut chars = term.chars().filter(|c| !c.is_whitespace());
    while let Some(c) = chars.next() {
        match c {
            '[' => {
                let name: String = chars.by_ref().take_while(|&c| c != ']').collect();
                if name.is_empty() {
                    return Err(Error::Parse(format!("empty bracketed label in `{term}`")));
                }
                out.push(name);
            }
            ']' | '-' | '>' | ',' => return Err(Error::Parse(format!("unexpected `{c}` in `{term}`"))),
            c => out.push(c.to_string()),
        }
    }
    Ok(out)
}

fn split(expr: &str) -> Result<Parsed> {
    let (lhs, rhs) = expr.split_once("->").ok_or_else(|| Error::Parse("missing `->`".into()))?;
    if rhs.contains("->") {
        return Err(Error::Parse("more than one `->`".into()));
    }
    let inputs = lhs.split(',').map(tokenize).collect::<Result<Vec<_>>>()?;
    let output = tokenize(rhs)?;
    Ok(Parsed { inputs, output })
}

fn build(parsed: Parsed, mut extent_of: impl FnMut(usize, usize, &str) -> Result<usize>) -> Result<TensorNetwork> {
    let mut ids: BTreeMap<String, Label> = BTreeMap::new();
    let mut tn = TensorNetwork::new();
    for (t, term) in parsed.inputs.iter().enumerate() {
        let mut modes = Vec::with_capacity(term.len());
        let mut extents = Vec::with_capacity(term.len());
        for (k, name) in term.iter().enumerate() {
            let next = Label(ids.len() as u32);
            let l = *ids.entry(name.clone()).or_insert(next);
            tn.set_name(l, name.clone());
            modes.push(l);
            extents.push(extent_of(t, k, name)?);
        }
        tn.add_tensor(modes, extents, None).map_err(|e| match e {
            Error::InconsistentExtent(_) => Error::InconsistentExtent(term.join("")),
            other => other,
        })?;
    }
    let output = parsed
        .output
        .iter()
        .map(|n| ids.get(n).copied().ok_or_else(|| Error::UnknownLabel(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    tn.set_output(output)?;
    Ok(tn)
}

/// Builds an unbound network from an expression and per-label extents.
pub fn parse_einsum<S: AsRef<str>>(expr: &str, extents: impl IntoIterator<Item = (S, usize)>) -> Result<TensorNetwork> {
    let table: BTreeMap<String, usize> = extents.into_iter().map(|(k, v)| (k.as_ref().to_string(), v)).collect();
    build(split(expr)?, |_, _, name| table.get(name).copied().ok_or_else(|| Error::UnknownLabel(name.to_string())))
}

/// Builds an unbound network from an expression and one shape per operand.
pub fn einsum_from_shapes(expr: &str, shapes: &[Vec<usize>]) -> Result<TensorNetwork> {
    let parsed = split(expr)?;
    if parsed.inputs.len() != shapes.len() {
        return Err(Error::DimensionMismatch { expected: parsed.inputs.len(), actual: shapes.len() });
    }
    for (term, shape) in parsed.inputs.iter().zip(shapes) {
        if term.len() != shape.len() {
            return Err(Error::Parse(format!("operand `{}` has rank {}, shape has {}", term.join(""), term.len(), shape.len())));
        }
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    build(parsed, |t, k, name| {
        let e = shapes[t][k];
        match seen.insert(name.to_string(), e) {
            Some(prev) if prev != e => Err(Error::InconsistentExtent(name.to_string())),
            _ => Ok(e),
        }
    })
}

fn render(name: &str) -> String {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if !"[],->".contains(c) && !c.is_whitespace() => c.to_string(),
        _ => format!("[{name}]"),
    }
}

/// Renders a network structure as an expression that [`parse_einsum`] accepts.
pub fn to_einsum(tn: &TensorNetwork) -> String {
    let term = |modes: &[Label]| modes.iter().map(|&l| render(&tn.label_name(l))).collect::<String>();
    let lhs: Vec<String> = tn.tensors().iter().map(|t| term(&t.modes)).collect();
    format!("{}->{}", lhs.join(","), term(tn.output()))
}
