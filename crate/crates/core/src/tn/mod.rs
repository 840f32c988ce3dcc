//! Tensor networks: labels, dense tensors, networks, einsum text and costs.

mod einsum;
pub(crate) mod kernel;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::C64;

pub use einsum::{einsum_from_shapes, parse_einsum, to_einsum};
pub use kernel::{contract_pair, contract_pair_with, pair_cost, KernelVariant};
pub use tree::{min_peak_order, path_cost, ContractionTree, NodeInfo, PairwiseCost, PeakOrder, TreeCost};

/// Bytes per complex element.
pub const ELEMENT_BYTES: f64 = 16.0;

/// Mode label. Ordering of labels is the canonical mode order of intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", default_name(*self))
    }
}

fn default_name(l: Label) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    match LETTERS.get(l.0 as usize) {
        Some(&c) => (c as char).to_string(),
        None => format!("m{}", l.0),
    }
}

fn check_modes(modes: &[Label], extents: &[usize]) -> Result<()> {
    if modes.len() != extents.len() {
        return Err(Error::DimensionMismatch { expected: modes.len(), actual: extents.len() });
    }
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::InvalidArgument(format!("label {m} repeated within one tensor")));
        }
    }
    if let Some(i) = extents.iter().position(|&e| e == 0) {
        return Err(Error::InconsistentExtent(format!("{} has extent 0", modes[i])));
    }
    Ok(())
}

pub(crate) fn volume(extents: &[usize]) -> usize {
    extents.iter().product()
}

/// Dense complex tensor stored row-major in mode order (last mode fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    modes: Vec<Label>,
    extents: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(modes: Vec<Label>, extents: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        check_modes(&modes, &extents)?;
        let len = volume(&extents);
        if data.len() != len {
            return Err(Error::DimensionMismatch { expected: len, actual: data.len() });
        }
        Ok(Tensor { modes, extents, data })
    }

    pub(crate) fn from_parts(modes: Vec<Label>, extents: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(volume(&extents), data.len());
        Tensor { modes, extents, data }
    }

    pub fn scalar(z: C64) -> Self {
        Tensor { modes: Vec::new(), extents: Vec::new(), data: vec![z] }
    }

    pub fn zeros(modes: Vec<Label>, extents: Vec<usize>) -> Result<Self> {
        let len = volume(&extents);
        Self::new(modes, extents, vec![C64::default(); len])
    }

    pub fn modes(&self) -> &[Label] {
        &self.modes
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    pub fn extent_of(&self, label: Label) -> Option<usize> {
        self.modes.iter().position(|&m| m == label).map(|i| self.extents[i])
    }

    /// Value of a rank-0 tensor.
    pub fn value(&self) -> Option<C64> {
        (self.modes.is_empty()).then(|| self.data[0])
    }

    pub fn get(&self, index: &[usize]) -> Option<C64> {
        if index.len() != self.rank() || index.iter().zip(&self.extents).any(|(i, e)| i >= e) {
            return None;
        }
        let off = index.iter().zip(&self.extents).fold(0, |acc, (i, e)| acc * e + i);
        Some(self.data[off])
    }

    pub fn view(&self) -> TensorView<'_> {
        TensorView { modes: &self.modes, extents: &self.extents, data: &self.data }
    }

    /// Same tensor with modes reordered to `order`.
    pub fn permuted(&self, order: &[Label]) -> Result<Tensor> {
        self.view().permuted(order)
    }

    pub fn relabeled(mut self, modes: Vec<Label>) -> Result<Tensor> {
        check_modes(&modes, &self.extents)?;
        self.modes = modes;
        Ok(self)
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn conj(&self) -> Tensor {
        Tensor { modes: self.modes.clone(), extents: self.extents.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest elementwise difference after aligning `other` to this mode order.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        let aligned = other.permuted(&self.modes)?;
        if aligned.extents != self.extents {
            return Err(Error::InvalidArgument("tensors have different shapes".into()));
        }
        Ok(self.data.iter().zip(&aligned.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Borrowed tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorView<'a> {
    pub modes: &'a [Label],
    pub extents: &'a [usize],
    pub data: &'a [C64],
}

impl TensorView<'_> {
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(self.modes.to_vec(), self.extents.to_vec(), self.data.to_vec())
    }

    pub fn permuted(&self, order: &[Label]) -> Result<Tensor> {
        if order.len() != self.modes.len() {
            return Err(Error::DimensionMismatch { expected: self.modes.len(), actual: order.len() });
        }
        let perm = order
            .iter()
            .map(|l| self.modes.iter().position(|m| m == l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let extents: Vec<usize> = perm.iter().map(|&p| self.extents[p]).collect();
        let data = kernel::permute(self.data, self.extents, &perm);
        Ok(Tensor::from_parts(order.to_vec(), extents, data))
    }

    /// Fixes the listed labels to the given values, dropping those modes.
    /// Labels the tensor does not carry are ignored.
    pub fn project(&self, fixed: &[(Label, usize)]) -> Tensor {
        let mut base = 0usize;
        let mut modes = Vec::new();
        let mut extents = Vec::new();
        let mut strides_kept = Vec::new();
        let mut stride = 1usize;
        let mut strides = vec![0usize; self.modes.len()];
        for i in (0..self.modes.len()).rev() {
            strides[i] = stride;
            stride *= self.extents[i];
        }
        for (i, m) in self.modes.iter().enumerate() {
            if let Some(&(_, v)) = fixed.iter().find(|(l, _)| l == m) {
                base += v * strides[i];
            } else {
                modes.push(*m);
                extents.push(self.extents[i]);
                strides_kept.push(strides[i]);
            }
        }
        let len = volume(&extents);
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; extents.len()];
        let mut off = base;
        for _ in 0..len {
            data.push(self.data[off]);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                off += strides_kept[k];
                if idx[k] < extents[k] {
                    break;
                }
                off -= strides_kept[k] * extents[k];
                idx[k] = 0;
            }
        }
        Tensor::from_parts(modes, extents, data)
    }
}

/// One input of a network. Data may be bound later.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSlot {
    pub modes: Vec<Label>,
    pub extents: Vec<usize>,
    pub data: Option<Vec<C64>>,
    pub constant: bool,
    pub data_ref: Option<String>,
}

impl TensorSlot {
    pub fn size(&self) -> usize {
        volume(&self.extents)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorNetwork {
    tensors: Vec<TensorSlot>,
    output: Vec<Label>,
    extents: BTreeMap<Label, usize>,
    names: BTreeMap<Label, String>,
    generation: u64,
}

impl TensorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor and returns its id.
    pub fn add_tensor(&mut self, modes: Vec<Label>, extents: Vec<usize>, data: Option<Vec<C64>>) -> Result<usize> {
        check_modes(&modes, &extents)?;
        for (m, &e) in modes.iter().zip(&extents) {
            if let Some(&prev) = self.extents.get(m) {
                if prev != e {
                    return Err(Error::InconsistentExtent(self.label_name(*m)));
                }
            }
        }
        if let Some(d) = &data {
            if d.len() != volume(&extents) {
                return Err(Error::DimensionMismatch { expected: volume(&extents), actual: d.len() });
            }
        }
        for (m, &e) in modes.iter().zip(&extents) {
            self.extents.insert(*m, e);
        }
        self.tensors.push(TensorSlot { modes, extents, data, constant: false, data_ref: None });
        Ok(self.tensors.len() - 1)
    }

    pub fn add(&mut self, t: Tensor) -> Result<usize> {
        let Tensor { modes, extents, data } = t;
        self.add_tensor(modes, extents, Some(data))
    }

    pub fn set_output(&mut self, output: Vec<Label>) -> Result<()> {
        for (i, l) in output.iter().enumerate() {
            if output[..i].contains(l) {
                return Err(Error::InvalidArgument(format!("output label {} repeated", self.label_name(*l))));
            }
            if !self.extents.contains_key(l) {
                return Err(Error::UnknownLabel(self.label_name(*l)));
            }
        }
        self.output = output;
        Ok(())
    }

    pub fn set_name(&mut self, label: Label, name: impl Into<String>) {
        self.names.insert(label, name.into());
    }

    pub fn label_name(&self, label: Label) -> String {
        self.names.get(&label).cloned().unwrap_or_else(|| default_name(label))
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[TensorSlot] {
        &self.tensors
    }

    pub fn slot(&self, id: usize) -> &TensorSlot {
        &self.tensors[id]
    }

    pub fn output(&self) -> &[Label] {
        &self.output
    }

    pub fn output_extents(&self) -> Vec<usize> {
        self.output.iter().map(|l| self.extents[l]).collect()
    }

    pub fn extent(&self, label: Label) -> Option<usize> {
        self.extents.get(&label).copied()
    }

    pub fn extents(&self) -> &BTreeMap<Label, usize> {
        &self.extents
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.extents.keys().copied()
    }

    /// Smallest label id not yet used.
    pub fn fresh_label(&self) -> Label {
        Label(self.extents.keys().next_back().map_or(0, |l| l.0 + 1))
    }

    /// Number of tensors carrying `label`, plus one when it is an output label.
    pub fn leg_count(&self, label: Label) -> usize {
        self.tensors.iter().filter(|t| t.modes.contains(&label)).count() + usize::from(self.output.contains(&label))
    }

    pub fn tensor(&self, id: usize) -> Result<TensorView<'_>> {
        let slot = self.tensors.get(id).ok_or_else(|| Error::InvalidArgument(format!("no tensor {id}")))?;
        let data = slot.data.as_deref().ok_or(Error::UnboundData(id))?;
        Ok(TensorView { modes: &slot.modes, extents: &slot.extents, data })
    }

    pub fn is_bound(&self) -> bool {
        self.tensors.iter().all(|t| t.data.is_some())
    }

    /// Binds (or replaces) the data of tensor `id`. Changing a constant
    /// tensor starts a new generation, which invalidates cached intermediates.
    pub fn bind(&mut self, id: usize, data: Vec<C64>) -> Result<()> {
        let slot = self.tensors.get_mut(id).ok_or_else(|| Error::InvalidArgument(format!("no tensor {id}")))?;
        if data.len() != slot.size() {
            return Err(Error::DimensionMismatch { expected: slot.size(), actual: data.len() });
        }
        if slot.constant {
            self.generation += 1;
        }
        slot.data = Some(data);
        Ok(())
    }

    pub fn mark_constant(&mut self, ids: &[usize]) -> Result<()> {
        self.set_constness(ids, true)
    }

    pub fn mark_mutable(&mut self, ids: &[usize]) -> Result<()> {
        self.set_constness(ids, false)
    }

    fn set_constness(&mut self, ids: &[usize], constant: bool) -> Result<()> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.tensors.len()) {
            return Err(Error::InvalidArgument(format!("no tensor {bad}")));
        }
        for &i in ids {
            self.tensors[i].constant = constant;
        }
        self.generation += 1;
        Ok(())
    }

    pub fn is_constant(&self, id: usize) -> bool {
        self.tensors[id].constant
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn to_json(&self, include_data: bool) -> Result<String> {
        let doc = NetworkJson {
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorJson {
                    labels: t.modes.iter().map(|&l| self.label_name(l)).collect(),
                    extents: t.extents.clone(),
                    data: if include_data { t.data.as_ref().map(|d| d.iter().map(|z| [z.re, z.im]).collect()) } else { None },
                    data_ref: t.data_ref.clone(),
                    constant: t.constant,
                })
                .collect(),
            output: self.output.iter().map(|&l| self.label_name(l)).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses the network JSON format. `data_ref` entries stay unbound; see
    /// [`TensorNetwork::resolve_data_refs`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkJson = serde_json::from_str(text)?;
        let mut ids: BTreeMap<String, Label> = BTreeMap::new();
        let mut tn = TensorNetwork::new();
        let mut intern = |name: &str, tn: &mut TensorNetwork| -> Label {
            let next = Label(ids.len() as u32);
            *ids.entry(name.to_string()).or_insert_with(|| {
                tn.set_name(next, name);
                next
            })
        };
        for t in &doc.tensors {
            let modes: Vec<Label> = t.labels.iter().map(|n| intern(n, &mut tn)).collect();
            let data = t.data.as_ref().map(|d| d.iter().map(|&[re, im]| C64::new(re, im)).collect());
            let id = tn.add_tensor(modes, t.extents.clone(), data)?;
            tn.tensors[id].constant = t.constant;
            tn.tensors[id].data_ref = t.data_ref.clone();
        }
        let output = doc
            .output
            .iter()
            .map(|n| ids.get(n).copied().ok_or_else(|| Error::UnknownLabel(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        tn.set_output(output)?;
        Ok(tn)
    }

    /// Loads every unbound `data_ref` as raw little-endian `(re, im)` f64 pairs,
    /// resolving relative paths against `base`.
    pub fn resolve_data_refs(&mut self, base: &Path) -> Result<()> {
        for id in 0..self.tensors.len() {
            if self.tensors[id].data.is_some() {
                continue;
            }
            let Some(r) = self.tensors[id].data_ref.clone() else { continue };
            let bytes = std::fs::read(base.join(&r))?;
            let data = decode_c64(&bytes)?;
            let constant = self.tensors[id].constant;
            self.tensors[id].constant = false;
            self.bind(id, data)?;
            self.tensors[id].constant = constant;
        }
        Ok(())
    }
}

pub(crate) fn encode_c64(data: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 16);
    for z in data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub(crate) fn decode_c64(bytes: &[u8]) -> Result<Vec<C64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::Serde(format!("{} bytes is not a whole number of complex values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    labels: Vec<String>,
    extents: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_ref: Option<String>,
    #[serde(default)]
    constant: bool,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    tensors: Vec<TensorJson>,
    output: Vec<String>,
}
