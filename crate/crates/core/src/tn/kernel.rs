//! Pairwise contraction kernels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{volume, Label, PairwiseCost, Tensor, TensorView};
use crate::error::{Error, Result};
use crate::numeric::C64;

/// Strategy used to evaluate one pairwise contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum KernelVariant {
    /// One strided loop nest over the union of modes.
    #[default]
    Direct,
    /// Transpose both operands into matrices, multiply, transpose back.
    Ttgt,
}

fn strides(extents: &[usize]) -> Vec<usize> {
    let mut s = vec![0usize; extents.len()];
    let mut acc = 1;
    for i in (0..extents.len()).rev() {
        s[i] = acc;
        acc *= extents[i];
    }
    s
}

/// Reorders axes so output axis `k` is input axis `perm[k]`.
pub(crate) fn permute(data: &[C64], extents: &[usize], perm: &[usize]) -> Vec<C64> {
    let n = extents.len();
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let s = strides(extents);
    let out_ext: Vec<usize> = perm.iter().map(|&p| extents[p]).collect();
    let out_str: Vec<usize> = perm.iter().map(|&p| s[p]).collect();
    let len = data.len();
    let mut out = Vec::with_capacity(len);
    let inner = out_ext[n - 1];
    let inner_stride = out_str[n - 1];
    let mut idx = vec![0usize; n - 1];
    let mut base = 0usize;
    for _ in 0..len / inner {
        out.extend((0..inner).map(|j| data[base + j * inner_stride]));
        for k in (0..n - 1).rev() {
            idx[k] += 1;
            base += out_str[k];
            if idx[k] < out_ext[k] {
                break;
            }
            base -= out_str[k] * out_ext[k];
            idx[k] = 0;
        }
    }
    out
}

/// Visits every multi-index of `extents` (last fastest) and yields the
/// running offsets under each stride set.
fn odometer<const K: usize>(extents: &[usize], strides: [&[usize]; K], mut f: impl FnMut([usize; K])) {
    let total = volume(extents);
    let mut idx = vec![0usize; extents.len()];
    let mut off = [0usize; K];
    for _ in 0..total {
        f(off);
        for k in (0..extents.len()).rev() {
            idx[k] += 1;
            for (o, s) in off.iter_mut().zip(&strides) {
                *o += s[k];
            }
            if idx[k] < extents[k] {
                break;
            }
            for (o, s) in off.iter_mut().zip(&strides) {
                *o -= s[k] * extents[k];
            }
            idx[k] = 0;
        }
    }
}

fn extent_map(a: &TensorView, b: &TensorView) -> Result<BTreeMap<Label, usize>> {
    let mut m = BTreeMap::new();
    for (l, &e) in a.modes.iter().zip(a.extents).chain(b.modes.iter().zip(b.extents)) {
        if let Some(prev) = m.insert(*l, e) {
            if prev != e {
                return Err(Error::InconsistentExtent(l.to_string()));
            }
        }
    }
    Ok(m)
}

/// Multiply-add count and result size for contracting tensors with the given
/// modes, keeping the labels in `keep`.
pub fn pair_cost(a: &[Label], b: &[Label], keep: &[Label], extent: impl Fn(Label) -> usize) -> PairwiseCost {
    let mut union: Vec<Label> = a.iter().chain(b).copied().collect();
    union.sort_unstable();
    union.dedup();
    let flops = union.iter().map(|&l| extent(l) as f64).product();
    let intermediate_size = union.iter().filter(|l| keep.contains(l)).map(|&l| extent(l) as f64).product();
    PairwiseCost { flops, intermediate_size }
}

/// Contracts `a` and `b`, summing every mode not listed in `keep`. Result
/// modes are the kept modes in label order.
pub fn contract_pair(a: &Tensor, b: &Tensor, keep: &[Label]) -> Result<Tensor> {
    let ext = extent_map(&a.view(), &b.view())?;
    let cost = pair_cost(a.modes(), b.modes(), keep, |l| ext[&l]);
    let variant = if cost.flops >= 4096.0 { KernelVariant::Ttgt } else { KernelVariant::Direct };
    contract_pair_with(a, b, keep, variant)
}

pub fn contract_pair_with(a: &Tensor, b: &Tensor, keep: &[Label], variant: KernelVariant) -> Result<Tensor> {
    let (a, b) = (a.view(), b.view());
    let ext = extent_map(&a, &b)?;
    let out: Vec<Label> = ext.keys().copied().filter(|l| keep.contains(l)).collect();
    contract_views(a, b, &out, variant)
}

/// Contracts two views into a tensor with exactly the modes `out`, which must
/// be a subset of the union.
pub(crate) fn contract_views(a: TensorView, b: TensorView, out: &[Label], variant: KernelVariant) -> Result<Tensor> {
    contract_views_into(a, b, out, variant, Vec::new())
}

/// As [`contract_views`], reusing `buf` for the result.
pub(crate) fn contract_views_into(a: TensorView, b: TensorView, out: &[Label], variant: KernelVariant, mut buf: Vec<C64>) -> Result<Tensor> {
    let ext = extent_map(&a, &b)?;
    let out_ext = out
        .iter()
        .map(|l| ext.get(l).copied().ok_or_else(|| Error::UnknownLabel(l.to_string())))
        .collect::<Result<Vec<_>>>()?;
    buf.clear();
    let data = match variant {
        KernelVariant::Direct => direct(&a, &b, out, &out_ext, &ext, buf),
        KernelVariant::Ttgt => ttgt(&a, &b, out, &out_ext, buf),
    };
    Ok(Tensor::from_parts(out.to_vec(), out_ext, data))
}

fn stride_of(v: &TensorView, s: &[usize], l: Label) -> usize {
    v.modes.iter().position(|&m| m == l).map_or(0, |i| s[i])
}

fn direct(a: &TensorView, b: &TensorView, out: &[Label], out_ext: &[usize], ext: &BTreeMap<Label, usize>, mut data: Vec<C64>) -> Vec<C64> {
    let (sa, sb) = (strides(a.extents), strides(b.extents));
    let summed: Vec<Label> = ext.keys().copied().filter(|l| !out.contains(l)).collect();
    let sum_ext: Vec<usize> = summed.iter().map(|l| ext[l]).collect();
    let sum_sa: Vec<usize> = summed.iter().map(|&l| stride_of(a, &sa, l)).collect();
    let sum_sb: Vec<usize> = summed.iter().map(|&l| stride_of(b, &sb, l)).collect();
    let mut inner = Vec::with_capacity(volume(&sum_ext));
    odometer(&sum_ext, [&sum_sa, &sum_sb], |[oa, ob]| inner.push((oa, ob)));
    let out_sa: Vec<usize> = out.iter().map(|&l| stride_of(a, &sa, l)).collect();
    let out_sb: Vec<usize> = out.iter().map(|&l| stride_of(b, &sb, l)).collect();
    data.reserve(volume(out_ext));
    odometer(out_ext, [&out_sa, &out_sb], |[ba, bb]| {
        let acc = inner.iter().fold(C64::default(), |acc, &(oa, ob)| acc + a.data[ba + oa] * b.data[bb + ob]);
        data.push(acc);
    });
    data
}

/// Sums out `drop` modes of a view; other modes keep their order.
fn reduce(v: &TensorView, drop: &[Label]) -> (Vec<Label>, Vec<usize>, Vec<C64>) {
    let keep_pos: Vec<usize> = (0..v.modes.len()).filter(|&i| !drop.contains(&v.modes[i])).collect();
    let modes: Vec<Label> = keep_pos.iter().map(|&i| v.modes[i]).collect();
    let extents: Vec<usize> = keep_pos.iter().map(|&i| v.extents[i]).collect();
    if keep_pos.len() == v.modes.len() {
        return (modes, extents, v.data.to_vec());
    }
    let drop_pos: Vec<usize> = (0..v.modes.len()).filter(|i| !keep_pos.contains(i)).collect();
    let perm: Vec<usize> = keep_pos.iter().chain(&drop_pos).copied().collect();
    let moved = permute(v.data, v.extents, &perm);
    let run = volume(&drop_pos.iter().map(|&i| v.extents[i]).collect::<Vec<_>>());
    let data = moved.chunks(run).map(|c| c.iter().sum()).collect();
    (modes, extents, data)
}

fn ttgt(a: &TensorView, b: &TensorView, out: &[Label], out_ext: &[usize], mut c: Vec<C64>) -> Vec<C64> {
    let a_only: Vec<Label> = a.modes.iter().copied().filter(|l| !out.contains(l) && !b.modes.contains(l)).collect();
    let b_only: Vec<Label> = b.modes.iter().copied().filter(|l| !out.contains(l) && !a.modes.contains(l)).collect();
    let (am, ae, ad) = reduce(a, &a_only);
    let (bm, be, bd) = reduce(b, &b_only);
    let batch: Vec<Label> = out.iter().copied().filter(|l| am.contains(l) && bm.contains(l)).collect();
    let contr: Vec<Label> = am.iter().copied().filter(|l| bm.contains(l) && !out.contains(l)).collect();
    let afree: Vec<Label> = out.iter().copied().filter(|l| am.contains(l) && !bm.contains(l)).collect();
    let bfree: Vec<Label> = out.iter().copied().filter(|l| bm.contains(l) && !am.contains(l)).collect();
    let pos = |modes: &[Label], l: &Label| modes.iter().position(|m| m == l).expect("mode present");
    let perm_a: Vec<usize> = batch.iter().chain(&afree).chain(&contr).map(|l| pos(&am, l)).collect();
    let perm_b: Vec<usize> = batch.iter().chain(&contr).chain(&bfree).map(|l| pos(&bm, l)).collect();
    let ext_of = |ls: &[Label], modes: &[Label], e: &[usize]| -> usize { ls.iter().map(|l| e[pos(modes, l)]).product() };
    let nb = ext_of(&batch, &am, &ae);
    let m = ext_of(&afree, &am, &ae);
    let k = ext_of(&contr, &am, &ae);
    let n = ext_of(&bfree, &bm, &be);
    let amat = permute(&ad, &ae, &perm_a);
    let bmat = permute(&bd, &be, &perm_b);
    c.resize(nb * m * n, C64::default());
    for t in 0..nb {
        let at = &amat[t * m * k..(t + 1) * m * k];
        let bt = &bmat[t * k * n..(t + 1) * k * n];
        let ct = &mut c[t * m * n..(t + 1) * m * n];
        for i in 0..m {
            let crow = &mut ct[i * n..(i + 1) * n];
            for (p, &aik) in at[i * k..(i + 1) * k].iter().enumerate() {
                let brow = &bt[p * n..(p + 1) * n];
                for (cj, &bj) in crow.iter_mut().zip(brow) {
                    *cj += aik * bj;
                }
            }
        }
    }
    let produced: Vec<Label> = batch.iter().chain(&afree).chain(&bfree).copied().collect();
    if produced == out {
        return c;
    }
    let prod_ext: Vec<usize> = produced.iter().map(|l| out_ext[pos(out, l)]).collect();
    let perm: Vec<usize> = out.iter().map(|l| pos(&produced, l)).collect();
    permute(&c, &prod_ext, &perm)
}

/// Extra elements the transpose-first kernel stages for one contraction.
pub(crate) fn ttgt_staging(a_size: f64, b_size: f64, out_size: f64) -> f64 {
    a_size + b_size + out_size
}
