//! Tensor QR, truncated SVD and gate splitting.

use serde::{Deserialize, Serialize};

use super::linalg::{qr, svd, Mat};
use crate::error::{Error, Result};
use crate::numeric::C64;
use crate::tn::{contract_pair, Label, Tensor};

/// Where the singular values end up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    ToU,
    ToV,
    SplitSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SvdPolicy {
    pub max_extent: Option<usize>,
    /// Discard singular values at or below this.
    pub abs_cutoff: Option<f64>,
    /// Discard singular values at or below this fraction of the largest.
    pub rel_cutoff: Option<f64>,
    /// `None` returns `U` and `V` as isometries.
    pub partition: Option<Partition>,
    /// Rescale the kept singular values to unit norm.
    pub renormalize: bool,
}

impl SvdPolicy {
    pub fn exact() -> Self {
        SvdPolicy::default()
    }

    pub fn max_extent(d: usize) -> Self {
        SvdPolicy { max_extent: Some(d), ..SvdPolicy::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_extent == Some(0) {
            return Err(Error::InvalidArgument("max_extent must be at least 1".into()));
        }
        for c in [self.abs_cutoff, self.rel_cutoff].into_iter().flatten() {
            if !(c >= 0.0) {
                return Err(Error::InvalidArgument(format!("cutoff {c} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Number of leading singular values to keep.
    fn keep(&self, s: &[f64]) -> usize {
        let smax = s.first().copied().unwrap_or(0.0);
        let threshold = self.abs_cutoff.unwrap_or(-1.0).max(self.rel_cutoff.map_or(-1.0, |r| r * smax));
        let mut k = s.iter().take_while(|&&x| x > threshold).count();
        let cap = self.max_extent.unwrap_or(usize::MAX);
        let tie = smax * 1e-10;
        while k > 0 && k < s.len() && k < cap && s[k - 1] - s[k] <= tie {
            k += 1;
        }
        k.min(cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdInfo {
    pub full_extent: usize,
    pub reduced_extent: usize,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
    /// All singular values before truncation, descending.
    pub singular_values: Vec<f64>,
}

fn fresh_label(modes: &[&[Label]]) -> Label {
    Label(modes.iter().flat_map(|m| m.iter()).map(|l| l.0 + 1).max().unwrap_or(0))
}

/// Reshapes `t` into a matrix with `left` as row modes and `right` as column modes.
fn matricize(t: &Tensor, left: &[Label], right: &[Label]) -> Result<(Mat, Vec<usize>, Vec<usize>)> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidArgument("both sides of a decomposition need at least one mode".into()));
    }
    let mut all: Vec<Label> = left.iter().chain(right).copied().collect();
    let order = all.clone();
    all.sort_unstable();
    let mut own = t.modes().to_vec();
    own.sort_unstable();
    if all != own {
        return Err(Error::InvalidArgument("left and right modes must partition the tensor's modes".into()));
    }
    let ext = |l: &Label| t.extent_of(*l).expect("checked");
    let le: Vec<usize> = left.iter().map(ext).collect();
    let re: Vec<usize> = right.iter().map(ext).collect();
    let p = t.permuted(&order)?;
    Ok((Mat::new(le.iter().product(), re.iter().product(), p.into_data()), le, re))
}

fn tensor_from(modes: Vec<Label>, extents: Vec<usize>, data: Vec<C64>) -> Tensor {
    Tensor::new(modes, extents, data).expect("consistent shape")
}

/// `t = Q R` with `Q` carrying `left` modes plus a new bond (last) and `R`
/// carrying the bond (first) plus `right`. `Q` is an isometry over the bond
/// and `R`'s diagonal is real non-negative.
pub fn tensor_qr(t: &Tensor, left: &[Label], right: &[Label]) -> Result<(Tensor, Tensor)> {
    let (m, le, re) = matricize(t, left, right)?;
    let (q, r) = qr(&m);
    let bond = fresh_label(&[t.modes()]);
    let k = q.cols;
    let qm: Vec<Label> = left.iter().copied().chain([bond]).collect();
    let qe: Vec<usize> = le.into_iter().chain([k]).collect();
    let rm: Vec<Label> = [bond].into_iter().chain(right.iter().copied()).collect();
    let rext: Vec<usize> = [k].into_iter().chain(re).collect();
    Ok((tensor_from(qm, qe, q.data), tensor_from(rm, rext, r.data)))
}

/// Truncated SVD: `t ≈ U diag(S) V`. `U` carries `left` plus a new bond
/// (last), `V` the bond (first) plus `right`. Singular values are folded into
/// the factors according to `policy.partition`.
pub fn tensor_svd(t: &Tensor, left: &[Label], right: &[Label], policy: &SvdPolicy) -> Result<(Tensor, Vec<f64>, Tensor, SvdInfo)> {
    policy.validate()?;
    let (m, le, re) = matricize(t, left, right)?;
    let (u, s, vh) = svd(&m);
    let k = policy.keep(&s);
    if k == 0 {
        return Err(Error::AllDiscarded);
    }
    let discarded_weight = s[k..].iter().map(|x| x * x).sum();
    let mut kept = s[..k].to_vec();
    if policy.renormalize {
        let n = kept.iter().map(|x| x * x).sum::<f64>().sqrt();
        kept.iter_mut().for_each(|x| *x /= n);
    }
    let (fu, fv): (Vec<f64>, Vec<f64>) = match policy.partition {
        None => (vec![1.0; k], vec![1.0; k]),
        Some(Partition::ToU) => (kept.clone(), vec![1.0; k]),
        Some(Partition::ToV) => (vec![1.0; k], kept.clone()),
        Some(Partition::SplitSqrt) => (kept.iter().map(|x| x.sqrt()).collect(), kept.iter().map(|x| x.sqrt()).collect()),
    };
    let full = u.cols;
    let mut ud = Vec::with_capacity(u.rows * k);
    for r in 0..u.rows {
        ud.extend((0..k).map(|c| u.data[r * full + c] * fu[c]));
    }
    let mut vd = Vec::with_capacity(k * vh.cols);
    for r in 0..k {
        vd.extend(vh.data[r * vh.cols..(r + 1) * vh.cols].iter().map(|z| z * fv[r]));
    }
    let bond = fresh_label(&[t.modes()]);
    let um: Vec<Label> = left.iter().copied().chain([bond]).collect();
    let ue: Vec<usize> = le.into_iter().chain([k]).collect();
    let vm: Vec<Label> = [bond].into_iter().chain(right.iter().copied()).collect();
    let ve: Vec<usize> = [k].into_iter().chain(re).collect();
    let info = SvdInfo { full_extent: full, reduced_extent: k, discarded_weight, singular_values: s };
    Ok((tensor_from(um, ue, ud), kept, tensor_from(vm, ve, vd), info))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SplitAlgorithm {
    /// Contract everything, then decompose.
    #[default]
    Direct,
    /// Split off the parts of `a` and `b` the gate does not touch by QR first.
    Reduced,
}

fn contract(a: &Tensor, b: &Tensor, keep: &[Label]) -> Result<Tensor> {
    contract_pair(a, b, keep)
}

fn minus(modes: &[Label], drop: &[Label]) -> Vec<Label> {
    modes.iter().copied().filter(|l| !drop.contains(l)).collect()
}

/// Applies a two-site gate to the pair `a`, `b` and factorizes the result back
/// onto two tensors.
///
/// `a` and `b` share exactly one bond mode. `gate` has modes
/// `[out_a, out_b, in_a, in_b]` where `in_a` is a mode of `a` and `in_b` a mode
/// of `b`; the outputs reuse the input labels, so `a'` and `b'` have the same
/// modes as `a` and `b` (only the bond extent may change). Singular values go
/// where `policy.partition` says; `None` folds them into `b'`.
pub fn gate_split(a: &Tensor, b: &Tensor, gate: &Tensor, algorithm: SplitAlgorithm, policy: &SvdPolicy) -> Result<(Tensor, Tensor, SvdInfo)> {
    let shared: Vec<Label> = a.modes().iter().copied().filter(|l| b.modes().contains(l)).collect();
    let [bond] = shared[..] else {
        return Err(Error::InvalidArgument(format!("operands share {} modes; exactly one bond is required", shared.len())));
    };
    let gm = gate.modes();
    if gm.len() != 4 {
        return Err(Error::InvalidArgument("gate tensor needs modes [out_a, out_b, in_a, in_b]".into()));
    }
    let (out_a, out_b, in_a, in_b) = (gm[0], gm[1], gm[2], gm[3]);
    let ext = |t: &Tensor, l: Label| t.extent_of(l);
    if ext(a, in_a).is_none() || ext(b, in_b).is_none() || in_a == bond || in_b == bond {
        return Err(Error::InvalidArgument("gate inputs must be non-bond modes of a and b".into()));
    }
    if ext(a, in_a) != ext(gate, in_a) || ext(b, in_b) != ext(gate, in_b) || gate.extent_of(out_a) != ext(a, in_a) || gate.extent_of(out_b) != ext(b, in_b) {
        return Err(Error::DimensionMismatch {
            expected: ext(a, in_a).unwrap_or(0) * ext(b, in_b).unwrap_or(0),
            actual: gate.extent_of(in_a).unwrap_or(0) * gate.extent_of(in_b).unwrap_or(0),
        });
    }
    if a.modes().iter().chain(b.modes()).any(|l| *l == out_a || *l == out_b) {
        return Err(Error::InvalidArgument("gate output labels must not appear in a or b".into()));
    }
    let policy = SvdPolicy { partition: Some(policy.partition.unwrap_or(Partition::ToV)), ..*policy };
    let a_outer = minus(a.modes(), &[bond, in_a]);
    let b_outer = minus(b.modes(), &[bond, in_b]);

    // theta over (left side, right side) with the gate applied
    let apply_gate = |x: &Tensor, y: &Tensor, left: &[Label], right: &[Label]| -> Result<Tensor> {
        let keep: Vec<Label> = left.iter().chain(right).copied().collect();
        let xy = contract(x, y, &keep)?;
        let keep_out: Vec<Label> = minus(&keep, &[in_a, in_b]).into_iter().chain([out_a, out_b]).collect();
        let theta = contract(&xy, gate, &keep_out)?;
        let relabeled: Vec<Label> = theta.modes().iter().map(|&l| if l == out_a { in_a } else if l == out_b { in_b } else { l }).collect();
        theta.relabeled(relabeled)
    };

    let (ua, vb, info) = match algorithm {
        SplitAlgorithm::Reduced if !a_outer.is_empty() || !b_outer.is_empty() => {
            let base = fresh_label(&[a.modes(), b.modes(), gate.modes()]);
            // splits off the untouched modes, naming the new bond `label`
            let split = |t: &Tensor, outer: &[Label], inner: [Label; 2], label: Label| -> Result<(Option<Tensor>, Tensor)> {
                if outer.is_empty() {
                    return Ok((None, t.clone()));
                }
                let (q, r) = tensor_qr(t, outer, &inner)?;
                let old = *q.modes().last().expect("bond");
                let rename = |x: Tensor| -> Result<Tensor> {
                    let m = x.modes().iter().map(|&l| if l == old { label } else { l }).collect();
                    x.relabeled(m)
                };
                Ok((Some(rename(q)?), rename(r)?))
            };
            let (qa, ra) = split(a, &a_outer, [in_a, bond], base)?;
            let (qb, rb) = split(b, &b_outer, [bond, in_b], Label(base.0 + 1))?;
            let ra_left = minus(ra.modes(), &[bond]);
            let rb_right = minus(rb.modes(), &[bond]);
            let theta = apply_gate(&ra, &rb, &ra_left, &rb_right)?;
            let (u, _, v, info) = tensor_svd(&theta, &ra_left, &rb_right, &policy)?;
            let u = match qa {
                Some(q) => {
                    let keep: Vec<Label> = a_outer.iter().copied().chain([in_a]).chain(minus(u.modes(), &ra_left)).collect();
                    contract(&q, &u, &keep)?
                }
                None => u,
            };
            let v = match qb {
                Some(q) => {
                    let keep: Vec<Label> = minus(v.modes(), &rb_right).into_iter().chain([in_b]).chain(b_outer.iter().copied()).collect();
                    contract(&v, &q, &keep)?
                }
                None => v,
            };
            (u, v, info)
        }
        _ => {
            let left: Vec<Label> = minus(a.modes(), &[bond]);
            let right: Vec<Label> = minus(b.modes(), &[bond]);
            let theta = apply_gate(a, b, &left, &right)?;
            let (u, _, v, info) = tensor_svd(&theta, &left, &right, &policy)?;
            (u, v, info)
        }
    };
    // rename the new bond back to `bond` and restore the operands' mode order
    let restore = |t: Tensor, template: &[Label]| -> Result<Tensor> {
        let own = minus(template, &[bond]);
        let new_bond = *t.modes().iter().find(|l| !own.contains(l)).expect("bond mode");
        let m: Vec<Label> = t.modes().iter().map(|&l| if l == new_bond { bond } else { l }).collect();
        t.relabeled(m)?.permuted(template)
    };
    let a_new = restore(ua, a.modes())?;
    let b_new = restore(vb, b.modes())?;
    Ok((a_new, b_new, info))
}
