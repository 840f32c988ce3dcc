//! In-place amplitude kernels addressed by index bits.
//!
//! Every kernel enumerates "groups": sets of `2^k` amplitudes that differ only
//! in the target bits. Groups are disjoint, so they can be processed in
//! parallel without synchronization.

use num_complex::Complex;
use rayon::prelude::*;

use crate::numeric::{insert_zero_bits, pairwise_sum_complex, to_c64, to_complex, Real, C64};

/// Groups handled by one parallel task. Fixed so reductions are reproducible.
const GROUPS_PER_TASK: usize = 1 << 10;
/// Below this many amplitudes kernels run on the calling thread.
const PARALLEL_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Copy)]
struct SharedMut<T>(*mut T);
// SAFETY: kernels only write through this pointer at indices belonging to the
// group being processed, and groups are pairwise disjoint.
unsafe impl<T: Send> Send for SharedMut<T> {}
unsafe impl<T: Send> Sync for SharedMut<T> {}

impl<T> SharedMut<T> {
    #[inline]
    fn get(&self) -> *mut T {
        self.0
    }
}

/// Resolved index-bit layout of one gate application.
pub(crate) struct GroupLayout {
    holes: Vec<usize>,
    fixed_mask: usize,
    offsets: Vec<usize>,
    num_groups: usize,
}

impl GroupLayout {
    /// `targets` are index bits in matrix order; `controls` are (index bit, value).
    pub(crate) fn new(num_bits: usize, targets: &[usize], controls: &[(usize, bool)]) -> Self {
        let mut holes: Vec<usize> =
            targets.iter().copied().chain(controls.iter().map(|c| c.0)).collect();
        holes.sort_unstable();
        let fixed_mask = controls.iter().filter(|c| c.1).fold(0usize, |m, c| m | (1 << c.0));
        let dim = 1usize << targets.len();
        let offsets = (0..dim)
            .map(|j| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| (j >> b) & 1 == 1)
                    .fold(0usize, |acc, (_, &t)| acc | (1 << t))
            })
            .collect();
        GroupLayout { holes, fixed_mask, offsets, num_groups: 1 << (num_bits - targets.len() - controls.len()) }
    }

    #[inline]
    fn base(&self, group: usize) -> usize {
        insert_zero_bits(group, &self.holes) | self.fixed_mask
    }
}

fn for_each_group<T, F>(amps: &mut [Complex<T>], layout: &GroupLayout, dim: usize, f: F)
where
    T: Real,
    F: Fn(&mut [Complex<T>], &mut [Complex<T>]) + Sync,
{
    let ptr = SharedMut(amps.as_mut_ptr());
    let run = |range: std::ops::Range<usize>| {
        let mut buf = vec![Complex::<T>::default(); dim];
        let mut scratch = vec![Complex::<T>::default(); dim];
        for g in range {
            let base = layout.base(g);
            // SAFETY: indices base|offset are unique to this group.
            unsafe {
                for (b, &o) in buf.iter_mut().zip(&layout.offsets) {
                    *b = *ptr.get().add(base | o);
                }
                f(&mut buf, &mut scratch);
                for (b, &o) in buf.iter().zip(&layout.offsets) {
                    *ptr.get().add(base | o) = *b;
                }
            }
        }
    };
    if amps.len() >= PARALLEL_THRESHOLD {
        let tasks = layout.num_groups.div_ceil(GROUPS_PER_TASK);
        (0..tasks).into_par_iter().for_each(|t| {
            let lo = t * GROUPS_PER_TASK;
            run(lo..(lo + GROUPS_PER_TASK).min(layout.num_groups));
        });
    } else {
        run(0..layout.num_groups);
    }
}

/// Applies a dense `2^k x 2^k` matrix to the target bits of every group with
/// satisfied controls.
pub(crate) fn apply_dense<T: Real>(
    amps: &mut [Complex<T>],
    num_bits: usize,
    matrix: &[C64],
    targets: &[usize],
    controls: &[(usize, bool)],
) {
    let dim = 1usize << targets.len();
    let m: Vec<Complex<T>> = matrix.iter().map(|&z| to_complex(z)).collect();
    let layout = GroupLayout::new(num_bits, targets, controls);
    for_each_group(amps, &layout, dim, |buf, out| {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &m[r * dim..(r + 1) * dim];
            *o = row.iter().zip(buf.iter()).fold(Complex::default(), |acc, (a, b)| acc + *a * *b);
        }
        buf.copy_from_slice(out);
    });
}

/// Applies `M[perm[j], j] = diag[j]` without dense work.
pub(crate) fn apply_permutation<T: Real>(
    amps: &mut [Complex<T>],
    num_bits: usize,
    perm: &[usize],
    diag: &[C64],
    targets: &[usize],
    controls: &[(usize, bool)],
) {
    let dim = perm.len();
    let d: Vec<Complex<T>> = diag.iter().map(|&z| to_complex(z)).collect();
    let layout = GroupLayout::new(num_bits, targets, controls);
    let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
    if identity {
        for_each_group(amps, &layout, dim, |buf, _| {
            for (b, s) in buf.iter_mut().zip(&d) {
                *b = *b * *s;
            }
        });
        return;
    }
    for_each_group(amps, &layout, dim, |buf, tmp| {
        for j in 0..dim {
            tmp[perm[j]] = buf[j] * d[j];
        }
        buf.copy_from_slice(tmp);
    });
}

/// Precomputed masks of a Pauli string over index bits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PauliMasks {
    /// Bits flipped by X or Y.
    pub x: usize,
    /// Bits picking up a sign from Z or Y.
    pub z: usize,
    /// Number of Y factors.
    pub ny: u32,
}

impl PauliMasks {
    /// `P|i> = phase(i) |i ^ x>`
    #[inline]
    pub(crate) fn phase(&self, i: usize) -> C64 {
        let sign = if (i & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let iy = match self.ny % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        iy * sign
    }
}

/// `amps <- cos(theta/2) amps - i sin(theta/2) P amps`
pub(crate) fn apply_pauli_rotation<T: Real>(amps: &mut [Complex<T>], theta: f64, masks: PauliMasks) {
    let (s, c) = (theta / 2.0).sin_cos();
    let minus_is = C64::new(0.0, -s);
    let cc = C64::new(c, 0.0);
    let n = amps.len();
    let ptr = SharedMut(amps.as_mut_ptr());
    if masks.x == 0 {
        let op = |i: usize| {
            let f: Complex<T> = to_complex(cc + minus_is * masks.phase(i));
            // SAFETY: each index visited once.
            unsafe {
                let p = ptr.get().add(i);
                *p = *p * f;
            }
        };
        if n >= PARALLEL_THRESHOLD {
            (0..n).into_par_iter().for_each(op);
        } else {
            (0..n).for_each(op);
        }
        return;
    }
    let high = usize::BITS as usize - 1 - masks.x.leading_zeros() as usize;
    let holes = [high];
    let op = |g: usize| {
        let i = insert_zero_bits(g, &holes);
        let j = i ^ masks.x;
        // SAFETY: the pair (i, j) is unique to group g.
        unsafe {
            let pi = ptr.get().add(i);
            let pj = ptr.get().add(j);
            let a = to_c64(*pi);
            let b = to_c64(*pj);
            *pi = to_complex(cc * a + minus_is * masks.phase(j) * b);
            *pj = to_complex(cc * b + minus_is * masks.phase(i) * a);
        }
    };
    if n >= PARALLEL_THRESHOLD {
        (0..n / 2).into_par_iter().for_each(op);
    } else {
        (0..n / 2).for_each(op);
    }
}

/// Exchanges each pair of index bits in place.
pub(crate) fn swap_bits<T: Real>(amps: &mut [Complex<T>], pairs: &[(usize, usize)]) {
    let pairs32: Vec<(u32, u32)> = pairs.iter().map(|&(a, b)| (a as u32, b as u32)).collect();
    let n = amps.len();
    let ptr = SharedMut(amps.as_mut_ptr());
    let op = |i: usize| {
        let j = crate::numeric::bit_permute_unchecked(i as u64, &pairs32) as usize;
        if j > i {
            // SAFETY: the permutation is an involution, so (i, j) is visited once.
            unsafe { std::ptr::swap(ptr.get().add(i), ptr.get().add(j)) }
        }
    };
    if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().for_each(op);
    } else {
        (0..n).for_each(op);
    }
}

/// `<psi| M |psi>` restricted to groups with satisfied controls; groups with
/// unsatisfied controls contribute `<psi|psi>` on that block.
pub(crate) fn expectation_dense<T: Real>(
    amps: &[Complex<T>],
    num_bits: usize,
    matrix: &[C64],
    targets: &[usize],
    controls: &[(usize, bool)],
) -> C64 {
    let dim = 1usize << targets.len();
    let layout = GroupLayout::new(num_bits, targets, &[]);
    let ctrl_mask = controls.iter().fold(0usize, |m, c| m | (1 << c.0));
    let ctrl_val = controls.iter().filter(|c| c.1).fold(0usize, |m, c| m | (1 << c.0));
    let task = |t: usize| -> C64 {
        let lo = t * GROUPS_PER_TASK;
        let hi = (lo + GROUPS_PER_TASK).min(layout.num_groups);
        let mut buf = vec![C64::default(); dim];
        let partial: Vec<C64> = (lo..hi)
            .map(|g| {
                let base = layout.base(g);
                for (b, &o) in buf.iter_mut().zip(&layout.offsets) {
                    *b = to_c64(amps[base | o]);
                }
                if base & ctrl_mask != ctrl_val {
                    return C64::new(buf.iter().map(|z| z.norm_sqr()).sum(), 0.0);
                }
                let mut acc = C64::default();
                for r in 0..dim {
                    let row = &matrix[r * dim..(r + 1) * dim];
                    let mv = row.iter().zip(&buf).fold(C64::default(), |a, (m, v)| a + m * v);
                    acc += buf[r].conj() * mv;
                }
                acc
            })
            .collect();
        pairwise_sum_complex(&partial)
    };
    reduce_tasks(layout.num_groups, amps.len(), task)
}

/// `<psi| P |psi>` for a Pauli string (coefficient excluded).
pub(crate) fn expectation_pauli<T: Real>(amps: &[Complex<T>], masks: PauliMasks) -> C64 {
    let n = amps.len();
    let task = |t: usize| -> C64 {
        let lo = t * GROUPS_PER_TASK;
        let hi = (lo + GROUPS_PER_TASK).min(n);
        let partial: Vec<C64> = (lo..hi)
            .map(|i| to_c64(amps[i ^ masks.x]).conj() * masks.phase(i) * to_c64(amps[i]))
            .collect();
        pairwise_sum_complex(&partial)
    };
    reduce_tasks(n, n, task)
}

fn reduce_tasks<F: Fn(usize) -> C64 + Sync>(items: usize, amps_len: usize, task: F) -> C64 {
    let tasks = items.div_ceil(GROUPS_PER_TASK);
    let parts: Vec<C64> = if amps_len >= PARALLEL_THRESHOLD {
        (0..tasks).into_par_iter().map(&task).collect()
    } else {
        (0..tasks).map(&task).collect()
    };
    pairwise_sum_complex(&parts)
}

/// Marginal probabilities over `bits`: entry `k` has bit `j` equal to the value
/// of index bit `bits[j]`.
pub(crate) fn marginal_probabilities<T: Real>(amps: &[Complex<T>], num_bits: usize, bits: &[usize]) -> Vec<f64> {
    let layout = GroupLayout::new(num_bits, bits, &[]);
    let outcomes = layout.offsets.len();
    let per_outcome = |k: usize| -> f64 {
        let off = layout.offsets[k];
        let tasks = layout.num_groups.div_ceil(GROUPS_PER_TASK);
        let parts: Vec<f64> = (0..tasks)
            .map(|t| {
                let lo = t * GROUPS_PER_TASK;
                let hi = (lo + GROUPS_PER_TASK).min(layout.num_groups);
                let vals: Vec<f64> = (lo..hi)
                    .map(|g| to_c64(amps[layout.base(g) | off]).norm_sqr())
                    .collect();
                crate::numeric::pairwise_sum(&vals)
            })
            .collect();
        crate::numeric::pairwise_sum(&parts)
    };
    if amps.len() >= PARALLEL_THRESHOLD {
        (0..outcomes).into_par_iter().map(per_outcome).collect()
    } else {
        (0..outcomes).map(per_outcome).collect()
    }
}

/// Zeroes amplitudes whose `bits` differ from `outcome` and rescales the rest.
pub(crate) fn collapse<T: Real>(amps: &mut [Complex<T>], bits: &[usize], outcome: usize, scale: f64) {
    let mask = bits.iter().fold(0usize, |m, &b| m | (1 << b));
    let want = bits
        .iter()
        .enumerate()
        .filter(|(j, _)| (outcome >> j) & 1 == 1)
        .fold(0usize, |m, (_, &b)| m | (1 << b));
    let s = T::from_f64_lossy(scale);
    let op = |(i, a): (usize, &mut Complex<T>)| {
        if i & mask == want {
            *a = *a * s;
        } else {
            *a = Complex::default();
        }
    };
    if amps.len() >= PARALLEL_THRESHOLD {
        amps.par_iter_mut().enumerate().for_each(op);
    } else {
        amps.iter_mut().enumerate().for_each(op);
    }
}
