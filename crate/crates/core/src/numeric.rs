//! Numeric and index-bit foundations shared by both engines.

use std::fmt::Debug;
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

/// Floating-point precision of a simulation (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
}

#[inline]
pub(crate) fn to_complex<T: Real>(z: C64) -> Complex<T> {
    Complex::new(T::from_f64_lossy(z.re), T::from_f64_lossy(z.im))
}

#[inline]
pub(crate) fn to_c64<T: Real>(z: Complex<T>) -> C64 {
    C64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

/// Elements per leaf block of the pairwise reduction. Fixed so results do not
/// depend on the number of threads.
pub const REDUCTION_BLOCK: usize = 1 << 12;

/// Exchanges each listed pair of bit positions in `index`.
pub fn bit_permute(index: u64, swaps: &[(u32, u32)]) -> Result<u64> {
    validate_bit_pairs(swaps, 64)?;
    Ok(bit_permute_unchecked(index, swaps))
}

#[inline]
pub(crate) fn bit_permute_unchecked(index: u64, swaps: &[(u32, u32)]) -> u64 {
    let mut out = index;
    for &(a, b) in swaps {
        let ba = (index >> a) & 1;
        let bb = (index >> b) & 1;
        if ba != bb {
            out ^= (1u64 << a) | (1u64 << b);
        }
    }
    out
}

/// Checks that every bit is below `width` and that no bit appears twice.
pub fn validate_bit_pairs(swaps: &[(u32, u32)], width: u32) -> Result<()> {
    let mut seen = 0u128;
    for &(a, b) in swaps {
        for bit in [a, b] {
            if bit >= width {
                return Err(Error::InvalidArgument(format!(
                    "bit {bit} exceeds width {width}"
                )));
            }
            if seen & (1u128 << bit) != 0 {
                return Err(Error::InvalidArgument(format!(
                    "bit {bit} appears in more than one swap pair"
                )));
            }
            seen |= 1u128 << bit;
        }
    }
    Ok(())
}

/// Spreads the bits of `compact` over the zero positions of `sorted_holes`,
/// i.e. inserts a zero bit at each (ascending) hole position.
#[inline]
pub(crate) fn insert_zero_bits(mut compact: usize, sorted_holes: &[usize]) -> usize {
    for &p in sorted_holes {
        let low = compact & ((1usize << p) - 1);
        compact = ((compact >> p) << (p + 1)) | low;
    }
    compact
}

/// Sum of |z|^2, reduced pairwise over fixed-size blocks.
pub fn norm_squared<T: Real>(v: &[Complex<T>]) -> f64 {
    let block_sums: Vec<f64> = if v.len() > 4 * REDUCTION_BLOCK {
        v.par_chunks(REDUCTION_BLOCK)
            .map(|c| pairwise_sum_by(c, |z| to_f64(z.norm_sqr())))
            .collect()
    } else {
        v.chunks(REDUCTION_BLOCK)
            .map(|c| pairwise_sum_by(c, |z| to_f64(z.norm_sqr())))
            .collect()
    };
    pairwise_sum(&block_sums)
}

#[inline]
fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs, |x| *x)
}

pub(crate) fn pairwise_sum_by<X, F: Fn(&X) -> f64 + Copy>(xs: &[X], f: F) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().map(f).sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

pub(crate) fn pairwise_sum_complex(xs: &[C64]) -> C64 {
    C64::new(pairwise_sum_by(xs, |z| z.re), pairwise_sum_by(xs, |z| z.im))
}

/// Uniform variate in `[0, 1)` from a counter-based stream keyed by
/// `(seed, counter)`. Independent of the order in which counters are drawn.
pub fn counter_uniform(seed: u64, counter: u64) -> f64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(counter) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Formats the low `width` bits of `value` with the most significant bit first.
pub fn format_bits(value: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|b| if (value >> b) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Parses a bit string written most-significant bit first.
pub fn parse_bits(s: &str) -> Result<u64> {
    if s.len() > 64 {
        return Err(Error::InvalidArgument(format!("bit string too long: {}", s.len())));
    }
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidArgument(format!("invalid bit character `{c}`"))),
    })
}
