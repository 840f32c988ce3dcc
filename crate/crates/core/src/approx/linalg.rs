//! Dense complex QR and SVD on row-major matrices.

use crate::numeric::C64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![C64::default(); rows * cols] }
    }

    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn adjoint(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.at(r, c).conj();
            }
        }
        out
    }

    #[cfg(test)]
    pub fn matmul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows);
        let mut out = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            let row = &mut out.data[i * o.cols..(i + 1) * o.cols];
            for p in 0..self.cols {
                let a = self.data[i * self.cols + p];
                if a == C64::default() {
                    continue;
                }
                for (x, &b) in row.iter_mut().zip(&o.data[p * o.cols..(p + 1) * o.cols]) {
                    *x += a * b;
                }
            }
        }
        out
    }

    fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    fn from_columns(rows: usize, cols: &[Vec<C64>]) -> Mat {
        let mut out = Mat::zeros(rows, cols.len());
        for (c, col) in cols.iter().enumerate() {
            for (r, &z) in col.iter().enumerate() {
                out.data[r * cols.len() + c] = z;
            }
        }
        out
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    let scale = a.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|z| (z / scale).norm_sqr()).sum::<f64>().sqrt()
}

fn unit_phase(z: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Thin Householder QR: `a = q r` with `q` of shape `m x k`, `r` of shape
/// `k x n`, `k = min(m, n)`, and the diagonal of `r` real non-negative.
pub(crate) fn qr(a: &Mat) -> (Mat, Mat) {
    let (m, n) = (a.rows, a.cols);
    let k = m.min(n);
    let mut w = a.clone();
    let mut reflectors: Vec<Option<Vec<C64>>> = Vec::with_capacity(k);
    for j in 0..k {
        let x: Vec<C64> = (j..m).map(|r| w.at(r, j)).collect();
        let xn = norm(&x);
        if xn == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = -unit_phase(x[0]) * xn;
        let mut v = x;
        v[0] -= alpha;
        let vn = norm(&v);
        if vn == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vn);
        for c in j..n {
            let s: C64 = (j..m).map(|r| v[r - j].conj() * w.at(r, c)).sum();
            for r in j..m {
                w.data[r * n + c] -= v[r - j] * s * 2.0;
            }
        }
        reflectors.push(Some(v));
    }
    let mut r = Mat::zeros(k, n);
    for i in 0..k {
        for c in i..n {
            r.data[i * n + c] = w.at(i, c);
        }
    }
    let mut q = Mat::zeros(m, k);
    for i in 0..k {
        q.data[i * k + i] = C64::new(1.0, 0.0);
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        let Some(v) = v else { continue };
        for c in 0..k {
            let s: C64 = (j..m).map(|row| v[row - j].conj() * q.at(row, c)).sum();
            for row in j..m {
                q.data[row * k + c] -= v[row - j] * s * 2.0;
            }
        }
    }
    for i in 0..k {
        let ph = unit_phase(r.at(i, i));
        for c in 0..n {
            r.data[i * n + c] *= ph.conj();
        }
        r.data[i * n + i] = C64::new(r.data[i * n + i].norm(), 0.0);
        for row in 0..m {
            q.data[row * k + i] *= ph;
        }
    }
    (q, r)
}

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;
/// Column pairs of a unit-norm matrix whose norms multiply to less than this
/// are left alone.
const NEGLIGIBLE: f64 = 1e-34;

/// Thin SVD `a = u diag(s) vh`, singular values descending. Each right
/// singular vector (row of `vh`, conjugated) has its first significant entry
/// real and non-negative.
pub(crate) fn svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (mut u, s, mut vh) = if a.rows < a.cols {
        let (u, s, vh) = svd_tall(&a.adjoint());
        (vh.adjoint(), s, u.adjoint())
    } else {
        svd_tall(a)
    };
    let k = s.len();
    for r in 0..k {
        let row = &mut vh.data[r * a.cols..(r + 1) * a.cols];
        let pivot = row.iter().position(|z| z.norm() > 1e-12).unwrap_or(0);
        let ph = unit_phase(row[pivot]);
        row.iter_mut().for_each(|z| *z *= ph.conj());
        row[pivot] = C64::new(row[pivot].norm(), 0.0);
        for i in 0..a.rows {
            u.data[i * k + r] *= ph;
        }
    }
    (u, s, vh)
}

fn svd_tall(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (m, n) = (a.rows, a.cols);
    let scale = norm(&a.data);
    let inv = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let mut cols: Vec<Vec<C64>> = (0..n).map(|c| a.column(c).into_iter().map(|z| z * inv).collect()).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|c| {
            let mut e = vec![C64::default(); n];
            e[c] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (np, nq) = (norm(&cols[p]), norm(&cols[q]));
                if np * nq <= NEGLIGIBLE {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= JACOBI_TOL * np * nq {
                    continue;
                }
                rotated = true;
                let (alpha, beta) = (np * np, nq * nq);
                let e = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut cols, &mut v] {
                    let (lo, hi) = mat.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let yq = *y * e.conj();
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = cols.iter().map(|c| norm(c) * scale).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    s = idx.iter().map(|&i| s[i]).collect();
    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let smax = s.first().copied().unwrap_or(0.0);
    for (rank, &i) in idx.iter().enumerate() {
        let vc = v[i].clone();
        let uc = if s[rank] > smax * 1e-13 && s[rank] > 0.0 {
            let mut uc: Vec<C64> = cols[i].iter().map(|z| z * (scale / s[rank])).collect();
            orthogonalize(&mut uc, &u_cols);
            let un = norm(&uc);
            if un > 0.5 {
                uc.iter_mut().for_each(|z| *z /= un);
                uc
            } else {
                complete(&u_cols, m)
            }
        } else {
            complete(&u_cols, m)
        };
        u_cols.push(uc);
        v_cols.push(vc);
    }
    let u = Mat::from_columns(m, &u_cols);
    let vh = Mat::from_columns(n, &v_cols).adjoint();
    (u, s, vh)
}

fn orthogonalize(e: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = dot(b, e);
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
    }
}

/// A unit vector orthogonal to every vector in `basis`.
fn complete(basis: &[Vec<C64>], m: usize) -> Vec<C64> {
    for i in 0..m {
        let mut e = vec![C64::default(); m];
        e[i] = C64::new(1.0, 0.0);
        orthogonalize(&mut e, basis);
        let n = norm(&e);
        if n > 0.5 {
            e.iter_mut().for_each(|z| *z /= n);
            return e;
        }
    }
    vec![C64::default(); m]
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::new(m, n, (0..m * n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
    }

    fn max_diff(a: &Mat, b: &Mat) -> f64 {
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn identity(k: usize) -> Mat {
        let mut e = Mat::zeros(k, k);
        for i in 0..k {
            e.data[i * k + i] = C64::new(1.0, 0.0);
        }
        e
    }

    #[test]
    fn qr_reconstructs_and_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(1, 1), (5, 3), (3, 5), (8, 8), (40, 17), (7, 1), (1, 6)] {
            let a = random(m, n, &mut rng);
            let (q, r) = qr(&a);
            assert!(max_diff(&q.matmul(&r), &a) < 1e-12);
            assert!(max_diff(&q.adjoint().matmul(&q), &identity(m.min(n))) < 1e-12);
            for i in 0..m.min(n) {
                assert!(r.at(i, i).im == 0.0 && r.at(i, i).re >= 0.0);
                for c in 0..i {
                    assert_eq!(r.at(i, c), C64::default());
                }
            }
        }
    }

    #[test]
    fn qr_of_rank_deficient_input() {
        let mut a = Mat::zeros(4, 3);
        a.data[0] = C64::new(1.0, 0.0);
        a.data[1] = C64::new(2.0, 0.0);
        let (q, r) = qr(&a);
        assert!(max_diff(&q.matmul(&r), &a) < 1e-14);
    }

    #[test]
    fn svd_matches_nalgebra_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, n) in [(1, 1), (6, 4), (4, 6), (16, 16), (33, 9)] {
            let a = random(m, n, &mut rng);
            let (u, s, vh) = svd(&a);
            let k = m.min(n);
            let mut us = u.clone();
            for r in 0..m {
                for c in 0..k {
                    us.data[r * k + c] *= s[c];
                }
            }
            assert!(max_diff(&us.matmul(&vh), &a) < 1e-12);
            assert!(max_diff(&u.adjoint().matmul(&u), &identity(k)) < 1e-12);
            assert!(max_diff(&vh.matmul(&vh.adjoint()), &identity(k)) < 1e-12);
            let oracle = DMatrix::from_row_slice(m, n, &a.data).singular_values();
            let mut want: Vec<f64> = oracle.iter().copied().collect();
            want.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in s.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
            for r in 0..k {
                let v0 = vh.at(r, 0).conj();
                assert!(v0.im.abs() < 1e-14 && v0.re >= 0.0);
            }
        }
    }

    #[test]
    fn factorizations_survive_tiny_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random(16, 16, &mut rng);
        for r in 0..16 {
            for c in 4..16 {
                a.data[r * 16 + c] *= 1e-158 * (c as f64);
            }
        }
        let (q, r) = qr(&a);
        assert!(max_diff(&q.matmul(&r), &a) < 1e-14);
        assert!(max_diff(&q.adjoint().matmul(&q), &identity(16)) < 1e-12);
        for t in [a.clone(), a.adjoint()] {
            let (u, s, vh) = svd(&t);
            let mut us = u.clone();
            for r in 0..16 {
                for c in 0..16 {
                    us.data[r * 16 + c] *= s[c];
                }
            }
            assert!(max_diff(&us.matmul(&vh), &t) < 1e-14);
            assert!(max_diff(&u.adjoint().matmul(&u), &identity(16)) < 1e-12);
            assert!(max_diff(&vh.matmul(&vh.adjoint()), &identity(16)) < 1e-12);
        }
    }

    #[test]
    fn svd_rank_deficient_completes_the_basis() {
        let mut a = Mat::zeros(3, 3);
        a.data[0] = C64::new(1.0, 0.0);
        let (u, s, vh) = svd(&a);
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
        assert!(max_diff(&u.adjoint().matmul(&u), &identity(3)) < 1e-14);
        assert!(max_diff(&vh.matmul(&vh.adjoint()), &identity(3)) < 1e-14);
    }
}
