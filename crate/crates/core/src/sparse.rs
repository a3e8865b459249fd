//! Matrix-free evolution for registers too large for dense
//! eigendecompositions: Chebyshev expansion of the propagator and restarted
//! Lanczos for the lowest levels.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::adiabatic::C64;
use crate::error::{Error, Result};

/// `(1 - s) sum_i X_i + s D` with `D` diagonal.
pub(crate) struct Operator<'a> {
    pub k: usize,
    pub diag: &'a [f64],
    pub s: f64,
}

pub(crate) trait Amp:
    Copy + Default + AddAssign + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}
impl Amp for f64 {}
impl Amp for C64 {}

impl Operator<'_> {
    pub fn apply<T: Amp>(&self, v: &[T], out: &mut [T]) {
        let a = 1.0 - self.s;
        for (b, o) in out.iter_mut().enumerate() {
            let mut x = T::default();
            for i in 0..self.k {
                x += v[b ^ (1 << i)];
            }
            *o = x * a + v[b] * (self.s * self.diag[b]);
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let off = (1.0 - self.s) * self.k as f64;
        let (lo, hi) = self
            .diag
            .iter()
            .map(|d| self.s * d)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(d), h.max(d)));
        (lo - off, hi + off)
    }
}

/// `J_0(x) ..= J_N(x)` by downward recurrence, truncated once the terms fall
/// below `1e-18`.
pub(crate) fn bessel_j_series(x: f64) -> Vec<f64> {
    if x.abs() < 1e-300 {
        return vec![1.0];
    }
    let start = (x.abs() + 20.0 * x.abs().cbrt() + 60.0) as usize;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for n in (1..=start).rev() {
        j[n - 1] = 2.0 * n as f64 / x * j[n] - j[n + 1];
        if j[n - 1].abs() > 1e250 {
            for v in &mut j[n - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut j {
        *v /= norm;
    }
    let last = j.iter().rposition(|v| v.abs() > 1e-18).unwrap_or(0);
    j.truncate(last + 1);
    j
}

/// `exp(-i H tau) psi` by Chebyshev expansion over the Gershgorin interval.
pub(crate) fn chebyshev_propagate(op: &Operator, psi: &[C64], tau: f64) -> Vec<C64> {
    let (lo, hi) = op.spectral_bounds();
    let c = 0.5 * (lo + hi);
    let r = (0.5 * (hi - lo)).max(1e-12);
    let coeffs = bessel_j_series(r * tau);
    let dim = psi.len();
    let scaled = |v: &[C64], out: &mut [C64]| {
        op.apply(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = (*o - *x * c) * (1.0 / r);
        }
    };

    let mut prev = psi.to_vec();
    let mut acc: Vec<C64> = psi.iter().map(|x| *x * coeffs[0]).collect();
    if coeffs.len() > 1 {
        let mut cur = vec![C64::default(); dim];
        scaled(&prev, &mut cur);
        let mut phase = C64::new(0.0, -1.0);
        for (a, x) in acc.iter_mut().zip(&cur) {
            *a += *x * phase * (2.0 * coeffs[1]);
        }
        let mut next = vec![C64::default(); dim];
        for jn in &coeffs[2..] {
            scaled(&cur, &mut next);
            for (nx, p) in next.iter_mut().zip(&prev) {
                *nx = *nx * 2.0 - *p;
            }
            phase *= C64::new(0.0, -1.0);
            let w = phase * (2.0 * jn);
            for (a, x) in acc.iter_mut().zip(&next) {
                *a += *x * w;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    let global = C64::from_polar(1.0, -c * tau);
    acc.into_iter().map(|a| a * global).collect()
}

/// Lowest two levels reached from `start` and the ground vector.
pub(crate) struct LowLevels {
    pub e0: f64,
    pub e1: Option<f64>,
    pub ground: Vec<f64>,
}

/// Orthonormal search space together with its image under the operator.
struct Subspace {
    v: DMatrix<f64>,
    hv: DMatrix<f64>,
    cols: usize,
}

impl Subspace {
    /// Orthogonalises `x` against the space and appends it; `false` when
    /// nothing independent is left.
    fn push(&mut self, op: &Operator, mut x: DVector<f64>) -> bool {
        let before = x.norm();
        let v = self.v.columns(0, self.cols);
        for _ in 0..2 {
            let proj = v.tr_mul(&x);
            x.gemv(-1.0, &v, &proj, 1.0);
        }
        let n = x.norm();
        if n <= 1e-10 * before || n == 0.0 {
            return false;
        }
        x /= n;
        let mut hx = DVector::zeros(x.len());
        op.apply(x.as_slice(), hx.as_mut_slice());
        self.v.set_column(self.cols, &x);
        self.hv.set_column(self.cols, &hx);
        self.cols += 1;
        true
    }
}

/// Thick-restart Lanczos with full reorthogonalisation. `start` is perturbed
/// by a fixed pseudo-random vector so no symmetry sector is missed.
pub(crate) fn lowest_levels(op: &Operator, start: &[f64]) -> Result<LowLevels> {
    const WIDTH: usize = 40;
    const KEEP: usize = 10;
    const RESTARTS: usize = 500;
    let dim = start.len();
    let width = WIDTH.min(dim);
    let (lo, hi) = op.spectral_bounds();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let tol = 1e-9 * scale;
    let mut v0 = DVector::from_column_slice(start);
    if v0.normalize_mut() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let spread = 1e-2 / (dim as f64).sqrt();
    for (b, x) in v0.iter_mut().enumerate() {
        let h = (b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 40;
        *x += spread * (h as f64 / (1u64 << 24) as f64 - 0.5);
    }

    let mut space = Subspace {
        v: DMatrix::zeros(dim, width),
        hv: DMatrix::zeros(dim, width),
        cols: 0,
    };
    let mut next = Some(v0);
    for _ in 0..RESTARTS {
        while let Some(x) = next.take() {
            if space.cols < width && space.push(op, x) {
                next = Some(space.hv.column(space.cols - 1).into_owned());
            }
        }
        let m = space.cols;
        let v = space.v.columns(0, m);
        let hv = space.hv.columns(0, m);
        let projected = v.tr_mul(&hv);
        let eig = SymmetricEigen::new((&projected + projected.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let keep = KEEP.min(m);
        let y = DMatrix::from_fn(m, keep, |r, c| eig.eigenvectors[(r, order[c])]);
        let x = v * &y;
        let hx = hv * &y;
        let theta: Vec<f64> = order[..keep].iter().map(|&i| eig.eigenvalues[i]).collect();
        let resid = |i: usize| hx.column(i) - x.column(i) * theta[i];
        let r0 = resid(0);
        let r1 = if keep > 1 { resid(1).norm() } else { 0.0 };
        if r0.norm() <= tol && r1 <= 1e-4 * scale {
            let ground = x.column(0).normalize();
            return Ok(LowLevels {
                e0: theta[0],
                e1: theta.get(1).copied(),
                ground: ground.as_slice().to_vec(),
            });
        }
        space.v.columns_mut(0, keep).copy_from(&x);
        space.hv.columns_mut(0, keep).copy_from(&hx);
        space.cols = keep;
        next = Some(if r0.norm() > tol { r0 } else { resid(1) });
    }
    Err(Error::Numerical("lanczos did not converge".into()))
}
