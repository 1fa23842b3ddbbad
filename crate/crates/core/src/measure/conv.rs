//! Convolution kernels.
//!
//! Three routes compute the same atoms:
//!
//! * sparse: all pairwise products merged by key;
//! * direct: every atom of one operand shifted across a dense embedding of the other;
//! * FFT: both operands embedded in one dense line and multiplied in frequency space.
//!
//! The dense routes flatten a `d`-dimensional box into a line using the strides of the
//! output box (row-major, last coordinate fastest). Linear index order is then
//! lexicographic order and no sums alias across dimensions. All routes are
//! deterministic; the FFT route also reports a rounding allowance in TV norm.

use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{SignedLatticeMeasure, MAX_COORD};
use crate::error::{Error, Result};

pub(crate) struct ConvOutput {
    pub coords: Vec<i64>,
    pub weights: Vec<f64>,
    /// Rounding allowance of the FFT route, in TV norm.
    pub numeric_err: f64,
}

/// Largest dense line (output cells) any dense route may allocate.
const DENSE_MAX_LEN: u128 = 1 << 25;
/// Below this many products the sparse route is always used.
const SPARSE_ALWAYS: f64 = (1u64 << 16) as f64;
/// Above this many products the sparse route accumulates in a hash map.
const SPARSE_HASHED: usize = 1 << 22;
/// Largest product count the sparse route accepts.
pub(crate) const SPARSE_MAX_PRODUCTS: f64 = (1u64 << 28) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Sparse,
    Direct,
    Fft,
}

struct OutputBox {
    lo: Vec<i64>,
    extents: Vec<u128>,
    strides: Vec<u128>,
    volume: u128,
}

impl OutputBox {
    fn new(lo_x: &[i64], hi_x: &[i64], lo_y: &[i64], hi_y: &[i64]) -> Result<Self> {
        let d = lo_x.len();
        let mut lo = Vec::with_capacity(d);
        let mut extents = Vec::with_capacity(d);
        for k in 0..d {
            let l = lo_x[k] as i128 + lo_y[k] as i128;
            let h = hi_x[k] as i128 + hi_y[k] as i128;
            for v in [l, h] {
                if v.unsigned_abs() > MAX_COORD as u128 {
                    return Err(Error::CoordinateOverflow { value: v });
                }
            }
            lo.push(l as i64);
            extents.push((h - l + 1) as u128);
        }
        let mut strides = vec![1u128; d];
        let mut volume: Option<u128> = Some(1);
        for k in (0..d).rev() {
            strides[k] = volume.unwrap_or(u128::MAX);
            volume = volume.and_then(|v| v.checked_mul(extents[k]));
        }
        Ok(OutputBox {
            lo,
            extents,
            strides,
            volume: volume.unwrap_or(u128::MAX),
        })
    }

    /// Index of `p` measured from the corner `base` (a corner of one operand's box).
    fn offset(&self, p: &[i64], base: &[i64]) -> u128 {
        p.iter()
            .zip(base)
            .zip(&self.strides)
            .map(|((c, b), s)| (c - b) as u128 * s)
            .sum()
    }

    fn decode(&self, mut idx: u128, out: &mut Vec<i64>) {
        for k in 0..self.lo.len() {
            let q = idx / self.strides[k];
            idx -= q * self.strides[k];
            debug_assert!(q < self.extents[k]);
            out.push(self.lo[k] + q as i64);
        }
    }
}

pub(crate) fn convolve_atoms(
    x: &SignedLatticeMeasure,
    y: &SignedLatticeMeasure,
    symmetric: bool,
) -> Result<ConvOutput> {
    let (lo_x, hi_x) = x.bounding_box().expect("nonempty");
    let (lo_y, hi_y) = y.bounding_box().expect("nonempty");
    let bx = OutputBox::new(&lo_x, &hi_x, &lo_y, &hi_y)?;
    let route = choose_route(x, y, &bx, &lo_x, &hi_x, &lo_y, &hi_y);
    let products = x.len() as f64 * y.len() as f64;
    if route == Route::Sparse && products > SPARSE_MAX_PRODUCTS {
        return Err(Error::SupportTooLarge {
            products,
            limit: SPARSE_MAX_PRODUCTS,
        });
    }
    match route {
        Route::Sparse => Ok(sparse(x, y, &bx, &lo_x, &lo_y)),
        Route::Direct => Ok(direct(x, y, &bx, &lo_x, &hi_x, &lo_y, &hi_y)),
        Route::Fft => Ok(fft(x, y, &bx, &lo_x, &lo_y, symmetric)),
    }
}

fn choose_route(
    x: &SignedLatticeMeasure,
    y: &SignedLatticeMeasure,
    bx: &OutputBox,
    lo_x: &[i64],
    hi_x: &[i64],
    lo_y: &[i64],
    hi_y: &[i64],
) -> Route {
    let products = x.len() as f64 * y.len() as f64;
    if products <= SPARSE_ALWAYS {
        return Route::Sparse;
    }
    if bx.volume > DENSE_MAX_LEN {
        return Route::Sparse;
    }
    let len_x = bx.offset(hi_x, lo_x) as f64 + 1.0;
    let len_y = bx.offset(hi_y, lo_y) as f64 + 1.0;
    let sparse_cost = 8.0 * products;
    let direct_cost = (x.len() as f64 * len_y).min(y.len() as f64 * len_x);
    let n = fft_len((len_x + len_y - 1.0) as usize) as f64;
    let fft_cost = 15.0 * n * n.log2().max(1.0);
    // exact routes win unless the transform is clearly cheaper
    if direct_cost <= sparse_cost && direct_cost <= 4.0 * fft_cost {
        Route::Direct
    } else if sparse_cost <= 4.0 * fft_cost {
        Route::Sparse
    } else {
        Route::Fft
    }
}

fn sparse(
    x: &SignedLatticeMeasure,
    y: &SignedLatticeMeasure,
    bx: &OutputBox,
    lo_x: &[i64],
    lo_y: &[i64],
) -> ConvOutput {
    let d = x.dim();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    if bx.volume < u128::MAX {
        // keys are linear indices in the output box, which sort lexicographically;
        // both accumulations add the products of a key in the same (i, j) order
        let ox: Vec<u128> = (0..x.len()).map(|i| bx.offset(x.point(i), lo_x)).collect();
        let oy: Vec<u128> = (0..y.len()).map(|j| bx.offset(y.point(j), lo_y)).collect();
        let mut merged: Vec<(u128, f64)> = if x.len() * y.len() > SPARSE_HASHED {
            let mut acc: HashMap<u128, f64> = HashMap::new();
            for i in 0..x.len() {
                let wx = x.weight(i);
                for j in 0..y.len() {
                    *acc.entry(ox[i] + oy[j]).or_insert(0.0) += wx * y.weight(j);
                }
            }
            let mut v: Vec<(u128, f64)> = acc.into_iter().collect();
            v.sort_unstable_by_key(|e| e.0);
            v
        } else {
            let mut items: Vec<(u128, f64)> = Vec::with_capacity(x.len() * y.len());
            for i in 0..x.len() {
                let wx = x.weight(i);
                for j in 0..y.len() {
                    items.push((ox[i] + oy[j], wx * y.weight(j)));
                }
            }
            items.sort_by_key(|e| e.0);
            let mut v: Vec<(u128, f64)> = Vec::new();
            for (key, w) in items {
                match v.last_mut() {
                    Some(last) if last.0 == key => last.1 += w,
                    _ => v.push((key, w)),
                }
            }
            v
        };
        merged.retain(|e| e.1 != 0.0);
        for (key, w) in merged {
            bx.decode(key, &mut coords);
            weights.push(w);
        }
    } else {
        let mut pts: Vec<i64> = Vec::with_capacity(x.len() * y.len() * d);
        let mut ws: Vec<f64> = Vec::with_capacity(x.len() * y.len());
        for i in 0..x.len() {
            for j in 0..y.len() {
                pts.extend(x.point(i).iter().zip(y.point(j)).map(|(a, b)| a + b));
                ws.push(x.weight(i) * y.weight(j));
            }
        }
        let mut perm: Vec<usize> = (0..ws.len()).collect();
        perm.sort_by(|&a, &b| pts[a * d..(a + 1) * d].cmp(&pts[b * d..(b + 1) * d]));
        let mut k = 0;
        while k < perm.len() {
            let key = &pts[perm[k] * d..(perm[k] + 1) * d];
            let mut w = 0.0;
            while k < perm.len() && &pts[perm[k] * d..(perm[k] + 1) * d] == key {
                w += ws[perm[k]];
                k += 1;
            }
            if w != 0.0 {
                coords.extend_from_slice(key);
                weights.push(w);
            }
        }
    }
    ConvOutput {
        coords,
        weights,
        numeric_err: 0.0,
    }
}

fn embed(m: &SignedLatticeMeasure, bx: &OutputBox, lo: &[i64], hi: &[i64]) -> Vec<f64> {
    let len = bx.offset(hi, lo) as usize + 1;
    let mut v = vec![0.0; len];
    for (p, w) in m.iter() {
        v[bx.offset(p, lo) as usize] = w;
    }
    v
}

fn collect_dense(out: &[f64], bx: &OutputBox, threshold: f64) -> (Vec<i64>, Vec<f64>, Vec<f64>) {
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut dropped = Vec::new();
    for (i, &w) in out.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if w.abs() <= threshold {
            dropped.push(w.abs());
            continue;
        }
        bx.decode(i as u128, &mut coords);
        weights.push(w);
    }
    (coords, weights, dropped)
}

fn direct(
    x: &SignedLatticeMeasure,
    y: &SignedLatticeMeasure,
    bx: &OutputBox,
    lo_x: &[i64],
    hi_x: &[i64],
    lo_y: &[i64],
    hi_y: &[i64],
) -> ConvOutput {
    let len_x = bx.offset(hi_x, lo_x) as usize + 1;
    let len_y = bx.offset(hi_y, lo_y) as usize + 1;
    let mut out = vec![0.0; len_x + len_y - 1];
    // cells accumulate over the atoms of one operand in sorted order
    if x.len() * len_y <= y.len() * len_x {
        let dense_y = embed(y, bx, lo_y, hi_y);
        for (p, w) in x.iter() {
            let off = bx.offset(p, lo_x) as usize;
            for (o, v) in out[off..off + len_y].iter_mut().zip(&dense_y) {
                *o += w * v;
            }
        }
    } else {
        let dense_x = embed(x, bx, lo_x, hi_x);
        for (p, w) in y.iter() {
            let off = bx.offset(p, lo_y) as usize;
            for (o, v) in out[off..off + len_x].iter_mut().zip(&dense_x) {
                *o += w * v;
            }
        }
    }
    let (coords, weights, _) = collect_dense(&out, bx, 0.0);
    ConvOutput {
        coords,
        weights,
        numeric_err: 0.0,
    }
}

/// Smallest `2^a·3^b ≥ n`.
fn fft_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut v = p3;
        while v < n {
            v *= 2;
        }
        best = best.min(v);
        p3 *= 3;
    }
    best
}

fn plan(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

fn fft(
    x: &SignedLatticeMeasure,
    y: &SignedLatticeMeasure,
    bx: &OutputBox,
    lo_x: &[i64],
    lo_y: &[i64],
    symmetric: bool,
) -> ConvOutput {
    let hi_x = x.bounding_box().unwrap().1;
    let hi_y = y.bounding_box().unwrap().1;
    let dx = embed(x, bx, lo_x, &hi_x);
    let squaring = x == y;
    let dy = if squaring { Vec::new() } else { embed(y, bx, lo_y, &hi_y) };
    let len_out = dx.len() + if squaring { dx.len() } else { dy.len() } - 1;
    let n = fft_len(len_out);
    let (fwd, inv) = plan(n);

    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (i, v) in dx.iter().enumerate() {
        z[i].re = *v;
    }
    for (i, v) in dy.iter().enumerate() {
        z[i].im = *v;
    }
    fwd.process(&mut z);
    let mut prod = vec![Complex64::new(0.0, 0.0); n];
    if squaring {
        for (p, v) in prod.iter_mut().zip(&z) {
            *p = v * v;
        }
    } else {
        // unpack the two real transforms from the packed one
        let half_i = Complex64::new(0.0, -0.5);
        for k in 0..n {
            let a = z[k];
            let b = z[(n - k) % n].conj();
            let fx = (a + b) * 0.5;
            let fy = (a - b) * half_i;
            prod[k] = fx * fy;
        }
    }
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = prod[..len_out].iter().map(|c| c.re * scale).collect();
    drop(prod);
    drop(z);

    if symmetric {
        // symmetric operands give a box symmetric about the origin: idx(−p) = L−1−idx(p)
        let l = out.len();
        for i in 0..l / 2 {
            let avg = (out[i] + out[l - 1 - i]) * 0.5;
            out[i] = avg;
            out[l - 1 - i] = avg;
        }
    }

    // Rounding model: each length-n transform has 2-norm relative error at most
    // gamma = 8·eps·(log2 n + 1). Propagated through the pointwise product and the
    // inverse transform this bounds the 2-norm error of the output by
    // gamma·(2‖x‖₂‖y‖₁ + 2‖x‖₁‖y‖₂); the TV error is at most √L times that.
    let gamma = 8.0 * f64::EPSILON * ((n as f64).log2() + 1.0);
    let (x1, x2) = (x.norm(), x.l2_norm());
    let (y1, y2) = if squaring { (x1, x2) } else { (y.norm(), y.l2_norm()) };
    let err_l2 = gamma * (2.0 * x2 * y1 + 2.0 * x1 * y2);
    let sqrt_l = (len_out as f64).sqrt();
    let threshold = err_l2 / sqrt_l;
    let (coords, weights, dropped) = collect_dense(&out, bx, threshold);
    let numeric_err = sqrt_l * err_l2 + super::ordered_sum(dropped);
    ConvOutput {
        coords,
        weights,
        numeric_err,
    }
}
