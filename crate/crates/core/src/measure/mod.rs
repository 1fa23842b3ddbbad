//! Finite signed measures on the integer lattice `Z^d`.
//!
//! A [`SignedLatticeMeasure`] stores its atoms sorted lexicographically in a flat
//! coordinate buffer. Every reduction walks the atoms in that order, so results are
//! bit-reproducible. Each measure carries `trunc_err`, an upper bound in total
//! variation norm on its distance to the exact measure it stands for.

mod conv;
pub mod io;
mod symmetric;

use std::cmp::Ordering;
use std::fmt;

pub use symmetric::SymmetricDistribution;

use crate::error::{Error, Result};

/// Largest admissible absolute lattice coordinate.
pub const MAX_COORD: i64 = 1 << 40;

/// A point of `Z^d`. Ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        LatticePoint(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Self {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl From<&[i64]> for LatticePoint {
    fn from(v: &[i64]) -> Self {
        LatticePoint(v.to_vec())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Neumaier-compensated sum in iteration order.
pub(crate) fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_coord(c: i64) -> Result<()> {
    if c.unsigned_abs() > MAX_COORD as u64 {
        Err(Error::CoordinateOverflow { value: c as i128 })
    } else {
        Ok(())
    }
}

/// Sparse finite signed measure on `Z^d` with a tracked truncation-error bound.
#[derive(Clone, Debug)]
pub struct SignedLatticeMeasure {
    dim: usize,
    coords: Vec<i64>,
    weights: Vec<f64>,
    trunc_err: f64,
    cached_tv: f64,
}

impl PartialEq for SignedLatticeMeasure {
    /// Bitwise equality of atoms and of the error bound.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.coords == other.coords
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.trunc_err.to_bits() == other.trunc_err.to_bits()
    }
}

impl SignedLatticeMeasure {
    /// Builds a measure from sorted, deduplicated, zero-free parts.
    pub(crate) fn from_sorted_parts(
        dim: usize,
        coords: Vec<i64>,
        weights: Vec<f64>,
        trunc_err: f64,
    ) -> Self {
        debug_assert_eq!(coords.len(), dim * weights.len());
        debug_assert!(weights.iter().all(|w| *w != 0.0));
        let cached_tv = ordered_sum(weights.iter().map(|w| w.abs()));
        SignedLatticeMeasure {
            dim,
            coords,
            weights,
            trunc_err,
            cached_tv,
        }
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self::from_sorted_parts(dim, Vec::new(), Vec::new(), 0.0)
    }

    /// The unit mass at the origin, `I`.
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self::from_sorted_parts(dim, vec![0; dim], vec![1.0], 0.0)
    }

    /// `weight · I_a`.
    pub fn point_mass(point: &LatticePoint, weight: f64) -> Result<Self> {
        Self::from_atoms(point.dim(), [(point.clone(), weight)])
    }

    /// Builds a measure from arbitrary atoms. Duplicate points are summed in input order
    /// and zero weights dropped.
    pub fn from_atoms<P, I>(dim: usize, atoms: I) -> Result<Self>
    where
        P: Into<LatticePoint>,
        I: IntoIterator<Item = (P, f64)>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut items: Vec<(LatticePoint, f64)> = Vec::new();
        for (p, w) in atoms {
            let p = p.into();
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite weight at {p}")));
            }
            for &c in p.coords() {
                check_coord(c)?;
            }
            items.push((p, w));
        }
        items.sort_by(|a, b| a.0.cmp(&b.0));
        let mut coords = Vec::with_capacity(items.len() * dim);
        let mut weights = Vec::with_capacity(items.len());
        let mut i = 0;
        while i < items.len() {
            let mut j = i;
            let mut w = 0.0;
            while j < items.len() && items[j].0 == items[i].0 {
                w += items[j].1;
                j += 1;
            }
            if w != 0.0 {
                coords.extend_from_slice(items[i].0.coords());
                weights.push(w);
            }
            i = j;
        }
        Ok(Self::from_sorted_parts(dim, coords, weights, 0.0))
    }

    /// Returns the same atoms with `extra` added to the error bound.
    pub fn with_added_err(mut self, extra: f64) -> Self {
        assert!(extra >= 0.0 && extra.is_finite() || extra == f64::INFINITY);
        self.trunc_err += extra;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn trunc_err(&self) -> f64 {
        self.trunc_err
    }

    /// `Σ|w|` over stored atoms.
    pub fn norm(&self) -> f64 {
        self.cached_tv
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub(crate) fn find(&self, point: &[i64]) -> Option<usize> {
        if point.len() != self.dim {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.point(mid).cmp(point) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Weight stored at `point` (0 if absent).
    pub fn weight_at(&self, point: &[i64]) -> f64 {
        self.find(point).map_or(0.0, |i| self.weights[i])
    }

    /// Total signed mass in sorted order.
    pub fn total_mass(&self) -> f64 {
        ordered_sum(self.weights.iter().copied())
    }

    /// Sum of squared weights, used by the FFT error model.
    pub(crate) fn l2_norm(&self) -> f64 {
        ordered_sum(self.weights.iter().map(|w| w * w)).sqrt()
    }

    /// Multiplies every weight by `c`; the error bound scales by `|c|`.
    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.dim);
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w * c).collect();
        if weights.iter().any(|w| *w == 0.0) {
            // underflow: route through the general constructor path
            let mut coords = Vec::with_capacity(self.coords.len());
            let mut ws = Vec::with_capacity(weights.len());
            for (i, w) in weights.iter().enumerate() {
                if *w != 0.0 {
                    coords.extend_from_slice(self.point(i));
                    ws.push(*w);
                }
            }
            return Self::from_sorted_parts(self.dim, coords, ws, self.trunc_err * c.abs());
        }
        Self::from_sorted_parts(self.dim, self.coords.clone(), weights, self.trunc_err * c.abs())
    }

    /// Reflection `x ↦ −x`. Negation reverses lexicographic order.
    pub fn reflected(&self) -> Self {
        let n = self.len();
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut weights = Vec::with_capacity(n);
        for i in (0..n).rev() {
            coords.extend(self.point(i).iter().map(|c| -c));
            weights.push(self.weights[i]);
        }
        Self::from_sorted_parts(self.dim, coords, weights, self.trunc_err)
    }

    /// Per-coordinate bounding box `(lo, hi)`; `None` for the zero measure.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.coords.chunks_exact(self.dim) {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    /// Canonical total order used to make convolution bitwise commutative.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.coords.cmp(&other.coords))
            .then_with(|| {
                for (a, b) in self.weights.iter().zip(&other.weights) {
                    match a.total_cmp(b) {
                        Ordering::Equal => continue,
                        o => return o,
                    }
                }
                Ordering::Equal
            })
            .then_with(|| self.trunc_err.total_cmp(&other.trunc_err))
    }

    fn symmetric_pairs_support(&self) -> bool {
        let n = self.len();
        (0..n / 2).all(|i| {
            self.point(i)
                .iter()
                .zip(self.point(n - 1 - i))
                .all(|(a, b)| *a == -*b)
        }) && (n % 2 == 0 || self.point(n / 2).iter().all(|c| *c == 0))
    }

    /// Averages the measure with its reflection so that `w(x) == w(−x)` holds bitwise.
    /// The discrepancy `½Σ|w(x) − w(−x)|` is charged to `trunc_err`.
    pub fn symmetrized(&self) -> Self {
        if symmetry_check(self) {
            return self.clone();
        }
        let n = self.len();
        if self.symmetric_pairs_support() {
            let mut weights = self.weights.clone();
            let mut gaps = Vec::with_capacity(n / 2);
            for i in 0..n / 2 {
                let j = n - 1 - i;
                let avg = (self.weights[i] + self.weights[j]) * 0.5;
                gaps.push((self.weights[i] - self.weights[j]).abs());
                weights[i] = avg;
                weights[j] = avg;
            }
            let discrepancy = ordered_sum(gaps);
            if weights.iter().all(|w| *w != 0.0) {
                return Self::from_sorted_parts(
                    self.dim,
                    self.coords.clone(),
                    weights,
                    self.trunc_err + discrepancy,
                );
            }
        }
        let refl = self.reflected();
        let diff = linear_combine(&[(1.0, self), (-1.0, &refl)]).expect("same dimension");
        let discrepancy = 0.5 * diff.norm();
        let avg = linear_combine(&[(0.5, self), (0.5, &refl)]).expect("same dimension");
        // the combination charges 0.5·err twice, i.e. err once
        avg.with_added_err(discrepancy)
    }
}

/// Atomwise `Σ c_i · M_i`. Contributions to each point are added in term order.
pub fn linear_combine(terms: &[(f64, &SignedLatticeMeasure)]) -> Result<SignedLatticeMeasure> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidArgument("linear_combine needs at least one term".into()))?;
    let dim = first.1.dim;
    for (_, m) in terms {
        if m.dim != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: m.dim,
            });
        }
    }
    let trunc_err = ordered_sum(terms.iter().map(|(c, m)| c.abs() * m.trunc_err));
    let total: usize = terms.iter().map(|(_, m)| m.len()).sum();
    let mut coords = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut cursors = vec![0usize; terms.len()];
    loop {
        let mut min: Option<&[i64]> = None;
        for (t, (_, m)) in terms.iter().enumerate() {
            if cursors[t] < m.len() {
                let p = m.point(cursors[t]);
                if min.is_none_or(|q| p < q) {
                    min = Some(p);
                }
            }
        }
        let Some(key) = min else { break };
        let key = key.to_vec();
        let mut w = 0.0;
        for (t, (c, m)) in terms.iter().enumerate() {
            if cursors[t] < m.len() && m.point(cursors[t]) == key.as_slice() {
                w += c * m.weights[cursors[t]];
                cursors[t] += 1;
            }
        }
        if w != 0.0 {
            coords.extend_from_slice(&key);
            weights.push(w);
        }
    }
    Ok(SignedLatticeMeasure::from_sorted_parts(
        dim, coords, weights, trunc_err,
    ))
}

/// `A − B` with the usual error bookkeeping.
pub fn difference(a: &SignedLatticeMeasure, b: &SignedLatticeMeasure) -> Result<SignedLatticeMeasure> {
    linear_combine(&[(1.0, a), (-1.0, b)])
}

/// Convolution `A * B`.
///
/// The result's error bound is `‖A‖·err_B + (‖B‖ + err_B)·err_A` plus the rounding
/// allowance of the FFT path when that path is taken. When both inputs are exactly
/// symmetric the output is symmetrized, so symmetry survives rounding.
pub fn convolve(a: &SignedLatticeMeasure, b: &SignedLatticeMeasure) -> Result<SignedLatticeMeasure> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let (x, y) = if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let propagated = x.norm() * y.trunc_err + (y.norm() + y.trunc_err) * x.trunc_err;
    if x.is_empty() || y.is_empty() {
        return Ok(SignedLatticeMeasure::zero(x.dim).with_added_err(propagated));
    }
    let symmetric = symmetry_check(x) && symmetry_check(y);
    let out = conv::convolve_atoms(x, y, symmetric)?;
    let m = SignedLatticeMeasure::from_sorted_parts(
        x.dim,
        out.coords,
        out.weights,
        propagated + out.numeric_err,
    );
    Ok(if symmetric { m.symmetrized() } else { m })
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// `F^{*n}` by left-to-right square-and-multiply.
///
/// After each convolution the intermediate result is truncated. A step that produces
/// the power `m` gets the budget `tol · (m/n) / (2⌈log₂ n⌉ + 1)`, so that for
/// norm-one measures the propagated truncation stays below `tol`.
pub fn convolution_power(
    f: &SignedLatticeMeasure,
    n: u64,
    tol: f64,
) -> Result<SignedLatticeMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("convolution power needs n >= 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be >= 0")));
    }
    if n == 1 {
        return Ok(f.clone());
    }
    let per_step = tol / (2 * ceil_log2(n) + 1) as f64;
    let budget = |m: u64| per_step * (m as f64 / n as f64);
    let top = 63 - n.leading_zeros();
    let mut acc = f.clone();
    let mut m = 1u64;
    for bit in (0..top).rev() {
        acc = convolve(&acc, &acc)?;
        m *= 2;
        acc = truncate(&acc, budget(m));
        if (n >> bit) & 1 == 1 {
            acc = convolve(&acc, f)?;
            m += 1;
            acc = truncate(&acc, budget(m));
        }
    }
    debug_assert_eq!(m, n);
    Ok(acc)
}

/// Total variation norm `Σ|w|` and the error bound on it.
pub fn tv_norm(m: &SignedLatticeMeasure) -> (f64, f64) {
    (m.norm(), m.trunc_err)
}

/// Total variation distance `½‖A − B‖` and its error bound.
pub fn tv_distance(a: &SignedLatticeMeasure, b: &SignedLatticeMeasure) -> Result<(f64, f64)> {
    let d = difference(a, b)?;
    Ok((0.5 * d.norm(), 0.5 * d.trunc_err))
}

/// Removes the atoms of smallest magnitude whose total magnitude stays within `eps`.
///
/// Ties are broken by lexicographic key. A symmetric input loses atoms in `±` pairs
/// and stays symmetric. Removed mass is added to `trunc_err`.
pub fn truncate(m: &SignedLatticeMeasure, eps: f64) -> SignedLatticeMeasure {
    if !(eps > 0.0) || m.is_empty() {
        return m.clone();
    }
    let n = m.len();
    let symmetric = symmetry_check(m);
    // groups: (magnitude, first index); pairs are (i, n-1-i)
    let mut groups: Vec<(f64, usize)> = if symmetric {
        (0..n.div_ceil(2))
            .map(|i| {
                let j = n - 1 - i;
                let mag = if i == j {
                    m.weights[i].abs()
                } else {
                    m.weights[i].abs() + m.weights[j].abs()
                };
                (mag, i)
            })
            .filter(|(mag, _)| *mag <= eps)
            .collect()
    } else {
        (0..n)
            .map(|i| (m.weights[i].abs(), i))
            .filter(|(mag, _)| *mag <= eps)
            .collect()
    };
    if groups.is_empty() {
        return m.clone();
    }
    groups.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut removed = vec![false; n];
    let mut spent = 0.0;
    for (mag, i) in groups {
        if spent + mag > eps {
            break;
        }
        spent += mag;
        removed[i] = true;
        if symmetric {
            removed[n - 1 - i] = true;
        }
    }
    let mut coords = Vec::with_capacity(m.coords.len());
    let mut weights = Vec::with_capacity(n);
    let mut dropped = Vec::new();
    for i in 0..n {
        if removed[i] {
            dropped.push(m.weights[i].abs());
        } else {
            coords.extend_from_slice(m.point(i));
            weights.push(m.weights[i]);
        }
    }
    let lost = ordered_sum(dropped);
    SignedLatticeMeasure::from_sorted_parts(m.dim, coords, weights, m.trunc_err + lost)
}

/// Exact test of `w(x) == w(−x)` for every atom.
pub fn symmetry_check(m: &SignedLatticeMeasure) -> bool {
    let n = m.len();
    m.symmetric_pairs_support()
        && (0..n / 2).all(|i| m.weights[i].to_bits() == m.weights[n - 1 - i].to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lazy_walk() -> SignedLatticeMeasure {
        SignedLatticeMeasure::from_atoms(1, [(vec![0], 0.5), (vec![1], 0.25), (vec![-1], 0.25)])
            .unwrap()
    }

    fn pm(p: i64, w: f64) -> SignedLatticeMeasure {
        SignedLatticeMeasure::point_mass(&LatticePoint::new(vec![p]), w).unwrap()
    }

    #[test]
    fn from_atoms_sorts_and_merges() {
        let m = SignedLatticeMeasure::from_atoms(
            2,
            [(vec![1, 0], 1.0), (vec![0, 5], 2.0), (vec![1, 0], -1.0), (vec![-3, 2], 0.5)],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(0), &[-3, 2]);
        assert_eq!(m.point(1), &[0, 5]);
        assert_eq!(m.norm(), 2.5);
    }

    #[test]
    fn from_atoms_rejects_bad_input() {
        assert!(matches!(
            SignedLatticeMeasure::from_atoms(2, [(vec![1], 1.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            SignedLatticeMeasure::from_atoms(1, [(vec![MAX_COORD + 1], 1.0)]),
            Err(Error::CoordinateOverflow { .. })
        ));
        assert!(SignedLatticeMeasure::from_atoms(1, [(vec![0], f64::NAN)]).is_err());
    }

    #[test]
    fn linear_combine_cancels_exactly() {
        let f = lazy_walk().with_added_err(1e-3);
        let z = linear_combine(&[(1.0, &f), (-1.0, &f)]).unwrap();
        assert!(z.is_empty());
        assert_eq!(z.trunc_err(), 2e-3);
    }

    #[test]
    fn linear_combine_identity_and_difference() {
        let i = SignedLatticeMeasure::identity(1);
        assert_eq!(linear_combine(&[(1.0, &i)]).unwrap(), i);
        let d = linear_combine(&[(1.0, &lazy_walk()), (-1.0, &i)]).unwrap();
        assert_eq!(d.weight_at(&[0]), -0.5);
        assert_eq!(d.weight_at(&[1]), 0.25);
        assert_eq!(d.weight_at(&[-1]), 0.25);
        assert_eq!(tv_norm(&d).0, 1.0);
    }

    #[test]
    fn linear_combine_dimension_mismatch() {
        let a = SignedLatticeMeasure::identity(1);
        let b = SignedLatticeMeasure::identity(2);
        assert!(matches!(
            linear_combine(&[(1.0, &a), (1.0, &b)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(linear_combine(&[]).is_err());
    }

    #[test]
    fn convolve_identity_and_translation() {
        let f = lazy_walk();
        let i = SignedLatticeMeasure::identity(1);
        assert_eq!(convolve(&i, &f).unwrap(), f);
        let s = convolve(&pm(3, 1.0), &pm(-7, 1.0)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.point(0), &[-4]);
        assert_eq!(s.weight(0), 1.0);
    }

    #[test]
    fn convolve_square_center() {
        let f2 = convolve(&lazy_walk(), &lazy_walk()).unwrap();
        assert_eq!(f2.weight_at(&[0]), 3.0 / 8.0);
        assert_eq!(f2.weight_at(&[2]), 1.0 / 16.0);
        assert!(symmetry_check(&f2));
    }

    #[test]
    fn convolve_error_propagation() {
        let a = lazy_walk().with_added_err(1e-6);
        let b = pm(2, 2.0).with_added_err(1e-5);
        let c = convolve(&a, &b).unwrap();
        let expect = a.norm() * 1e-5 + (b.norm() + 1e-5) * 1e-6;
        let expect_swapped = b.norm() * 1e-6 + (a.norm() + 1e-6) * 1e-5;
        assert!(c.trunc_err() == expect || c.trunc_err() == expect_swapped);
        assert_eq!(convolve(&b, &a).unwrap(), c);
    }

    #[test]
    fn convolve_rejects_overflow() {
        let a = pm(MAX_COORD, 1.0);
        assert!(matches!(
            convolve(&a, &a),
            Err(Error::CoordinateOverflow { .. })
        ));
    }

    #[test]
    fn power_of_point_mass() {
        let p = convolution_power(&pm(1, 1.0), 5, 0.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.point(0), &[5]);
    }

    #[test]
    fn power_one_is_identity_op() {
        let f = lazy_walk().with_added_err(1e-7);
        assert_eq!(convolution_power(&f, 1, 1e-3).unwrap(), f);
    }

    #[test]
    fn power_four_center_coefficient() {
        // ((2 + x + 1/x)/4)^4 = (√x + 1/√x)^8 / 256, central coefficient C(8,4)/256
        let p = convolution_power(&lazy_walk(), 4, 0.0).unwrap();
        assert_eq!(p.weight_at(&[0]), 35.0 / 128.0);
        assert_eq!(p.weight_at(&[4]), 1.0 / 256.0);
    }

    #[test]
    fn tv_norm_examples() {
        assert_eq!(tv_norm(&lazy_walk()).0, 1.0);
        let d = difference(&pm(2, 1.0), &pm(-4, 1.0)).unwrap();
        assert_eq!(tv_norm(&d), (2.0, 0.0));
        let (dist, err) = tv_distance(&pm(2, 1.0), &pm(-4, 1.0)).unwrap();
        assert_eq!((dist, err), (1.0, 0.0));
    }

    #[test]
    fn truncate_zero_eps_is_noop() {
        let f = lazy_walk();
        assert_eq!(truncate(&f, 0.0), f);
    }

    #[test]
    fn truncate_removes_small_pair() {
        let m = SignedLatticeMeasure::from_atoms(
            1,
            [(vec![0], 0.9), (vec![5], 1e-9), (vec![-5], 1e-9)],
        )
        .unwrap();
        let t = truncate(&m, 1e-8);
        assert_eq!(t.len(), 1);
        assert_eq!(t.weight_at(&[0]), 0.9);
        assert_eq!(t.trunc_err(), 2e-9);
    }

    #[test]
    fn truncate_keeps_symmetry_and_budget() {
        let m = SignedLatticeMeasure::from_atoms(
            1,
            [
                (vec![0], 0.5),
                (vec![1], 0.2),
                (vec![-1], 0.2),
                (vec![2], 0.04),
                (vec![-2], 0.04),
                (vec![3], 0.01),
                (vec![-3], 0.01),
            ],
        )
        .unwrap();
        let t = truncate(&m, 0.05);
        assert!(symmetry_check(&t));
        assert_eq!(t.len(), 5);
        assert_eq!(t.trunc_err(), 0.02);
        // a budget too small for a pair removes nothing
        assert_eq!(truncate(&m, 0.015), m);
    }

    #[test]
    fn truncate_tie_break_is_lexicographic() {
        let m = SignedLatticeMeasure::from_atoms(1, [(vec![0], 1.0), (vec![3], 0.1), (vec![7], -0.1)])
            .unwrap();
        let t = truncate(&m, 0.15);
        assert_eq!(t.weight_at(&[3]), 0.0);
        assert_eq!(t.weight_at(&[7]), -0.1);
    }

    #[test]
    fn symmetry_check_examples() {
        assert!(symmetry_check(&lazy_walk()));
        let m = SignedLatticeMeasure::from_atoms(1, [(vec![0], 0.5), (vec![1], 0.5)]).unwrap();
        assert!(!symmetry_check(&m));
        let s = m.symmetrized();
        assert!(symmetry_check(&s));
        assert_eq!(s.weight_at(&[-1]), 0.25);
        assert_eq!(s.trunc_err(), 0.5);
    }

    #[test]
    fn reflection_reverses_order() {
        let m = SignedLatticeMeasure::from_atoms(2, [(vec![0, 1], 1.0), (vec![2, -1], 2.0)]).unwrap();
        let r = m.reflected();
        assert_eq!(r.point(0), &[-2, 1]);
        assert_eq!(r.weight_at(&[0, -1]), 1.0);
    }
}
