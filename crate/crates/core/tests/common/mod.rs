//! Exact reference computations for one-dimensional laws with dyadic masses.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use latcp::SignedLatticeMeasure;

/// Laurent polynomial `Σ num[i]/2^shift · z^(lo+i)` with integer coefficients.
#[derive(Clone, Debug)]
pub struct Dyadic {
    pub lo: i64,
    pub num: Vec<BigInt>,
    pub shift: u64,
}

impl Dyadic {
    /// Masses `units[i]/2^bits` at `lo + i`.
    pub fn new(lo: i64, units: &[i64], bits: u64) -> Self {
        Dyadic {
            lo,
            num: units.iter().map(|&u| BigInt::from(u)).collect(),
            shift: bits,
        }
    }

    pub fn identity() -> Self {
        Dyadic::new(0, &[1], 0)
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        let mut num = vec![BigInt::zero(); self.num.len() + other.num.len() - 1];
        for (i, a) in self.num.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.num.iter().enumerate() {
                num[i + j] += a * b;
            }
        }
        Dyadic {
            lo: self.lo + other.lo,
            num,
            shift: self.shift + other.shift,
        }
    }

    pub fn pow(&self, n: u64) -> Dyadic {
        let mut acc = Dyadic::identity();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Value at `x`, with relative error below `2^-58`.
    pub fn at(&self, x: i64) -> f64 {
        let i = x - self.lo;
        if i < 0 || i as usize >= self.num.len() {
            return 0.0;
        }
        let v = &self.num[i as usize];
        let bits = v.bits();
        if bits <= 60 {
            return v.to_f64().unwrap() * 2f64.powi(-(self.shift as i32));
        }
        let drop = bits - 60;
        let top: BigInt = v >> drop;
        top.to_f64().unwrap() * 2f64.powi(drop as i32 - self.shift as i32)
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.num.len() as i64 - 1
    }

    pub fn to_measure(&self) -> SignedLatticeMeasure {
        let atoms: Vec<(Vec<i64>, f64)> =
            (self.lo..=self.hi()).map(|x| (vec![x], self.at(x))).filter(|(_, w)| *w != 0.0).collect();
        SignedLatticeMeasure::from_atoms(1, atoms).unwrap()
    }
}

/// Dense reference values on `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl Dense {
    pub fn at(&self, x: i64) -> f64 {
        let i = x - self.lo;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
}

pub fn exact_power(f: &Dyadic, n: u64) -> Dense {
    let p = f.pow(n);
    Dense {
        lo: p.lo,
        values: (p.lo..=p.hi()).map(|x| p.at(x)).collect(),
    }
}

fn ln_factorial(j: u64) -> f64 {
    (1..=j).map(|i| (i as f64).ln()).sum()
}

/// `exp{λ(F−I)} = Σ_j e^{−λ} λ^j/j! F^{*j}` for a probability `F`, summed until the
/// Poisson tail is below `1e-16`. `F^{*j}` is exact; only the weights are rounded.
pub fn poisson_exp(f: &Dyadic, lambda: f64) -> Dense {
    let weight = |j: u64| (-lambda + j as f64 * lambda.ln() - ln_factorial(j)).exp();
    let mut jmax = 0u64;
    // beyond 2λ the terms fall faster than 1/2 each, so the tail is below 2·w
    while !(jmax as f64 > 2.0 * lambda + 1.0 && weight(jmax) < 1e-18) {
        jmax += 1;
    }
    let lo = f.lo * jmax as i64;
    let hi = f.hi() * jmax as i64;
    let mut values = vec![0.0f64; (hi - lo + 1) as usize];
    let mut p = Dyadic::identity();
    for j in 0..jmax {
        let w = weight(j);
        for x in p.lo..=p.hi() {
            values[(x - lo) as usize] += w * p.at(x);
        }
        p = p.mul(f);
    }
    Dense { lo, values }
}

/// `Σ_x |a(x) − b(x)|`.
pub fn dense_norm_diff(a: &Dense, b: &Dense) -> f64 {
    let lo = a.lo.min(b.lo);
    let hi = a.hi().max(b.hi());
    (lo..=hi).map(|x| (a.at(x) - b.at(x)).abs()).sum()
}

/// `Σ_x |m(x) − r(x)|` over the union of supports.
pub fn norm_vs_dense(m: &SignedLatticeMeasure, r: &Dense) -> f64 {
    let mut total: f64 = (r.lo..=r.hi()).map(|x| (m.weight_at(&[x]) - r.at(x)).abs()).sum();
    for (p, w) in m.iter() {
        if p[0] < r.lo || p[0] > r.hi() {
            total += w.abs();
        }
    }
    total
}

/// Small deterministic generator for oracle cases.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Symmetric law on `[−r, r]` with masses in units of `2^-bits`, `F{0} ≥ 1/4`.
pub fn random_symmetric_dyadic(rng: &mut Lcg, r: i64, bits: u64) -> Dyadic {
    let total = 1i64 << bits;
    let mut units = vec![0i64; (2 * r + 1) as usize];
    let mut left = total - total / 4;
    for k in 1..=r {
        let u = if k == r { left / 2 } else { rng.below((left / 2 + 1) as u64) as i64 };
        units[(r + k) as usize] = u;
        units[(r - k) as usize] = u;
        left -= 2 * u;
    }
    units[r as usize] = total - units.iter().sum::<i64>();
    Dyadic::new(-r, &units, bits)
}
