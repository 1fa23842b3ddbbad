//! Exponentials of signed lattice measures and the approximants built from them:
//! the accompanying compound Poisson law `exp{n(F−I)}`, Hipp's signed measure
//! `D^{*n}`, the first-order expansion around `exp{n(F−I)}` and Bergström partial sums.

mod exp;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use exp::{measure_exp, CANCELLATION_THRESHOLD};

use crate::error::{Error, Result};
use crate::measure::{
    convolution_power, convolve, difference, linear_combine, truncate, tv_distance,
    SignedLatticeMeasure, SymmetricDistribution,
};

/// Which approximation of `F^{*n}` to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ApproximantKind {
    ConvPower,
    AccompanyingCP,
    HippSCP,
    FirstOrderCP,
    BergstromPartial(u32),
}

impl ApproximantKind {
    /// Checks the use-site constraint `k ≤ n − 1` for Bergström partial sums.
    pub fn validate(&self, n: u64) -> Result<()> {
        match self {
            ApproximantKind::BergstromPartial(k) if *k as u64 >= n => Err(Error::InvalidArgument(
                format!("Bergström order k={k} requires k <= n-1 with n={n}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ApproximantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproximantKind::ConvPower => write!(f, "conv"),
            ApproximantKind::AccompanyingCP => write!(f, "cp"),
            ApproximantKind::HippSCP => write!(f, "hipp"),
            ApproximantKind::FirstOrderCP => write!(f, "first"),
            ApproximantKind::BergstromPartial(k) => write!(f, "berg:{k}"),
        }
    }
}

impl FromStr for ApproximantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "conv" | "convpower" => ApproximantKind::ConvPower,
            "cp" | "accompanying" => ApproximantKind::AccompanyingCP,
            "hipp" | "scp" => ApproximantKind::HippSCP,
            "first" | "first-order" => ApproximantKind::FirstOrderCP,
            other => {
                let k = other
                    .strip_prefix("berg:")
                    .or_else(|| other.strip_prefix("berg"))
                    .ok_or_else(|| Error::UnknownId(format!("approximant kind {s:?}")))?;
                ApproximantKind::BergstromPartial(
                    k.parse()
                        .map_err(|_| Error::UnknownId(format!("approximant kind {s:?}")))?,
                )
            }
        })
    }
}

/// One `(n, kind)` evaluation: TV distance between `F^{*n}` and the approximant.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproximationResult {
    pub n: u64,
    pub kind: ApproximantKind,
    pub tv_distance: f64,
    pub err_interval: f64,
    pub support_size: usize,
    pub elapsed: f64,
}

impl ApproximationResult {
    /// Interval guaranteed to contain the exact distance.
    pub fn interval(&self) -> (f64, f64) {
        (
            (self.tv_distance - self.err_interval).max(0.0),
            self.tv_distance + self.err_interval,
        )
    }
}

fn f_minus_i(f: &SymmetricDistribution) -> Result<SignedLatticeMeasure> {
    difference(f.measure(), &SignedLatticeMeasure::identity(f.dim()))
}

/// `exp{λ(F − I)}`.
pub fn cp_accompanying(
    f: &SymmetricDistribution,
    lambda: f64,
    tol: f64,
) -> Result<SignedLatticeMeasure> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("CP intensity {lambda} must be > 0")));
    }
    let g = f_minus_i(f)?;
    measure_exp(&g.scaled(lambda), tol)
}

/// Exponent of `D^{*a}`: `a(F−I) − a(F−I)^{*2}/2`.
pub fn hipp_exponent(f: &SymmetricDistribution, a: f64) -> Result<SignedLatticeMeasure> {
    let g = f_minus_i(f)?;
    let g2 = convolve(&g, &g)?;
    linear_combine(&[(a, &g), (-a / 2.0, &g2)])
}

/// Hipp's signed compound Poisson measure `D^{*a} = exp{a(F−I) − a(F−I)^{*2}/2}`.
/// `a` may be negative.
pub fn hipp_power(f: &SymmetricDistribution, a: f64, tol: f64) -> Result<SignedLatticeMeasure> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("Hipp power a={a} must be finite and nonzero")));
    }
    measure_exp(&hipp_exponent(f, a)?, tol)
}

/// `exp{n(F−I)} * (I − n(F−I)^{*2}/2)`.
///
/// The correction factor is built exactly; the exponential gets `tol/(2‖correction‖)`
/// so that its error, amplified by the correction, stays within `tol/2`. The final
/// product is truncated with the other half.
pub fn first_order_cp(f: &SymmetricDistribution, n: u64, tol: f64) -> Result<SignedLatticeMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let g = f_minus_i(f)?;
    let g2 = convolve(&g, &g)?;
    let identity = SignedLatticeMeasure::identity(f.dim());
    let correction = linear_combine(&[(1.0, &identity), (-(n as f64) / 2.0, &g2)])?;
    let cp = cp_accompanying(f, n as f64, tol / (2.0 * correction.norm().max(1.0)))?;
    let out = convolve(&cp, &correction)?;
    Ok(truncate(&out, tol / 2.0))
}

/// Exact binomial coefficient in 128-bit arithmetic.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i)/(i+1) stays integral at every step
        let num = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::BinomialOverflow { n, k })?;
        acc = num / (i + 1) as u128;
    }
    Ok(acc)
}

/// `Σ_{m=0}^{k} C(n,m) D^{*(n−m)} * (F−D)^{*m}`, the subtracted sum of the order-`k`
/// Bergström expansion. `(F−D)^{*m}` is formed first (it has small norm), then
/// convolved with `D^{*(n−m)}`.
pub fn bergstrom_partial(
    f: &SymmetricDistribution,
    n: u64,
    k: u32,
    tol: f64,
) -> Result<SignedLatticeMeasure> {
    ApproximantKind::BergstromPartial(k).validate(n)?;
    let term_tol = tol / (k as f64 + 1.0);
    // bound on ‖D^{*m}‖, used only to split budgets
    let d_norm = 3.5 / f.q().sqrt();
    let fd = if k > 0 {
        let d1 = hipp_power(f, 1.0, term_tol / (8.0 * k as f64 * binomial(n, k as u64)? as f64))?;
        Some(difference(f.measure(), &d1)?)
    } else {
        None
    };
    let mut terms = Vec::with_capacity(k as usize + 1);
    for m in 0..=k as u64 {
        let c = binomial(n, m)? as f64;
        let term = if m == 0 {
            hipp_power(f, n as f64, term_tol)?
        } else {
            let fd_pow = convolution_power(
                fd.as_ref().unwrap(),
                m,
                term_tol / (4.0 * c * d_norm),
            )?;
            let d_tol = term_tol / (4.0 * c * fd_pow.norm().max(f64::MIN_POSITIVE));
            let d = hipp_power(f, (n - m) as f64, d_tol.min(term_tol))?;
            convolve(&d, &fd_pow)?.scaled(c)
        };
        terms.push(term);
    }
    let max_term = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let refs: Vec<(f64, &SignedLatticeMeasure)> = terms.iter().map(|t| (1.0, t)).collect();
    let sum = linear_combine(&refs)?;
    exp::check_cancellation("Bergström sum", sum.norm(), max_term)?;
    Ok(sum)
}

/// Builds the approximant of `F^{*n}` of the given kind.
pub fn build_approximant(
    f: &SymmetricDistribution,
    n: u64,
    kind: ApproximantKind,
    tol: f64,
) -> Result<SignedLatticeMeasure> {
    kind.validate(n)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    match kind {
        ApproximantKind::ConvPower => convolution_power(f.measure(), n, tol),
        ApproximantKind::AccompanyingCP => cp_accompanying(f, n as f64, tol),
        ApproximantKind::HippSCP => hipp_power(f, n as f64, tol),
        ApproximantKind::FirstOrderCP => first_order_cp(f, n, tol),
        ApproximantKind::BergstromPartial(k) => bergstrom_partial(f, n, k, tol),
    }
}

/// TV distance between `F^{*n}` and the chosen approximant, with its error interval.
/// Half of `tol` goes to each side.
pub fn approximate(
    f: &SymmetricDistribution,
    n: u64,
    kind: ApproximantKind,
    tol: f64,
) -> Result<ApproximationResult> {
    kind.validate(n)?;
    let start = Instant::now();
    let target = convolution_power(f.measure(), n, tol / 2.0)?;
    let approximant = if kind == ApproximantKind::ConvPower {
        target.clone()
    } else {
        build_approximant(f, n, kind, tol / 2.0)?
    };
    compare(&target, &approximant, n, kind, start)
}

/// Packages the distance between an already computed `F^{*n}` and approximant.
pub fn compare(
    target: &SignedLatticeMeasure,
    approximant: &SignedLatticeMeasure,
    n: u64,
    kind: ApproximantKind,
    start: Instant,
) -> Result<ApproximationResult> {
    let (tv_distance, err_interval) = tv_distance(target, approximant)?;
    Ok(ApproximationResult {
        n,
        kind,
        tv_distance,
        err_interval,
        support_size: approximant.len(),
        elapsed: start.elapsed().as_secs_f64(),
    })
}
