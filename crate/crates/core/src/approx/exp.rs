use crate::error::{Error, Result};
use crate::measure::{convolve, linear_combine, truncate, SignedLatticeMeasure};

/// Ratio below which a computation is refused as numerically meaningless.
pub const CANCELLATION_THRESHOLD: f64 = 1e-8;

const MAX_HALVINGS: u32 = 60;

/// Taylor order `k` such that `r^{k+1} e^r / (k+1)! ≤ target`, with that remainder.
pub(crate) fn taylor_order(r: f64, target: f64) -> (usize, f64) {
    let er = r.exp();
    let mut k = 0usize;
    // r^{k+1}/(k+1)!
    let mut pow_fact = r;
    loop {
        let rem = pow_fact * er;
        if rem <= target || pow_fact == 0.0 {
            return (k, rem);
        }
        k += 1;
        pow_fact *= r / (k + 1) as f64;
        assert!(k < 400, "Taylor order did not converge");
    }
}

/// `exp{M} = Σ_j M^{*j}/j!` by scaling and squaring.
///
/// `M` is halved `s` times until `‖M/2^s‖ ≤ 1`. The series for `exp{M/2^s}` is
/// summed to the order where the exponential-series remainder
/// `‖M/2^s‖^{k+1} e^{‖M/2^s‖}/(k+1)!` falls below `tol/2^{s+2}`, and the result is squared
/// `s` times. Truncation budgets: `tol/2^{s+2}` across the series terms and
/// `tol/(2s) · 2^{-(s-j)}` after the `j`-th squaring. Every convolution tracks its own
/// error, so the returned `trunc_err` is the full propagated bound, including the
/// error carried in by `M`.
///
/// `tol = 0` sums the series to machine precision and never truncates.
pub fn measure_exp(m: &SignedLatticeMeasure, tol: f64) -> Result<SignedLatticeMeasure> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exponential tolerance {tol} must be finite and >= 0"
        )));
    }
    let dim = m.dim();
    if m.is_empty() {
        // exp of a measure within err of zero is within e^err − 1 of I
        return Ok(SignedLatticeMeasure::identity(dim).with_added_err(m.trunc_err().exp_m1()));
    }
    let norm = m.norm();
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 1.0 {
        s += 1;
        if s > MAX_HALVINGS {
            return Err(Error::ExponentTooLarge { norm });
        }
    }
    let scale = 0.5f64.powi(s as i32);
    let ms = m.scaled(scale);
    let r = ms.norm();

    let quarter = 2f64.powi(-(s as i32) - 2);
    let remainder_target = if tol > 0.0 {
        tol * quarter
    } else {
        f64::EPSILON * quarter
    };
    let (k, remainder) = taylor_order(r, remainder_target);
    let term_budget = if tol > 0.0 && k > 0 {
        tol * quarter / k as f64
    } else {
        0.0
    };

    let identity = SignedLatticeMeasure::identity(dim);
    let mut terms = vec![identity];
    for j in 1..=k {
        let next = convolve(terms.last().unwrap(), &ms)?.scaled(1.0 / j as f64);
        terms.push(truncate(&next, term_budget));
    }
    let max_term = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let refs: Vec<(f64, &SignedLatticeMeasure)> = terms.iter().map(|t| (1.0, t)).collect();
    let mut acc = linear_combine(&refs)?.with_added_err(remainder);
    check_cancellation("exponential series", acc.norm(), max_term)?;
    drop(terms);

    for j in 1..=s {
        let before = acc.norm();
        acc = convolve(&acc, &acc)?;
        check_cancellation("exponential squaring", acc.norm(), before * before)?;
        if tol > 0.0 {
            let budget = tol / (2.0 * s as f64) * 2f64.powi(-((s - j) as i32));
            acc = truncate(&acc, budget);
        }
    }
    Ok(acc)
}

pub(crate) fn check_cancellation(context: &str, result: f64, scale: f64) -> Result<()> {
    if scale > 0.0 {
        let ratio = result / scale;
        if ratio < CANCELLATION_THRESHOLD {
            return Err(Error::Cancellation {
                context: context.to_string(),
                ratio,
                threshold: CANCELLATION_THRESHOLD,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{symmetry_check, tv_distance, LatticePoint};

    fn poisson_step(lambda: f64) -> SignedLatticeMeasure {
        SignedLatticeMeasure::from_atoms(1, [(vec![1], lambda), (vec![0], -lambda)]).unwrap()
    }

    #[test]
    fn taylor_order_meets_target() {
        let (k, rem) = taylor_order(1.0, 1e-12);
        assert!(rem <= 1e-12);
        let (_, prev) = taylor_order(1.0, rem * 1.0001);
        assert!(prev <= 1e-12);
        assert!(k >= 13 && k <= 16, "k = {k}");
        assert_eq!(taylor_order(0.0, 1e-20).0, 0);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = measure_exp(&SignedLatticeMeasure::zero(2), 1e-9).unwrap();
        assert_eq!(e, SignedLatticeMeasure::identity(2));
    }

    #[test]
    fn exp_of_poisson_exponent_is_poisson_pmf() {
        let tol = 1e-10;
        let e = measure_exp(&poisson_step(2.0), tol).unwrap();
        let mut fact = 1.0;
        let mut pmf = Vec::new();
        for k in 0..60i64 {
            if k > 0 {
                fact *= k as f64;
            }
            pmf.push((vec![k], (-2.0f64).exp() * 2f64.powi(k as i32) / fact));
        }
        let oracle = SignedLatticeMeasure::from_atoms(1, pmf).unwrap();
        let (d, err) = tv_distance(&e, &oracle).unwrap();
        assert!(2.0 * d <= tol + 1e-14, "TV gap {}", 2.0 * d);
        assert!(err <= tol);
    }

    #[test]
    fn exp_rejects_bad_tolerance_and_huge_norms() {
        assert!(measure_exp(&poisson_step(1.0), -1.0).is_err());
        assert!(measure_exp(&poisson_step(1.0), f64::NAN).is_err());
        let huge = poisson_step(1e300);
        assert!(matches!(
            measure_exp(&huge, 1e-9),
            Err(Error::ExponentTooLarge { .. })
        ));
    }

    #[test]
    fn exp_preserves_symmetry() {
        let m = SignedLatticeMeasure::from_atoms(
            2,
            [(vec![1, 1], 1.5), (vec![-1, -1], 1.5), (vec![0, 0], -3.0)],
        )
        .unwrap();
        let e = measure_exp(&m, 1e-9).unwrap();
        assert!(symmetry_check(&e));
        assert!((e.total_mass() - 1.0).abs() <= e.trunc_err() + 1e-12);
        assert!(e.weight_at(LatticePoint::origin(2).coords()) > 0.0);
    }

    #[test]
    fn exp_carries_input_error() {
        let m = poisson_step(3.0).with_added_err(1e-6);
        let e = measure_exp(&m, 1e-12).unwrap();
        assert!(e.trunc_err() >= 1e-6);
        assert!(e.trunc_err() <= 1e-6 * std::f64::consts::E * 1.5);
    }
}
