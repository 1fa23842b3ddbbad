use std::f64::consts::E;

use super::{delta_upper, lines};
use crate::approx::{bergstrom_partial, hipp_exponent, hipp_power, measure_exp};
use crate::error::{Error, Result};
use crate::measure::{
    convolution_power, convolve, difference, linear_combine, SignedLatticeMeasure,
    SymmetricDistribution,
};

/// Identifiers accepted by [`lemma_lhs`].
pub const LEMMA_IDS: &[&str] = &[
    "koD3", "aka", "fexp", "dexp", "CeRo4.6", "C6a", "e2p", "D2Ftrys", "D2Ftrys.a", "FD2", "FD00",
    "m3", "simi3", "cpto1dim", "normB", "norms",
];

/// Parameters for the lemma evaluators; each lemma reads only what it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaParams {
    pub k: u32,
    pub lambda: f64,
    pub a: f64,
    pub p: f64,
    pub tau: f64,
    pub j: u32,
    pub n: u64,
    pub alphas: Vec<f64>,
}

impl Default for LemmaParams {
    fn default() -> Self {
        LemmaParams {
            k: 1,
            lambda: 1.0,
            a: 1.0,
            p: 0.5,
            tau: 1.0,
            j: 1,
            n: 1,
            alphas: vec![1.0],
        }
    }
}

/// Computed left-hand side of a lemma and its explicit right-hand side. `rhs` is `None`
/// when the lemma only holds up to an unspecified constant; `coefficient` then carries
/// the factor that constant multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaCheck {
    pub lemma_id: String,
    pub lhs: f64,
    pub err: f64,
    pub rhs: Option<f64>,
    pub coefficient: Option<f64>,
}

impl LemmaCheck {
    /// `lhs/rhs` (or `lhs/coefficient` for constant-dependent lemmas).
    pub fn ratio(&self) -> f64 {
        match (self.rhs, self.coefficient) {
            (Some(r), _) => self.lhs / r,
            (None, Some(c)) => self.lhs / c,
            _ => f64::NAN,
        }
    }

    /// Ratio with the error interval removed from the left-hand side.
    pub fn ratio_lower(&self) -> f64 {
        let lhs = (self.lhs - self.err).max(0.0);
        match (self.rhs, self.coefficient) {
            (Some(r), _) => lhs / r,
            (None, Some(c)) => lhs / c,
            _ => f64::NAN,
        }
    }

    /// False only when the computed value exceeds the explicit bound by more than `err`.
    pub fn holds(&self) -> bool {
        match self.rhs {
            Some(r) => self.lhs - self.err <= r * (1.0 + 1e-12) + 1e-15,
            None => true,
        }
    }
}

fn check(id: &str, m: &SignedLatticeMeasure, rhs: Option<f64>, coefficient: Option<f64>) -> LemmaCheck {
    LemmaCheck {
        lemma_id: id.to_string(),
        lhs: m.norm(),
        err: m.trunc_err(),
        rhs,
        coefficient,
    }
}

fn probability(f: &SignedLatticeMeasure) -> Result<()> {
    if f.weights().iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidArgument("lemma input must be a probability measure".into()));
    }
    if (f.total_mass() - 1.0).abs() > f.trunc_err() + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "lemma input has total mass {} instead of 1",
            f.total_mass()
        )));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name}={v} must be positive")))
    }
}

fn fact(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `(F−I)^{*k} * exp{a(F−I)}`.
fn smoothed_power(
    g: &SignedLatticeMeasure,
    k: u32,
    a: f64,
    tol: f64,
) -> Result<SignedLatticeMeasure> {
    // ‖F−I‖ ≤ 2, so each factor's error is amplified by at most 2^k
    let budget = tol / 2f64.powi(k as i32 + 1);
    let e = measure_exp(&g.scaled(a), budget)?;
    let gk = convolution_power(g, k as u64, budget)?;
    convolve(&gk, &e)
}

/// Evaluates both sides of lemma `lemma_id` for the law `f`.
///
/// `f` must be a probability measure; lemmas that need symmetry, `F{0} ∈ (0,1)` or a line
/// structure check that too. `tol` is the truncation budget for the exponentials and
/// powers involved; the reported `err` is the full tracked bound.
pub fn lemma_lhs(
    lemma_id: &str,
    f: &SignedLatticeMeasure,
    params: &LemmaParams,
    tol: f64,
) -> Result<LemmaCheck> {
    probability(f)?;
    let id = lemma_id;
    let dim = f.dim();
    let identity = SignedLatticeMeasure::identity(dim);
    let g = difference(f, &identity)?;
    let sym = || SymmetricDistribution::new(f.clone());
    match id {
        "koD3" => {
            positive("lambda", params.lambda)?;
            let k = params.k.max(1);
            let x = smoothed_power(&g, k, params.lambda, tol)?;
            let rhs = (2.0 * k as f64 / (E * params.lambda)).powf(k as f64 / 2.0);
            Ok(check(id, &x, Some(rhs), None))
        }
        "aka" => {
            positive("a", params.a)?;
            let k = params.k.max(1);
            let x = smoothed_power(&g, k, params.a, tol)?;
            let base = smoothed_power(&g, 1, params.a / k as f64, tol)?;
            let (b, be) = (base.norm(), base.trunc_err());
            let mut out = check(id, &x, Some(b.powi(k as i32)), None);
            // error of ‖R‖^k from the error of ‖R‖
            out.err += k as f64 * (b + be).powi(k as i32 - 1) * be;
            Ok(out)
        }
        "fexp" => {
            positive("a", params.a)?;
            let f = sym()?;
            let k = params.k.max(1);
            let kf = k as f64;
            let x = smoothed_power(&g, k, params.a, tol)?;
            let rhs = (2.0 * kf).powf(kf) * delta_upper(&f, params.a / kf).powf(kf)
                / (E.powf(kf) * params.a.powf(kf));
            Ok(check(id, &x, Some(rhs), None))
        }
        "dexp" => {
            positive("a", params.a)?;
            let lines = lines::decompose_line_mixture(&sym()?)?;
            if !lines.all_sigmas_finite() {
                return Err(Error::InvalidArgument("dexp needs finite σ_m".into()));
            }
            if lines.components.len() < dim {
                return Err(Error::InvalidArgument(format!(
                    "dexp needs K >= d lines, got K={}",
                    lines.components.len()
                )));
            }
            let k = params.k.max(1);
            let kf = k as f64;
            let x = smoothed_power(&g, k, params.a, tol)?;
            let s = lines.sqrt_sigma_sum();
            let rhs = (3.6 * kf).powf(kf) * s.powf(kf) / (E.powf(kf) * params.a.powf(kf));
            Ok(check(id, &x, Some(rhs), None))
        }
        "CeRo4.6" => {
            positive("lambda", params.lambda)?;
            let j = params.j.max(1);
            let jf = j as f64;
            // one-dimensional laws on Z∖{0}: f itself or the projections of its lines
            let laws: Vec<(SignedLatticeMeasure, f64)> = if f.weight_at(&vec![0; dim]) == 0.0 {
                if dim != 1 || !crate::measure::symmetry_check(f) {
                    return Err(Error::InvalidArgument(
                        "CeRo4.6 needs a symmetric law on Z∖{0}".into(),
                    ));
                }
                let s2: f64 = f.iter().map(|(x, w)| (x[0] as f64).powi(2) * w).sum();
                vec![(f.clone(), s2.sqrt())]
            } else {
                let lines = lines::decompose_lines(&sym()?);
                let mut out = Vec::new();
                for c in &lines.components {
                    let atoms = c
                        .masses
                        .iter()
                        .flat_map(|&(k, m)| [(vec![k], m), (vec![-k], m)]);
                    out.push((SignedLatticeMeasure::from_atoms(1, atoms)?, c.sigma));
                }
                out
            };
            let mut worst: Option<LemmaCheck> = None;
            for (p, sigma) in laws {
                if !sigma.is_finite() {
                    return Err(Error::InvalidArgument("CeRo4.6 needs a finite variance".into()));
                }
                let gp = difference(&p, &SignedLatticeMeasure::identity(1))?;
                let x = smoothed_power(&gp, j, params.lambda, tol)?;
                let rhs = 3.6 * (1.0 + sigma).sqrt() * jf.powf(jf + 0.25)
                    / (params.lambda.powf(jf) * E.powf(jf));
                let c = check(id, &x, Some(rhs), None);
                if worst.as_ref().map_or(true, |w| c.ratio() > w.ratio()) {
                    worst = Some(c);
                }
            }
            worst.ok_or_else(|| Error::InvalidArgument("no mass off the origin".into()))
        }
        "C6a" => {
            let (p, n, j) = (params.p, params.n, params.j.max(1));
            if !(p > 0.0 && p < 1.0) || n == 0 {
                return Err(Error::InvalidArgument("C6a needs 0 < p < 1 and n >= 1".into()));
            }
            let q = 1.0 - p;
            let mix = linear_combine(&[(q, &identity), (p, f)])?;
            let budget = tol / 2f64.powi(j as i32 + 1);
            let x = convolve(
                &convolution_power(&g, j as u64, budget)?,
                &convolution_power(&mix, n, budget)?,
            )?;
            let (nf, jf) = (n as f64, j as f64);
            let rhs = E.sqrt()
                * jf.powf(0.25)
                * (nf / (nf + jf)).powf(nf / 2.0)
                * (jf / ((nf + jf) * p * q)).powf(jf / 2.0);
            Ok(check(id, &x, Some(rhs), None))
        }
        "e2p" => {
            let (p, n, tau) = (params.p, params.n as f64, params.tau);
            if !(p > 0.0 && p < 1.0) || !(0.0..=1.0).contains(&tau) || params.n == 0 {
                return Err(Error::InvalidArgument(
                    "e2p needs 0 < p < 1, 0 <= tau <= 1, n >= 1".into(),
                ));
            }
            let g2 = convolve(&g, &g)?;
            let exponent =
                linear_combine(&[(n * p * (1.0 + p) / 2.0, &g), (-n * p * p * tau / 2.0, &g2)])?;
            let x = measure_exp(&exponent, tol)?;
            Ok(check(id, &x, Some(3.5 / (1.0 - p).sqrt()), None))
        }
        "D2Ftrys" => {
            let f = sym()?;
            if params.n == 0 {
                return Err(Error::InvalidArgument("D2Ftrys needs n >= 1".into()));
            }
            let x = hipp_power(&f, params.n as f64, tol)?;
            Ok(check(id, &x, Some(3.5 / f.q().sqrt()), None))
        }
        "D2Ftrys.a" => {
            let f = sym()?;
            let x = hipp_power(&f, params.a, tol)?;
            Ok(check(id, &x, Some((4.0 * params.a.abs()).exp()), None))
        }
        "FD2" | "FD00" => {
            let f = sym()?;
            let d = hipp_power(&f, 1.0, tol)?;
            let gn = g.norm();
            if id == "FD00" {
                let x = difference(&d, &identity)?;
                return Ok(check(id, &x, None, Some(gn)));
            }
            let g3 = convolution_power(&g, 3, 0.0)?;
            let x = linear_combine(&[(1.0, f.measure()), (-1.0, &d), (-1.0 / 3.0, &g3)])?;
            Ok(check(id, &x, None, Some(gn.powi(4))))
        }
        "m3" => {
            let f = sym()?;
            let (n, k) = (params.n, params.k);
            let fn_ = convolution_power(f.measure(), n, tol / 2.0)?;
            let partial = bergstrom_partial(&f, n, k, tol / 2.0)?;
            let x = difference(&fn_, &partial)?;
            let (p, q, nf, kf) = (1.0 - f.q(), f.q(), n as f64, k as f64);
            let coef = p.powf(1.5 * (kf + 1.0))
                / (nf.powf((kf + 1.0) / 2.0) * q.powf((3.0 * kf + 4.0) / 2.0));
            Ok(check(id, &x, None, Some(coef)))
        }
        "simi3" => {
            let f = sym()?;
            let mut terms = Vec::new();
            for (x, px) in f.nonzero_atoms() {
                let ix = SignedLatticeMeasure::from_atoms(dim, [(x.to_vec(), 1.0)])?;
                let neg: Vec<i64> = x.iter().map(|c| -c).collect();
                let inx = SignedLatticeMeasure::from_atoms(dim, [(neg, 1.0)])?;
                let prod = convolve(&difference(&ix, &identity)?, &difference(&inx, &identity)?)?;
                terms.push((-0.5 * px, prod));
            }
            let refs: Vec<(f64, &SignedLatticeMeasure)> = terms.iter().map(|(c, m)| (*c, m)).collect();
            let rhs_side = linear_combine(&refs)?;
            let x = difference(&g, &rhs_side)?;
            let mut out = check(id, &x, Some(0.0), None);
            out.err += 16.0 * f64::EPSILON * (terms.len() as f64 + 2.0);
            Ok(out)
        }
        "cpto1dim" => {
            if params.alphas.is_empty() {
                return Err(Error::InvalidArgument("cpto1dim needs coefficients".into()));
            }
            let mut powers = vec![identity.clone()];
            for _ in 1..params.alphas.len() {
                powers.push(convolve(powers.last().unwrap(), f)?);
            }
            let refs: Vec<(f64, &SignedLatticeMeasure)> =
                params.alphas.iter().copied().zip(powers.iter()).collect();
            let x = linear_combine(&refs)?;
            let rhs = params.alphas.iter().map(|a| a.abs()).sum();
            Ok(check(id, &x, Some(rhs), None))
        }
        "normB" => {
            positive("a", params.a)?;
            let m = g.scaled(params.a);
            let r = m.norm();
            let mut terms = vec![identity.clone()];
            for j in 1..=params.k {
                terms.push(convolve(terms.last().unwrap(), &m)?.scaled(1.0 / j as f64));
            }
            let e = measure_exp(&m, tol)?;
            let mut refs: Vec<(f64, &SignedLatticeMeasure)> = vec![(1.0, &e)];
            refs.extend(terms.iter().map(|t| (-1.0, t)));
            let x = linear_combine(&refs)?;
            let rhs = r.powi(params.k as i32 + 1) * r.exp() / fact(params.k + 1);
            Ok(check(id, &x, Some(rhs), None))
        }
        "norms" => {
            let f = sym()?;
            let m = hipp_exponent(&f, params.a)?;
            let x = measure_exp(&m, tol)?;
            Ok(check(id, &x, Some(m.norm().exp()), None))
        }
        _ => Err(Error::UnknownId(format!("lemma {id:?}"))),
    }
}
