//! The `δ` functional, line decompositions and evaluators for the right-hand sides of
//! the approximation bounds. Unspecified absolute constants are never given a value
//! here: each one gets a stable identifier and its coefficient is reported separately.

mod lemmas;
mod lines;

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::fmt;

pub use lemmas::{lemma_lhs, LemmaCheck, LemmaParams, LEMMA_IDS};
pub use lines::{
    decompose_line_mixture, decompose_lines, g_function, primitive_direction, KnownBoundInputs,
    LineComponent, LineMixture,
};

use crate::approx::ApproximantKind;
use crate::error::{Error, Result};
use crate::measure::{ordered_sum, SymmetricDistribution};

/// `δ(y) = Σ_{x≠0} min(1, y·e·p_x)` over the stored atoms.
pub fn delta_functional(f: &SymmetricDistribution, y: f64) -> f64 {
    assert!(y >= 0.0, "δ needs y >= 0");
    let m = f.measure();
    let w = m.weights();
    let (before, after) = match m.find(&vec![0; m.dim()]) {
        Some(i) => (&w[..i], &w[i + 1..]),
        None => (w, &w[..0]),
    };
    lane_sum([before, after], |p| (y * E * p).min(1.0))
}

#[inline(always)]
fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    *comp += if sum.abs() >= v.abs() { (*sum - t) + v } else { (v - t) + *sum };
    *sum = t;
}

/// Compensated sum of `g(w)` over the slices, in four interleaved lanes combined in a
/// fixed order.
fn lane_sum(parts: [&[f64]; 2], g: impl Fn(f64) -> f64) -> f64 {
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let (mut c0, mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0, 0.0);
    for part in parts {
        let chunks = part.chunks_exact(4);
        for &v in chunks.remainder() {
            neumaier(&mut s0, &mut c0, g(v));
        }
        for c in chunks {
            neumaier(&mut s0, &mut c0, g(c[0]));
            neumaier(&mut s1, &mut c1, g(c[1]));
            neumaier(&mut s2, &mut c2, g(c[2]));
            neumaier(&mut s3, &mut c3, g(c[3]));
        }
    }
    ordered_sum([s0, s1, s2, s3, c0, c1, c2, c3])
}

/// `δ(y)` plus `y·e·trunc_err`: an upper bound on `δ` of the untruncated law, since each
/// discarded atom contributes at most `y·e·p_x`.
pub fn delta_upper(f: &SymmetricDistribution, y: f64) -> f64 {
    delta_functional(f, y) + y * E * f.trunc_err()
}

/// Assumed values of the unspecified constants; missing entries default to 1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundConfig {
    values: BTreeMap<String, f64>,
}

impl BoundConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, id: &str, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidArgument(format!("constant {id}={value} must be finite and >= 0")));
        }
        self.values.insert(id.to_string(), value);
        Ok(())
    }

    /// Parses `id=value`.
    pub fn set_from_str(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got {spec:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad constant value in {spec:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, id: &str) -> f64 {
        self.values.get(id).copied().unwrap_or(1.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Whether a bound controls a distance (half the TV norm) or a TV norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Distance,
    Norm,
}

/// Evaluated right-hand side of one bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_id: String,
    pub n: Option<u64>,
    pub metric: Metric,
    pub explicit_part: f64,
    pub generic_terms: Vec<(String, f64)>,
    pub total_at_c: f64,
    pub applicable: bool,
    pub reason: String,
}

impl BoundReport {
    fn new(
        bound_id: &str,
        n: Option<u64>,
        metric: Metric,
        explicit_part: f64,
        generic_terms: Vec<(String, f64)>,
        cfg: &BoundConfig,
    ) -> Self {
        let total_at_c =
            explicit_part + generic_terms.iter().map(|(id, c)| cfg.get(id) * c).sum::<f64>();
        BoundReport {
            bound_id: bound_id.to_string(),
            n,
            metric,
            explicit_part,
            generic_terms,
            total_at_c,
            applicable: true,
            reason: String::new(),
        }
    }

    fn inapplicable(bound_id: &str, n: Option<u64>, metric: Metric, reason: String) -> Self {
        BoundReport {
            bound_id: bound_id.to_string(),
            n,
            metric,
            explicit_part: f64::NAN,
            generic_terms: Vec::new(),
            total_at_c: f64::NAN,
            applicable: false,
            reason,
        }
    }

    /// `explicit_part + Σ C_id·coefficient` under another configuration.
    pub fn total_with(&self, cfg: &BoundConfig) -> f64 {
        self.explicit_part + self.generic_terms.iter().map(|(id, c)| cfg.get(id) * c).sum::<f64>()
    }

    /// The bound expressed as a distance (norm bounds are halved).
    pub fn as_distance(&self) -> f64 {
        match self.metric {
            Metric::Distance => self.total_at_c,
            Metric::Norm => self.total_at_c / 2.0,
        }
    }

    pub fn csv_header() -> [&'static str; 7] {
        ["bound_id", "n", "explicit_part", "coefficients", "applicable", "reason", "total_at_C"]
    }

    pub fn csv_record(&self) -> [String; 7] {
        let coefs: Vec<String> =
            self.generic_terms.iter().map(|(id, c)| format!("{id}={c:e}")).collect();
        [
            self.bound_id.clone(),
            self.n.map_or_else(|| "NA".into(), |n| n.to_string()),
            fmt_num(self.explicit_part),
            coefs.join(";"),
            self.applicable.to_string(),
            self.reason.clone(),
            fmt_num(self.total_at_c),
        ]
    }
}

/// Formats a number for CSV output; `NaN` becomes `NA`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:e}")
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.applicable {
            return write!(f, "{}: not applicable ({})", self.bound_id, self.reason);
        }
        write!(f, "{}: {:e}", self.bound_id, self.explicit_part)?;
        for (id, c) in &self.generic_terms {
            write!(f, " + {id}·{c:e}")?;
        }
        write!(f, " = {:e}", self.total_at_c)
    }
}

/// The object a bound is evaluated on.
#[derive(Clone, Copy, Debug)]
pub enum BoundInput<'a> {
    Distribution(&'a SymmetricDistribution),
    Lines(&'a LineMixture),
    Known(&'a KnownBoundInputs),
}

/// Parameters shared by the evaluators; each bound reads only what it needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundParams {
    pub n: Option<u64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<u32>,
    pub n_pairs: Option<usize>,
}

impl BoundParams {
    pub fn at_n(n: u64) -> Self {
        BoundParams {
            n: Some(n),
            ..Default::default()
        }
    }

    pub fn at_ab(a: f64, b: f64) -> Self {
        BoundParams {
            a: Some(a),
            b: Some(b),
            ..Default::default()
        }
    }
}

/// Identifier, metric and a short description of every bound.
pub const BOUND_IDS: &[(&str, Metric, &str)] = &[
    ("cac1", Metric::Distance, "F^n vs exp{n(F-I)}, δ(n/2) leading term"),
    ("cac1star", Metric::Distance, "F^n vs exp{n(F-I)}, C(1+δ²(n))/(n q^3.5)"),
    ("cac3", Metric::Distance, "F^n vs D^n, 50.2 δ³(nq/6) leading term"),
    ("cac2", Metric::Distance, "F^n vs first-order CP expansion"),
    ("cac4", Metric::Distance, "F^n vs F^(n+1)"),
    ("cor1.cp", Metric::Distance, "finite support: 2.17 N²/n (1 + CN/(q^5 √n))"),
    ("cor1.conv", Metric::Distance, "finite support: F^n vs F^(n+1)"),
    ("cor1.hipp", Metric::Distance, "finite support: F^n vs D^n"),
    ("cor1.first", Metric::Distance, "finite support: first-order CP expansion"),
    ("thm5", Metric::Distance, "exp{a(F-I)} vs exp{b(F-I)}, finite support"),
    ("trivial", Metric::Distance, "exp{a(F-I)} vs exp{b(F-I)}, 2|b-a|(1-q)"),
    ("bergd", Metric::Norm, "Bergström residual norm ‖M_k‖"),
    ("bergd.cor", Metric::Norm, "Bergström residual norm, finite support"),
    ("K1a", Metric::Distance, "lines: F^n vs exp{n(F-I)}, 1.76 S²/n leading term"),
    ("K2", Metric::Distance, "lines: F^n vs exp{n(F-I)}, C S²/(n q^3.5)"),
    ("K1", Metric::Distance, "lines: F^n vs D^n"),
    ("cac2d", Metric::Distance, "lines: first-order CP expansion"),
    ("thm9", Metric::Distance, "lines: F^n vs F^(n+1)"),
    ("thm10", Metric::Distance, "lines: exp{a(F-I)} vs exp{b(F-I)}, 1.7 S |b-a|/max"),
    ("KrC1", Metric::Distance, "independent axis summands, 15.98/(1-2αe)^1.5"),
    ("p1is5", Metric::Distance, "lines, q >= 4/5: 17.34 S²/n"),
];

/// Bounds whose left-hand side is the distance between `F^{*n}` and the given approximant.
pub fn bounds_for_kind(kind: ApproximantKind) -> &'static [&'static str] {
    match kind {
        ApproximantKind::ConvPower => &[],
        ApproximantKind::AccompanyingCP => {
            &["cac1", "cac1star", "cor1.cp", "K1a", "K2", "p1is5", "KrC1"]
        }
        ApproximantKind::HippSCP => &["cac3", "cor1.hipp", "K1"],
        ApproximantKind::FirstOrderCP => &["cac2", "cor1.first", "cac2d"],
        ApproximantKind::BergstromPartial(_) => &["bergd", "bergd.cor"],
    }
}

fn metric_of(id: &str) -> Result<Metric> {
    BOUND_IDS
        .iter()
        .find(|(b, _, _)| *b == id)
        .map(|(_, m, _)| *m)
        .ok_or_else(|| Error::UnknownId(format!("bound {id:?}")))
}

/// Writes `x` as a small fraction when one matches, e.g. `1/2`.
pub fn small_fraction(x: f64) -> String {
    for den in 1..=100u32 {
        let num = (x * den as f64).round();
        if (num / den as f64 - x).abs() <= 1e-12 {
            return if den == 1 {
                format!("{num}")
            } else {
                format!("{num}/{den}")
            };
        }
    }
    format!("{x}")
}

fn subscript(i: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    i.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).unwrap() as usize])
        .collect()
}

fn need<T>(v: Option<T>, name: &str, id: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("bound {id} needs parameter {name}")))
}

/// The unspecified-constant identifier `C` of a bound, or `C1`, `C2` when it has several.
fn cid(id: &str, suffix: &str) -> String {
    format!("{id}.{suffix}")
}

/// Evaluates the right-hand side of `bound_id` on `input`.
///
/// Structural assumptions that fail (infinite `σ_m`, span condition, `q < 4/5`, infinite
/// support, `2αe ≥ 1`, ...) produce a report with `applicable = false`; only unknown
/// identifiers and missing parameters are errors.
pub fn evaluate_bound(
    bound_id: &str,
    input: BoundInput<'_>,
    params: &BoundParams,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    let metric = metric_of(bound_id)?;
    let id = bound_id;
    let n_opt = params.n;
    let no = |reason: String| Ok(BoundReport::inapplicable(id, n_opt, metric, reason));
    let report =
        |explicit: f64, terms: Vec<(String, f64)>| Ok(BoundReport::new(id, n_opt, metric, explicit, terms, cfg));

    let dist = match input {
        BoundInput::Distribution(f) => Some(f),
        _ => None,
    };
    match id {
        "cac1" | "cac1star" | "cac3" | "cac2" | "cac4" | "bergd" => {
            let Some(f) = dist else {
                return no("needs the distribution itself for δ".into());
            };
            let n = need(params.n, "n", id)? as f64;
            let q = f.q();
            let delta = |y: f64| delta_upper(f, y);
            match id {
                "cac1" => {
                    let lead = 4.0 * delta(n / 2.0).powi(2) / (E * E * n);
                    report(
                        lead,
                        vec![
                            (cid(id, "C1"), lead * (delta(n * q) + 1.0) / (q.powi(4) * n.sqrt())),
                            (cid(id, "C2"), (1.0 - q).powf(4.5) / (q.powi(5) * n * n.sqrt())),
                        ],
                    )
                }
                "cac1star" => report(
                    0.0,
                    vec![(cid(id, "C"), (1.0 + delta(n).powi(2)) / (n * q.powf(3.5)))],
                ),
                "cac3" => {
                    let lead = 50.2 * delta(n * q / 6.0).powi(3) / (q.powf(3.5) * n * n);
                    report(
                        lead,
                        vec![
                            (cid(id, "C1"), lead / (q.powf(3.5) * n.sqrt())),
                            (cid(id, "C2"), (1.0 - q).powf(7.5) / (q.powi(8) * n * n * n.sqrt())),
                        ],
                    )
                }
                "cac2" => {
                    let d = delta(n * q);
                    report(
                        0.0,
                        vec![
                            (cid(id, "C1"), (d.powi(3) + d.powi(4)) / (q.powf(5.5) * n * n)),
                            (cid(id, "C2"), (1.0 - q).powi(6) / (q.powf(6.5) * n * n)),
                        ],
                    )
                }
                "cac4" => report(
                    0.0,
                    vec![(cid(id, "C"), (delta(n).powi(2) + 1.0) / (q.powf(3.5) * n))],
                ),
                _ => {
                    let k = need(params.k, "k", id)?;
                    if k as f64 >= n {
                        return no(format!("needs k < n, got k={k}, n={n}"));
                    }
                    let kf = k as f64;
                    let nk = n.powf(2.0 * (kf + 1.0));
                    report(
                        0.0,
                        vec![
                            (
                                format!("bergd.k{k}.C1"),
                                delta(n * q).powf(3.0 * (kf + 1.0)) / (q.powf(6.0 * kf + 5.5) * nk),
                            ),
                            (
                                format!("bergd.k{k}.C2"),
                                (1.0 - q).powf(6.0 * (kf + 1.0)) / (nk * q.powf(6.0 * kf + 6.5)),
                            ),
                        ],
                    )
                }
            }
        }
        "cor1.cp" | "cor1.conv" | "cor1.hipp" | "cor1.first" | "bergd.cor" | "thm5" | "trivial" => {
            let Some(f) = dist else {
                return no("needs the distribution itself".into());
            };
            let q = f.q();
            if id == "trivial" {
                let a = need(params.a, "a", id)?;
                let b = need(params.b, "b", id)?;
                return report(2.0 * (b - a).abs() * (1.0 - q), vec![]);
            }
            if f.trunc_err() > 0.0 || f.tail_second_moment() > 0.0 {
                return no("support is not finite (the stored law is a truncation)".into());
            }
            let big_n = params.n_pairs.unwrap_or_else(|| f.num_pairs());
            if big_n < f.dim() {
                return no(format!("needs N >= d, got N={big_n}, d={}", f.dim()));
            }
            let nn = big_n as f64;
            if id == "thm5" {
                let a = need(params.a, "a", id)?;
                let b = need(params.b, "b", id)?;
                return report((1.0 + (2.0 * nn + 1.0) / E) * (b - a).abs() / a.max(b), vec![]);
            }
            let n = need(params.n, "n", id)? as f64;
            match id {
                "cor1.cp" => {
                    let lead = 2.17 * nn * nn / n;
                    report(lead, vec![(cid(id, "C"), lead * nn / (q.powi(5) * n.sqrt()))])
                }
                "cor1.conv" => report(0.0, vec![(cid(id, "C"), nn * nn / (q.powf(3.5) * n))]),
                "cor1.hipp" => report(0.0, vec![(cid(id, "C"), nn.powi(3) / (q.powf(3.5) * n * n))]),
                "cor1.first" => report(0.0, vec![(cid(id, "C"), nn.powi(4) / (q.powf(6.5) * n * n))]),
                _ => {
                    let k = need(params.k, "k", id)?;
                    if k as f64 >= n {
                        return no(format!("needs k < n, got k={k}, n={n}"));
                    }
                    let kf = k as f64;
                    report(
                        0.0,
                        vec![(
                            format!("bergd.cor.k{k}.C"),
                            nn.powf(3.0 * (kf + 1.0))
                                / (q.powf(6.0 * kf + 6.5) * n.powf(2.0 * (kf + 1.0))),
                        )],
                    )
                }
            }
        }
        "K1a" | "K2" | "K1" | "cac2d" | "thm9" | "thm10" | "p1is5" => {
            let lines = match input {
                BoundInput::Lines(l) => l.clone(),
                BoundInput::Distribution(f) => decompose_lines(f),
                BoundInput::Known(_) => return no("needs a line mixture".into()),
            };
            let q = lines.q;
            if lines.components.is_empty() {
                return no("no mass off the origin".into());
            }
            if id == "p1is5" {
                let mut why = Vec::new();
                if q < 0.8 {
                    why.push(format!("q={} < 4/5", small_fraction(q)));
                }
                for (i, c) in lines.components.iter().enumerate() {
                    if !c.sigma.is_finite() {
                        why.push(format!("σ{}=∞", subscript(i + 1)));
                    }
                }
                if !why.is_empty() {
                    return no(why.join(" and "));
                }
            } else {
                let mut why = Vec::new();
                for (i, c) in lines.components.iter().enumerate() {
                    if !c.sigma.is_finite() {
                        why.push(format!("σ{}=∞", subscript(i + 1)));
                    }
                }
                if let Err(e) = lines.check_span() {
                    why.push(format!("span condition fails: {e}"));
                }
                if lines.components.len() < lines.dim {
                    why.push(format!(
                        "needs K >= d, got K={}, d={}",
                        lines.components.len(),
                        lines.dim
                    ));
                }
                if !why.is_empty() {
                    return no(why.join(" and "));
                }
            }
            let s = lines.sqrt_sigma_sum();
            if id == "thm10" {
                let a = need(params.a, "a", id)?;
                let b = need(params.b, "b", id)?;
                return report(1.7 * (b - a).abs() / a.max(b) * s, vec![]);
            }
            let n = need(params.n, "n", id)? as f64;
            match id {
                "K1a" => {
                    let lead = 1.76 / n * s * s;
                    report(lead, vec![(cid(id, "C"), lead * s / (n.sqrt() * q.powi(5)))])
                }
                "K2" | "thm9" => report(0.0, vec![(cid(id, "C"), s * s / (n * q.powf(3.5)))]),
                "K1" => report(0.0, vec![(cid(id, "C"), s.powi(3) / (n * n * q.powf(6.5)))]),
                "cac2d" => report(0.0, vec![(cid(id, "C"), s.powi(4) / (n * n * q.powf(6.5)))]),
                _ => report(17.34 / n * s * s, vec![]),
            }
        }
        "KrC1" => {
            let known = match input {
                BoundInput::Known(k) => k.clone(),
                other => {
                    let lines = match other {
                        BoundInput::Lines(l) => l.clone(),
                        BoundInput::Distribution(f) => decompose_lines(f),
                        BoundInput::Known(_) => unreachable!(),
                    };
                    if !lines.on_coordinate_axes() {
                        return no("summands are not concentrated on the coordinate axes".into());
                    }
                    KnownBoundInputs::iid(&lines, need(params.n, "n", id)?)?
                }
            };
            let threshold = 2.0 * known.alpha * E;
            let mut why = Vec::new();
            if threshold >= 1.0 {
                why.push(format!("2αe = {threshold:.4} >= 1"));
            }
            if let Some(i) = known.sigma_m.iter().position(|s| !s.is_finite()) {
                why.push(format!("σ{}=∞", subscript(i + 1)));
            }
            if !why.is_empty() {
                return no(why.join(" and "));
            }
            let sigma_sum: f64 = known.sigma_m.iter().map(|s| 1.0 + s).sum();
            let spread: f64 = known
                .lambda_m
                .iter()
                .enumerate()
                .map(|(m, l)| known.p_im.iter().map(|r| r[m] * r[m]).sum::<f64>() / (l * l))
                .sum();
            report(15.98 / (1.0 - threshold).powf(1.5) * sigma_sum * spread, vec![])
        }
        _ => Err(Error::UnknownId(format!("bound {id:?}"))),
    }
}

/// Smallest value of the single free constant making the bound hold on every observation:
/// `max((lhs − fixed part)/coefficient)` clipped at 0. Constants other than `free_id` are
/// held at their `cfg` values and counted in the fixed part. With `free_id = None` each
/// report must carry exactly one constant.
pub fn fit_constant(
    observations: &[(f64, BoundReport)],
    free_id: Option<&str>,
    cfg: &BoundConfig,
) -> Result<f64> {
    if observations.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fitting a constant needs at least 3 observations, got {}",
            observations.len()
        )));
    }
    let mut best = 0.0f64;
    for (lhs, rep) in observations {
        if !rep.applicable {
            return Err(Error::InvalidArgument(format!(
                "{} is not applicable at n={:?}: {}",
                rep.bound_id, rep.n, rep.reason
            )));
        }
        let free = match free_id {
            Some(id) => id.to_string(),
            None => {
                if rep.generic_terms.len() != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "{} has {} unspecified constants; name the free one",
                        rep.bound_id,
                        rep.generic_terms.len()
                    )));
                }
                rep.generic_terms[0].0.clone()
            }
        };
        let mut fixed = rep.explicit_part;
        let mut coef = None;
        for (id, c) in &rep.generic_terms {
            if *id == free {
                coef = Some(*c);
            } else {
                fixed += cfg.get(id) * c;
            }
        }
        let coef = coef.unwrap_or(0.0);
        if !(coef > 0.0) || !coef.is_finite() {
            return Err(Error::DegenerateCoefficient {
                n: rep.n.unwrap_or(0),
                coefficient: coef,
            });
        }
        best = best.max((lhs - fixed) / coef);
    }
    Ok(best)
}
