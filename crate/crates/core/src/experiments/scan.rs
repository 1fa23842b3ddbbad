use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::approx::cp_accompanying;
use crate::bounds::{
    decompose_lines, evaluate_bound, lemma_lhs, primitive_direction, BoundConfig, BoundInput,
    BoundParams, LemmaCheck, LemmaParams,
};
use crate::error::{Error, Result};
use crate::measure::{tv_distance, LatticePoint, SymmetricDistribution};

/// Inequalities [`lemma_scan`] can check.
pub const SCAN_IDS: &[&str] = &[
    "koD3", "aka", "fexp", "dexp", "CeRo4.6", "e2p", "D2Ftrys", "C6a", "normB", "thm5", "thm10",
];

const BUILTIN_PROFILE: &str = include_str!("../../profiles/scan-v1.toml");

/// Generator settings for random instances, read from a versioned TOML file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct ScanProfile {
    pub version: u32,
    pub tol: f64,
    pub distribution: DistributionProfile,
    pub lines: LinesProfile,
    pub params: ParamsProfile,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct DistributionProfile {
    pub q_min: f64,
    pub q_max: f64,
    pub coord_radius: Vec<i64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct LinesProfile {
    pub extra_lines: usize,
    pub k_max: Vec<i64>,
    pub direction_radius: i64,
    pub intensity_cap: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct ParamsProfile {
    pub k: Vec<u32>,
    pub lambda: Vec<f64>,
    pub j: Vec<u32>,
    pub e2p_n_max: u64,
    pub d2_n_max: u64,
    pub c6a_n_max: u64,
    pub ab_max: f64,
    pub intensity_cap: Vec<f64>,
}

impl ScanProfile {
    /// The profile shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROFILE).expect("built-in scan profile is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let p: ScanProfile =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("scan profile: {e}")))?;
        if p.distribution.coord_radius.is_empty()
            || p.params.k.is_empty()
            || p.params.lambda.is_empty()
            || p.params.j.is_empty()
            || p.params.intensity_cap.is_empty()
            || !(0.0 < p.distribution.q_min && p.distribution.q_min <= p.distribution.q_max && p.distribution.q_max < 1.0)
            || p.lines.k_max.is_empty()
            || p.lines.k_max.iter().any(|&k| k < 2)
            || p.lines.intensity_cap.is_empty()
        {
            return Err(Error::InvalidArgument("scan profile has empty or invalid ranges".into()));
        }
        Ok(p)
    }

    fn cap(&self, dim: usize) -> f64 {
        by_dim(&self.params.intensity_cap, dim)
    }

    fn line_cap(&self, dim: usize) -> f64 {
        by_dim(&self.lines.intensity_cap, dim).min(self.cap(dim))
    }

    fn radius(&self, dim: usize) -> i64 {
        by_dim(&self.distribution.coord_radius, dim).max(1)
    }
}

/// Entry for `dim`, the last one standing in for higher dimensions.
fn by_dim<T: Copy>(xs: &[T], dim: usize) -> T {
    xs[(dim - 1).min(xs.len() - 1)]
}

/// Outcome of a seeded scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub lemma_id: String,
    pub profile_version: u32,
    pub trials: usize,
    /// Largest `lhs/rhs` seen.
    pub worst_ratio: f64,
    /// Largest `(lhs − err)/rhs` seen.
    pub worst_ratio_lower: f64,
    pub violations: usize,
    /// Trials refused by a numerical diagnostic, with the first message.
    pub refused: usize,
    pub first_refusal: Option<String>,
    pub worst_case: String,
}

fn lex_positive(x: &[i64]) -> bool {
    x.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

fn box_points(dim: usize, r: i64) -> Vec<Vec<i64>> {
    let side = (2 * r + 1) as usize;
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut p = vec![0i64; dim];
            for c in p.iter_mut().rev() {
                *c = (i % side) as i64 - r;
                i /= side;
            }
            p
        })
        .filter(|p| lex_positive(p))
        .collect()
}

/// Dirichlet(1) split of `total` into `m` parts.
fn dirichlet(rng: &mut ChaCha8Rng, m: usize, total: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| total * x / s).collect()
}

/// Random symmetric law: dimension in `1..=dim_max`, at most `atoms_max` atoms (origin
/// included) and at least `min_pairs` `±` pairs when the box allows it.
pub fn random_distribution(
    rng: &mut ChaCha8Rng,
    profile: &ScanProfile,
    dim_max: usize,
    atoms_max: usize,
    min_pairs: impl Fn(usize) -> usize,
) -> Result<SymmetricDistribution> {
    let dim = rng.gen_range(1..=dim_max.max(1));
    let mut reps = box_points(dim, profile.radius(dim));
    let max_pairs = ((atoms_max.max(3) - 1) / 2).min(reps.len());
    let lo = min_pairs(dim).clamp(1, max_pairs);
    let pairs = rng.gen_range(lo..=max_pairs);
    reps.shuffle(rng);
    let q = rng.gen_range(profile.distribution.q_min..=profile.distribution.q_max);
    let masses = dirichlet(rng, pairs, (1.0 - q) / 2.0);
    let atoms: Vec<(LatticePoint, f64)> = reps
        .into_iter()
        .take(pairs)
        .zip(masses)
        .map(|(x, p)| (LatticePoint::new(x), p))
        .collect();
    SymmetricDistribution::from_pairs(dim, q, &atoms)
}

/// Random law concentrated on `K ≥ d` lines, each with an adjacent pair of occupied
/// multiples, so the span condition holds.
pub fn random_line_mixture(
    rng: &mut ChaCha8Rng,
    profile: &ScanProfile,
    dim_max: usize,
) -> Result<SymmetricDistribution> {
    let dim = rng.gen_range(1..=dim_max.max(1));
    let mut dirs: Vec<Vec<i64>> = box_points(dim, profile.lines.direction_radius)
        .into_iter()
        .filter(|p| primitive_direction(p).0 == 1)
        .collect();
    dirs.shuffle(rng);
    // the coordinate axes come first so that the directions span Z^d
    let mut chosen: Vec<Vec<i64>> = (0..dim)
        .map(|i| (0..dim).map(|c| i64::from(c == i)).collect())
        .collect();
    let extra = rng.gen_range(0..=profile.lines.extra_lines);
    for d in dirs {
        if chosen.len() >= dim + extra {
            break;
        }
        if !chosen.contains(&d) {
            chosen.push(d);
        }
    }
    let k_max = by_dim(&profile.lines.k_max, dim);
    let mut points = Vec::new();
    for y in &chosen {
        let k0 = rng.gen_range(1..k_max);
        for k in 1..=k_max {
            if k == k0 || k == k0 + 1 || rng.gen_bool(0.5) {
                points.push(y.iter().map(|c| c * k).collect::<Vec<i64>>());
            }
        }
    }
    let q = rng.gen_range(profile.distribution.q_min..=profile.distribution.q_max);
    let masses = dirichlet(rng, points.len(), (1.0 - q) / 2.0);
    let atoms: Vec<(LatticePoint, f64)> =
        points.into_iter().zip(masses).map(|(x, p)| (LatticePoint::new(x), p)).collect();
    SymmetricDistribution::from_pairs(dim, q, &atoms)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("profile lists are nonempty")
}

/// An intensity from the profile list, limited by the cap for `dim`.
fn pick_intensity(rng: &mut ChaCha8Rng, profile: &ScanProfile, cap: f64) -> f64 {
    let allowed: Vec<f64> = profile.params.lambda.iter().copied().filter(|&l| l <= cap).collect();
    if allowed.is_empty() {
        cap
    } else {
        pick(rng, &allowed)
    }
}

fn pick_n(rng: &mut ChaCha8Rng, profile: &ScanProfile, dim: usize, n_max: u64) -> u64 {
    let cap = (profile.cap(dim).floor() as u64).max(1);
    rng.gen_range(1..=n_max.min(cap))
}

fn describe(f: &SymmetricDistribution) -> String {
    format!("d={} pairs={} q={:.6}", f.dim(), f.num_pairs(), f.q())
}

/// `exp{a(F−I)}` versus `exp{b(F−I)}` against an explicit bound.
fn exp_pair_check(
    id: &str,
    f: &SymmetricDistribution,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<LemmaCheck> {
    let ea = cp_accompanying(f, a, tol / 2.0)?;
    let eb = cp_accompanying(f, b, tol / 2.0)?;
    let (d, err) = tv_distance(&ea, &eb)?;
    let rep = evaluate_bound(id, BoundInput::Distribution(f), &BoundParams::at_ab(a, b), &BoundConfig::new())?;
    if !rep.applicable {
        return Err(Error::InvalidArgument(format!("{id} not applicable: {}", rep.reason)));
    }
    Ok(LemmaCheck {
        lemma_id: id.to_string(),
        lhs: d,
        err,
        rhs: Some(rep.explicit_part),
        coefficient: None,
    })
}

fn one_trial(
    id: &str,
    rng: &mut ChaCha8Rng,
    profile: &ScanProfile,
    dim_max: usize,
    atoms_max: usize,
) -> Result<(LemmaCheck, String)> {
    let pp = &profile.params;
    let tol = profile.tol;
    let any = |rng: &mut ChaCha8Rng, dmax: usize| random_distribution(rng, profile, dmax, atoms_max, |_| 1);
    let mut params = LemmaParams::default();
    let (f, extra) = match id {
        "koD3" | "aka" | "fexp" | "normB" => {
            let f = any(rng, dim_max)?;
            params.k = pick(rng, &pp.k);
            params.lambda = pick_intensity(rng, profile, profile.cap(f.dim()));
            params.a = params.lambda;
            (f, format!("k={} λ=a={}", params.k, params.lambda))
        }
        "dexp" | "CeRo4.6" => {
            let f = random_line_mixture(rng, profile, dim_max)?;
            params.k = pick(rng, &pp.k);
            params.j = pick(rng, &pp.j);
            params.lambda = pick_intensity(rng, profile, profile.line_cap(f.dim()));
            params.a = params.lambda;
            (f, format!("k={} j={} λ=a={}", params.k, params.j, params.lambda))
        }
        "e2p" => {
            let f = any(rng, dim_max)?;
            params.p = rng.gen_range(0.02..0.98);
            params.n = pick_n(rng, profile, f.dim(), pp.e2p_n_max);
            params.tau = rng.gen_range(0.0..=1.0);
            (f, format!("p={:.6} n={} τ={:.6}", params.p, params.n, params.tau))
        }
        "D2Ftrys" => {
            let f = any(rng, dim_max)?;
            params.n = pick_n(rng, profile, f.dim(), pp.d2_n_max);
            (f, format!("n={}", params.n))
        }
        "C6a" => {
            let f = any(rng, 1)?;
            params.j = pick(rng, &pp.j);
            params.n = rng.gen_range(1..=pp.c6a_n_max);
            params.p = rng.gen_range(0.02..0.98);
            (f, format!("j={} n={} p={:.6}", params.j, params.n, params.p))
        }
        "thm5" | "thm10" => {
            let f = if id == "thm5" {
                random_distribution(rng, profile, dim_max, atoms_max, |d| d)?
            } else {
                random_line_mixture(rng, profile, dim_max)?
            };
            let cap = if id == "thm5" { profile.cap(f.dim()) } else { profile.line_cap(f.dim()) };
            let ab_max = pp.ab_max.min(cap);
            let a = ab_max * (1.0 - rng.gen::<f64>());
            let b = ab_max * (1.0 - rng.gen::<f64>());
            let c = exp_pair_check(id, &f, a, b, tol)?;
            let desc = format!("{} a={a:.6} b={b:.6}", describe(&f));
            return Ok((c, desc));
        }
        other => return Err(Error::UnknownId(format!("scan {other:?}"))),
    };
    let c = lemma_lhs(id, f.measure(), &params, tol)?;
    if id == "dexp" || id == "CeRo4.6" {
        debug_assert!(decompose_lines(&f).span_violations().is_empty());
    }
    Ok((c, format!("{} {extra}", describe(&f))))
}

/// Checks inequality `lemma_id` on `trials` seeded random instances. Trial `t` draws from
/// ChaCha8 seeded with `seed` on stream `t`, so results do not depend on thread count.
pub fn lemma_scan(
    lemma_id: &str,
    trials: usize,
    seed: u64,
    dim_max: usize,
    atoms_max: usize,
    profile: &ScanProfile,
) -> Result<ScanReport> {
    if !SCAN_IDS.contains(&lemma_id) {
        return Err(Error::UnknownId(format!("scan {lemma_id:?}")));
    }
    if trials == 0 || dim_max == 0 {
        return Err(Error::InvalidArgument("need trials >= 1 and dim_max >= 1".into()));
    }
    let outcomes: Vec<Result<(LemmaCheck, String)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            one_trial(lemma_id, &mut rng, profile, dim_max, atoms_max)
                .map(|(c, d)| (c, format!("trial {t}: {d}")))
        })
        .collect();
    let mut report = ScanReport {
        lemma_id: lemma_id.to_string(),
        profile_version: profile.version,
        trials,
        worst_ratio: 0.0,
        worst_ratio_lower: 0.0,
        violations: 0,
        refused: 0,
        first_refusal: None,
        worst_case: String::new(),
    };
    for o in outcomes {
        match o {
            Ok((c, desc)) => {
                if !c.holds() {
                    report.violations += 1;
                }
                if c.ratio() > report.worst_ratio || report.worst_case.is_empty() {
                    report.worst_ratio = c.ratio();
                    report.worst_case = desc;
                }
                report.worst_ratio_lower = report.worst_ratio_lower.max(c.ratio_lower());
            }
            Err(e) if e.is_numerical_refusal() => {
                report.refused += 1;
                report.first_refusal.get_or_insert_with(|| e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
