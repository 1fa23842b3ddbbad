use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::measure::{LatticePoint, SymmetricDistribution};

/// One line `{k·y : k ≠ 0}` of a line mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct LineComponent {
    /// `p_m = F{line m}`.
    pub p: f64,
    /// Primitive direction with first nonzero coordinate positive.
    pub direction: LatticePoint,
    /// `(k, F_m{k·y})` for `k ≥ 1`, normalized so that `2·Σ mass = 1`.
    pub masses: Vec<(i64, f64)>,
    /// `σ_m`, `+∞` when the second moment diverges.
    pub sigma: f64,
}

impl LineComponent {
    /// `k⁰` with `F_m{k⁰y} > 0` and `F_m{(k⁰+1)y} > 0`, if any.
    pub fn span_witness(&self) -> Option<i64> {
        self.masses
            .windows(2)
            .find(|w| w[1].0 == w[0].0 + 1 && w[0].1 > 0.0 && w[1].1 > 0.0)
            .map(|w| w[0].0)
    }

    pub fn satisfies_span(&self) -> bool {
        self.span_witness().is_some()
    }
}

/// `F = qI + Σ p_m F_m` with each `F_m` living on multiples of a direction `y_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineMixture {
    pub dim: usize,
    pub q: f64,
    pub components: Vec<LineComponent>,
}

impl LineMixture {
    /// `Σ_m √(1 + σ_m)`.
    pub fn sqrt_sigma_sum(&self) -> f64 {
        self.components.iter().map(|c| (1.0 + c.sigma).sqrt()).sum()
    }

    pub fn all_sigmas_finite(&self) -> bool {
        self.components.iter().all(|c| c.sigma.is_finite())
    }

    /// Indices of components without two adjacent occupied multiples.
    pub fn span_violations(&self) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&i| !self.components[i].satisfies_span())
            .collect()
    }

    /// Fails with the list of components violating the span condition.
    pub fn check_span(&self) -> Result<()> {
        let bad = self.span_violations();
        if bad.is_empty() {
            return Ok(());
        }
        let detail: Vec<String> = bad
            .iter()
            .map(|&i| {
                let c = &self.components[i];
                let ks: Vec<String> = c.masses.iter().map(|(k, _)| k.to_string()).collect();
                format!(
                    "component {} (direction {}) occupies k in {{{}}} with no adjacent pair",
                    i + 1,
                    c.direction,
                    ks.join(",")
                )
            })
            .collect();
        Err(Error::NotLineDecomposable(detail.join("; ")))
    }

    /// True when every direction is a coordinate unit vector.
    pub fn on_coordinate_axes(&self) -> bool {
        self.components.iter().all(|c| {
            let coords = c.direction.coords();
            coords.iter().filter(|&&v| v != 0).count() == 1 && coords.iter().any(|&v| v == 1)
        })
    }
}

impl fmt::Display for LineMixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={} K={}", self.q, self.components.len())?;
        for (i, c) in self.components.iter().enumerate() {
            write!(f, " [m={} y={} p={} σ={}]", i + 1, c.direction, c.p, c.sigma)?;
        }
        Ok(())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Splits `x ≠ 0` into `(k, y)` with `x = k·y`, `y` primitive and lexicographically positive.
pub fn primitive_direction(x: &[i64]) -> (i64, Vec<i64>) {
    let g = x.iter().fold(0u64, |g, &c| gcd(g, c.unsigned_abs()));
    assert!(g > 0, "origin has no direction");
    let first_neg = x.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0);
    let sign = if first_neg { -1 } else { 1 };
    let y = x.iter().map(|&c| sign * c / g as i64).collect();
    (sign * g as i64, y)
}

/// Groups the nonzero support of `F` by line through the origin. Always succeeds;
/// the span condition is recorded per component rather than enforced.
///
/// `σ_m²` includes `tail_second_moment / (p_m |y_m|²)` for every component, a bound on
/// what the discarded atoms can contribute when they sit on that line.
pub fn decompose_lines(f: &SymmetricDistribution) -> LineMixture {
    let mut groups: BTreeMap<Vec<i64>, Vec<(i64, f64)>> = BTreeMap::new();
    for (x, w) in f.nonzero_atoms() {
        let (k, y) = primitive_direction(x);
        if k > 0 {
            groups.entry(y).or_default().push((k, w));
        }
    }
    let tail = f.tail_second_moment();
    let components = groups
        .into_iter()
        .map(|(y, mut ks)| {
            ks.sort_by_key(|(k, _)| *k);
            let half: f64 = ks.iter().map(|(_, w)| *w).sum();
            let p = 2.0 * half;
            let masses: Vec<(i64, f64)> = ks.iter().map(|&(k, w)| (k, w / p)).collect();
            let y_sq: f64 = y.iter().map(|&c| (c as f64) * (c as f64)).sum();
            let mut sigma_sq: f64 = 2.0 * masses.iter().map(|&(k, m)| (k as f64).powi(2) * m).sum::<f64>();
            if tail > 0.0 {
                sigma_sq += tail / (p * y_sq);
            }
            LineComponent {
                p,
                direction: LatticePoint::new(y),
                masses,
                sigma: sigma_sq.sqrt(),
            }
        })
        .collect();
    LineMixture {
        dim: f.dim(),
        q: f.q(),
        components,
    }
}

/// Line decomposition that also enforces the span condition on every component.
pub fn decompose_line_mixture(f: &SymmetricDistribution) -> Result<LineMixture> {
    let lines = decompose_lines(f);
    if lines.components.is_empty() {
        return Err(Error::NotLineDecomposable("no mass off the origin".into()));
    }
    lines.check_span()?;
    Ok(lines)
}

/// `g(x) = 2e^x(e^{−x} − 1 + x)/x²`, by its series near 0.
pub fn g_function(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        1.0 + x * (2.0 / 3.0 + x * (0.25 + x / 15.0))
    } else {
        2.0 * x.exp() * ((-x).exp_m1() + x) / (x * x)
    }
}

/// Inputs of the independent, axis-concentrated setting: row `i` of `p_im` holds the
/// probabilities of summand `i` on the `d` coordinate axes.
#[derive(Clone, Debug, PartialEq)]
pub struct KnownBoundInputs {
    pub p_im: Vec<Vec<f64>>,
    pub sigma_m: Vec<f64>,
    pub lambda_m: Vec<f64>,
    pub alpha: f64,
    pub n_pairs: Option<usize>,
}

impl KnownBoundInputs {
    pub fn new(p_im: Vec<Vec<f64>>, sigma_m: Vec<f64>) -> Result<Self> {
        let d = sigma_m.len();
        if p_im.is_empty() || d == 0 {
            return Err(Error::InvalidArgument("need at least one summand and one axis".into()));
        }
        for (i, row) in p_im.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch { left: row.len(), right: d });
            }
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || s > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "row {i} is not a set of axis probabilities"
                )));
            }
        }
        let lambda_m: Vec<f64> = (0..d).map(|m| p_im.iter().map(|r| r[m]).sum()).collect();
        if lambda_m.iter().any(|l| *l <= 0.0) {
            return Err(Error::InvalidArgument("every axis needs positive total intensity".into()));
        }
        let alpha = p_im
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                let q_i = 1.0 - s;
                let a: f64 = row.iter().zip(&lambda_m).map(|(p, l)| p * p / l).sum::<f64>()
                    * 2f64.powf(-1.5);
                g_function(2.0 * (1.0 - q_i)) * a.min(s * s)
            })
            .sum();
        Ok(KnownBoundInputs {
            p_im,
            sigma_m,
            lambda_m,
            alpha,
            n_pairs: None,
        })
    }

    /// `n` identically distributed summands with law `lines`.
    pub fn iid(lines: &LineMixture, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        let row: Vec<f64> = lines.components.iter().map(|c| c.p).collect();
        let sigma = lines.components.iter().map(|c| c.sigma).collect();
        Self::new(vec![row; n as usize], sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(dim: usize, q: f64, xs: &[(&[i64], f64)]) -> SymmetricDistribution {
        let ps: Vec<(LatticePoint, f64)> =
            xs.iter().map(|(x, p)| (LatticePoint::new(x.to_vec()), *p)).collect();
        SymmetricDistribution::from_pairs(dim, q, &ps).unwrap()
    }

    #[test]
    fn primitive_directions() {
        assert_eq!(primitive_direction(&[-4, 6]), (-2, vec![2, -3]));
        assert_eq!(primitive_direction(&[0, -3, 0]), (-3, vec![0, 1, 0]));
        assert_eq!(primitive_direction(&[5]), (5, vec![1]));
    }

    #[test]
    fn lazy_walk_decomposition() {
        let f = pairs(1, 0.5, &[(&[1], 0.25)]);
        let lines = decompose_lines(&f);
        assert_eq!(lines.components.len(), 1);
        let c = &lines.components[0];
        assert_eq!(c.direction.coords(), &[1]);
        assert_eq!(c.p, 0.5);
        assert_eq!(c.sigma, 1.0);
        assert!(!c.satisfies_span());
        assert!(matches!(decompose_line_mixture(&f), Err(Error::NotLineDecomposable(_))));
    }

    #[test]
    fn two_lines_are_disjoint() {
        let f = pairs(2, 0.4, &[(&[1, 0], 0.1), (&[2, 0], 0.1), (&[0, 1], 0.1)]);
        let lines = decompose_lines(&f);
        assert_eq!(lines.components.len(), 2);
        let on_x = lines.components.iter().find(|c| c.direction.coords() == [1, 0]).unwrap();
        assert!((on_x.p - 0.4).abs() < 1e-15);
        assert_eq!(on_x.span_witness(), Some(1));
        assert!(lines.on_coordinate_axes());
        assert_eq!(lines.span_violations().len(), 1);
    }

    #[test]
    fn g_series_matches_closed_form() {
        assert_eq!(g_function(0.0), 1.0);
        for x in [1.1e-3f64, 0.5, 1.0, 2.0] {
            let closed = 2.0 * x.exp() * ((-x).exp() - 1.0 + x) / (x * x);
            assert!((g_function(x) - closed).abs() < 1e-9);
        }
        // series and closed form agree just below the switch
        let x = 0.999e-3f64;
        let closed = 2.0 * x.exp() * ((-x).exp_m1() + x) / (x * x);
        assert!((g_function(x) - closed).abs() < 1e-12);
        assert!((g_function(1.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lazy_walk_alpha_exceeds_threshold() {
        let f = pairs(1, 0.5, &[(&[1], 0.25)]);
        let known = KnownBoundInputs::iid(&decompose_lines(&f), 20).unwrap();
        assert!((known.alpha - 2f64.powf(-1.5)).abs() < 1e-12);
        assert!(2.0 * known.alpha * std::f64::consts::E > 1.0);
    }
}
