//! Example laws, `(n, approximant)` sweeps with matched bounds, convergence-rate fits
//! and randomized checks of the explicit inequalities.

mod scan;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use scan::{lemma_scan, random_distribution, random_line_mixture, ScanProfile, ScanReport, SCAN_IDS};

use crate::approx::{build_approximant, compare, ApproximantKind, ApproximationResult};
use crate::bounds::{bounds_for_kind, evaluate_bound, fmt_num, BoundConfig, BoundInput, BoundParams, BoundReport};
use crate::error::{Error, Result};
use crate::measure::{convolution_power, LatticePoint, SymmetricDistribution};

/// The three example laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleId {
    /// `q = 1/2`, `P(X=±k) = 1/(k(k+1)(k+2))`.
    Ex1,
    /// `q = 0.8`, `P(X=±1) = P(X=±m) = 0.05`.
    Ex2(i64),
    /// `q = 8/9`, `P(X=±k) = 1/(k(k+1)(k+2)(k+3))`.
    Ex3,
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleId::Ex1 => write!(f, "ex1"),
            ExampleId::Ex2(m) => write!(f, "ex2({m})"),
            ExampleId::Ex3 => write!(f, "ex3"),
        }
    }
}

impl ExampleId {
    /// Parses `ex1`, `ex3`, or `ex2` with the outer atom at `±m`.
    pub fn parse(id: &str, m: Option<i64>) -> Result<Self> {
        match id.trim().to_ascii_lowercase().as_str() {
            "ex1" | "1" => Ok(ExampleId::Ex1),
            "ex2" | "2" => Ok(ExampleId::Ex2(m.unwrap_or(10))),
            "ex3" | "3" => Ok(ExampleId::Ex3),
            other => Err(Error::UnknownId(format!("example {other:?}"))),
        }
    }

    fn is_truncated(&self) -> bool {
        !matches!(self, ExampleId::Ex2(_))
    }
}

/// An example law with its truncation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleSpec {
    pub id: ExampleId,
    pub truncation_k: u64,
}

impl ExampleSpec {
    pub fn new(id: ExampleId, truncation_k: u64) -> Self {
        ExampleSpec { id, truncation_k }
    }

    /// Smallest truncation with `K ≥ max(1000, 10·n^{1/3})` and `n · tail_mass ≤ tail_target`,
    /// so that the tail cannot contaminate distances at `n ≤ n_max`.
    pub fn for_sweep(id: ExampleId, n_max: u64, tail_target: f64) -> Self {
        let base = 1000u64.max((10.0 * (n_max as f64).cbrt()).ceil() as u64);
        let mut spec = ExampleSpec::new(id, base);
        if id.is_truncated() {
            while n_max as f64 * spec.tail_mass() > tail_target {
                spec.truncation_k = spec.truncation_k * 5 / 4 + 1;
            }
        }
        spec
    }

    /// `2·Σ_{k>K} P(X=k)` in closed form.
    pub fn tail_mass(&self) -> f64 {
        let k = self.truncation_k as f64;
        match self.id {
            ExampleId::Ex1 => 1.0 / ((k + 1.0) * (k + 2.0)),
            ExampleId::Ex3 => 2.0 / (3.0 * (k + 1.0) * (k + 2.0) * (k + 3.0)),
            ExampleId::Ex2(_) => 0.0,
        }
    }

    /// Bound on `Σ_{|k|>K} k²·P(X=k)`: infinite for Example 1, and
    /// `2Σ_{k>K} k/((k+1)(k+2)(k+3)) ≤ 2/(K+3)` for Example 3.
    pub fn tail_second_moment(&self) -> f64 {
        match self.id {
            ExampleId::Ex1 => f64::INFINITY,
            ExampleId::Ex3 => 2.0 / (self.truncation_k as f64 + 3.0),
            ExampleId::Ex2(_) => 0.0,
        }
    }
}

/// `P(X=k)` for `k ≥ 1` of Examples 1 and 3.
pub fn example_mass(id: ExampleId, k: u64) -> f64 {
    let k = k as f64;
    match id {
        ExampleId::Ex1 => 1.0 / (k * (k + 1.0) * (k + 2.0)),
        ExampleId::Ex3 => 1.0 / (k * (k + 1.0) * (k + 2.0) * (k + 3.0)),
        ExampleId::Ex2(m) => {
            if k == 1.0 || k == m as f64 {
                0.05
            } else {
                0.0
            }
        }
    }
}

/// Builds the example law; the tail beyond `K` goes into `trunc_err`.
pub fn make_example(spec: &ExampleSpec) -> Result<SymmetricDistribution> {
    let (q, pairs): (f64, Vec<(LatticePoint, f64)>) = match spec.id {
        ExampleId::Ex2(m) => {
            if m < 2 {
                return Err(Error::InvalidArgument(format!("Example 2 needs m >= 2, got {m}")));
            }
            (
                0.8,
                vec![(LatticePoint::new(vec![1]), 0.05), (LatticePoint::new(vec![m]), 0.05)],
            )
        }
        id => {
            if spec.truncation_k < 2 {
                return Err(Error::InvalidArgument("truncation K must be >= 2".into()));
            }
            let q = if id == ExampleId::Ex1 { 0.5 } else { 8.0 / 9.0 };
            let pairs = (1..=spec.truncation_k)
                .map(|k| (LatticePoint::new(vec![k as i64]), example_mass(id, k)))
                .collect();
            (q, pairs)
        }
    };
    let mut atoms = vec![(LatticePoint::origin(1), q)];
    for (x, p) in &pairs {
        atoms.push((x.clone(), *p));
        atoms.push((x.neg(), *p));
    }
    let measure = crate::measure::SignedLatticeMeasure::from_atoms(1, atoms)?.with_added_err(spec.tail_mass());
    Ok(SymmetricDistribution::new(measure)?.with_tail_second_moment(spec.tail_second_moment()))
}

/// One sweep cell: the approximation outcome and the bounds matched to its kind.
#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    pub example: String,
    pub n: u64,
    pub kind: ApproximantKind,
    pub outcome: std::result::Result<ApproximationResult, Error>,
    pub bounds: Vec<BoundReport>,
}

/// Parses `lo:hi:xF` (geometric), `lo:hi:+S` (arithmetic) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("bad n-grid {spec:?}"));
    let grid: Vec<u64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: u64 = parts[0].parse().map_err(|_| bad())?;
        let hi: u64 = parts[1].parse().map_err(|_| bad())?;
        let step = parts[2];
        let mut out = Vec::new();
        let mut n = lo;
        if let Some(f) = step.strip_prefix('x') {
            let f: u64 = f.parse().map_err(|_| bad())?;
            if f < 2 || lo == 0 {
                return Err(bad());
            }
            while n <= hi {
                out.push(n);
                n *= f;
            }
        } else {
            let s: u64 = step.trim_start_matches('+').parse().map_err(|_| bad())?;
            if s == 0 {
                return Err(bad());
            }
            while n <= hi {
                out.push(n);
                n += s;
            }
        }
        out
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "n-grid {spec:?} must be nonempty, positive and strictly ascending"
        )));
    }
    Ok(grid)
}

/// Parses a comma-separated list of approximant kinds.
pub fn parse_kinds(spec: &str) -> Result<Vec<ApproximantKind>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(ApproximantKind::from_str)
        .collect()
}

/// Runs every `(n, kind)` cell. `F^{*n}` is built once per `n` and shared by the kinds;
/// half of `tol` goes to it and half to each approximant. Cells run in parallel over `n`
/// and come back sorted by `(n, kind order)`. Failures are recorded per cell.
pub fn sweep(
    example: &str,
    f: &SymmetricDistribution,
    n_grid: &[u64],
    kinds: &[ApproximantKind],
    tol: f64,
    cfg: &BoundConfig,
) -> Vec<ExperimentRecord> {
    if kinds.is_empty() {
        return Vec::new();
    }
    let per_n: Vec<Vec<ExperimentRecord>> = n_grid
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let target = convolution_power(f.measure(), n, tol / 2.0);
            let target_time = start.elapsed();
            kinds
                .iter()
                .map(|&kind| {
                    let outcome = match &target {
                        Err(e) => Err(e.clone()),
                        Ok(t) => {
                            let cell_start = Instant::now();
                            kind.validate(n)
                                .and_then(|_| {
                                    if kind == ApproximantKind::ConvPower {
                                        Ok(t.clone())
                                    } else {
                                        build_approximant(f, n, kind, tol / 2.0)
                                    }
                                })
                                .and_then(|a| compare(t, &a, n, kind, cell_start))
                                .map(|mut r| {
                                    r.elapsed += target_time.as_secs_f64();
                                    r
                                })
                        }
                    };
                    ExperimentRecord {
                        example: example.to_string(),
                        n,
                        kind,
                        outcome,
                        bounds: matched_bounds(f, n, kind, cfg),
                    }
                })
                .collect()
        })
        .collect();
    per_n.into_iter().flatten().collect()
}

/// Every bound whose left-hand side is the distance of this cell.
pub fn matched_bounds(
    f: &SymmetricDistribution,
    n: u64,
    kind: ApproximantKind,
    cfg: &BoundConfig,
) -> Vec<BoundReport> {
    let mut params = BoundParams::at_n(n);
    if let ApproximantKind::BergstromPartial(k) = kind {
        params.k = Some(k);
    }
    bounds_for_kind(kind)
        .iter()
        .filter_map(|id| evaluate_bound(id, BoundInput::Distribution(f), &params, cfg).ok())
        .collect()
}

/// Least-squares slope of `log(distance)` against `log(n)`.
pub fn rate_slope(records: &[ApproximationResult]) -> Result<f64> {
    if records.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "a rate fit needs at least 4 records, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| !(r.tv_distance > 10.0 * r.err_interval)) {
        return Err(Error::ErrorDominated(format!(
            "at n={} the distance {:e} is not above 10× its error interval {:e}",
            r.n, r.tv_distance, r.err_interval
        )));
    }
    let xs: Vec<f64> = records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.tv_distance.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct n".into()));
    }
    Ok(sxy / sxx)
}

/// Writes sweep records as CSV: `#` provenance lines, then
/// `example,kind,n,distance,err,support,elapsed_s` and trailing `bound_id:value` cells
/// (bounds as distances, `NA` when inapplicable; failed cells carry `error:<message>`).
/// With `timing = false` the elapsed column is `NA`, making output reproducible bitwise.
pub fn write_sweep_csv<W: Write>(
    out: W,
    provenance: &[(String, String)],
    records: &[ExperimentRecord],
    timing: bool,
) -> Result<()> {
    let mut out = out;
    for (k, v) in provenance {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["example", "kind", "n", "distance", "err", "support", "elapsed_s"])
        .map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.example.clone(), r.kind.to_string(), r.n.to_string()];
        match &r.outcome {
            Ok(a) => {
                row.push(format!("{:e}", a.tv_distance));
                row.push(format!("{:e}", a.err_interval));
                row.push(a.support_size.to_string());
                row.push(if timing { format!("{:.3}", a.elapsed) } else { "NA".into() });
            }
            Err(_) => row.extend(["NA", "NA", "NA", "NA"].map(String::from)),
        }
        for b in &r.bounds {
            let v = if b.applicable { fmt_num(b.as_distance()) } else { "NA".into() };
            row.push(format!("{}:{v}", b.bound_id));
        }
        if let Err(e) = &r.outcome {
            row.push(format!("error:{e}"));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
