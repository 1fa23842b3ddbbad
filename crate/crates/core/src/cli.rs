//! Command-line front end. [`dispatch`] returns the process exit code:
//! 0 success, 1 usage or input error, 2 numerical refusal, 3 inequality violated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::approx::ApproximantKind;
use crate::bounds::{
    evaluate_bound, fit_constant, BoundConfig, BoundInput, BoundParams, BoundReport, BOUND_IDS,
};
use crate::error::{Error, Result};
use crate::experiments::{
    lemma_scan, make_example, parse_grid, parse_kinds, sweep, write_sweep_csv, ExampleId,
    ExampleSpec, ScanProfile,
};
use crate::measure::io::{format_measure, parse_measure};
use crate::measure::SymmetricDistribution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_REFUSAL: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "latcp", version, about = "Compound Poisson approximations of lattice convolutions")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One (n, approximant) cell as CSV.
    Approx {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value = "cp")]
        kind: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Every (n, kind) cell of a grid as CSV.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "8:4096:x2")]
        grid: String,
        #[arg(long, default_value = "conv,cp,hipp,first,berg:1")]
        kinds: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Table of bound reports.
    Bounds {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Bergström order.
        #[arg(long)]
        k: Option<u32>,
        /// Comma-separated bound ids (default: all).
        #[arg(long)]
        bound: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Writes an example law as a measure file.
    Example {
        #[arg(long)]
        id: String,
        /// Outer atom location of ex2.
        #[arg(long)]
        n: Option<i64>,
        #[arg(long = "K")]
        truncation: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random scan of one explicit inequality.
    CheckLemma {
        #[arg(long)]
        lemma: String,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        dim_max: usize,
        #[arg(long, default_value_t = 20)]
        atoms_max: usize,
        /// Generator profile TOML (default: the built-in profile).
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits one unspecified constant of a bound against computed distances.
    FitC {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "8:4096:x2")]
        grid: String,
        #[arg(long, default_value = "cp")]
        kind: String,
        #[arg(long)]
        bound: String,
        /// Constant to fit when the bound has several.
        #[arg(long)]
        free: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Measure file.
    #[arg(long = "in", conflicts_with = "id")]
    input: Option<PathBuf>,
    /// Example id: ex1, ex2 or ex3.
    #[arg(long)]
    id: Option<String>,
    /// Outer atom location of ex2.
    #[arg(long)]
    m: Option<i64>,
    /// Truncation point of ex1/ex3 (default: chosen from the grid).
    #[arg(long = "K")]
    truncation: Option<u64>,
    #[arg(long, default_value_t = 1e-7)]
    tail_target: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Unspecified constant, `id=value`; repeatable.
    #[arg(long = "C")]
    constants: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `NA` instead of timings.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self) -> Result<BoundConfig> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("--tol must be positive, got {}", self.tol)));
        }
        let mut cfg = BoundConfig::new();
        for c in &self.constants {
            cfg.set_from_str(c)?;
        }
        Ok(cfg)
    }

    fn provenance(&self, cfg: &BoundConfig) -> Vec<(String, String)> {
        let mut p = vec![("tol".into(), format!("{:e}", self.tol)), ("seed".into(), self.seed.to_string())];
        p.extend(cfg.entries().map(|(k, v)| (format!("C.{k}"), v.to_string())));
        p
    }
}

struct Loaded {
    name: String,
    f: SymmetricDistribution,
    provenance: Vec<(String, String)>,
}

impl InputArgs {
    fn load(&self, n_max: u64) -> Result<Loaded> {
        match (&self.input, &self.id) {
            (Some(path), _) => {
                let f = read_distribution(path)?;
                let name = path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned());
                Ok(Loaded {
                    name,
                    f,
                    provenance: vec![("in".into(), path.display().to_string())],
                })
            }
            (None, Some(id)) => {
                let id = ExampleId::parse(id, self.m)?;
                let spec = match self.truncation {
                    Some(k) => ExampleSpec::new(id, k),
                    None => ExampleSpec::for_sweep(id, n_max, self.tail_target),
                };
                let f = make_example(&spec)?;
                Ok(Loaded {
                    name: id.to_string(),
                    f,
                    provenance: vec![
                        ("id".into(), id.to_string()),
                        ("K".into(), spec.truncation_k.to_string()),
                        ("tail_target".into(), format!("{:e}", self.tail_target)),
                        ("tail_mass".into(), format!("{:e}", spec.tail_mass())),
                    ],
                })
            }
            (None, None) => Err(Error::InvalidArgument("give --in FILE or --id EXAMPLE".into())),
        }
    }
}

/// Reads a measure file as a symmetric distribution; a `tail_m2=` header entry sets the
/// tail second-moment bound.
pub fn read_distribution(path: &Path) -> Result<SymmetricDistribution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file = parse_measure(&text)?;
    let tail = match file.extra_value("tail_m2") {
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("tail_m2={v} is not a number")))?,
        None => 0.0,
    };
    Ok(SymmetricDistribution::new(file.measure)?.with_tail_second_moment(tail))
}

/// Text of the measure file for `f`, readable by [`read_distribution`].
pub fn distribution_file(f: &SymmetricDistribution, comment: &str) -> String {
    let mut extra = Vec::new();
    if f.tail_second_moment() != 0.0 {
        extra.push(("tail_m2", format!("{:e}", f.tail_second_moment())));
    }
    format!("# {comment}\n{}", format_measure(f.measure(), &extra))
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(stdout),
    })
}

fn kind_of(s: &str) -> Result<ApproximantKind> {
    let k: ApproximantKind = s.parse()?;
    Ok(k)
}

fn run(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let version = ("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    match cmd {
        Command::Approx { input, n, kind, run } => {
            let cfg = run.config()?;
            let kind = kind_of(&kind)?;
            if n == 0 {
                return Err(Error::InvalidArgument("--n must be >= 1".into()));
            }
            let loaded = input.load(n)?;
            let records = sweep(&loaded.name, &loaded.f, &[n], &[kind], run.tol, &cfg);
            let mut prov = vec![version, ("command".into(), "approx".into())];
            prov.extend(loaded.provenance);
            prov.extend([("n".into(), n.to_string()), ("kind".into(), kind.to_string())]);
            prov.extend(run.provenance(&cfg));
            write_sweep_csv(open_out(&run.out, stdout)?, &prov, &records, !run.no_timing)?;
            match &records[0].outcome {
                Ok(_) => Ok(EXIT_OK),
                Err(e) => Err(e.clone()),
            }
        }
        Command::Sweep { input, grid, kinds, run } => {
            let cfg = run.config()?;
            let n_grid = parse_grid(&grid)?;
            let kinds_v = parse_kinds(&kinds)?;
            let loaded = input.load(*n_grid.last().expect("grid is nonempty"))?;
            let records = sweep(&loaded.name, &loaded.f, &n_grid, &kinds_v, run.tol, &cfg);
            let mut prov = vec![version, ("command".into(), "sweep".into())];
            prov.extend(loaded.provenance);
            prov.extend([("grid".into(), grid), ("kinds".into(), kinds)]);
            prov.extend(run.provenance(&cfg));
            write_sweep_csv(open_out(&run.out, stdout)?, &prov, &records, !run.no_timing)?;
            for r in &records {
                if let Err(e) = &r.outcome {
                    writeln!(stderr, "n={} {}: {e}", r.n, r.kind)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Bounds { input, n, a, b, k, bound, run } => {
            let cfg = run.config()?;
            let loaded = input.load(n.unwrap_or(1))?;
            let params = BoundParams {
                n,
                a,
                b,
                k,
                n_pairs: None,
            };
            let explicit = bound.is_some();
            let ids: Vec<String> = match &bound {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => BOUND_IDS.iter().map(|(id, _, _)| id.to_string()).collect(),
            };
            let mut reports = Vec::new();
            for id in &ids {
                match evaluate_bound(id, BoundInput::Distribution(&loaded.f), &params, &cfg) {
                    Ok(r) => reports.push(r),
                    Err(Error::InvalidArgument(msg)) if !explicit => reports.push(BoundReport {
                        bound_id: id.clone(),
                        n,
                        metric: BOUND_IDS.iter().find(|b| b.0 == id).expect("listed").1,
                        explicit_part: f64::NAN,
                        generic_terms: Vec::new(),
                        total_at_c: f64::NAN,
                        applicable: false,
                        reason: msg,
                    }),
                    Err(e) => return Err(e),
                }
            }
            let mut out = open_out(&run.out, stdout)?;
            let mut prov = vec![version, ("command".into(), "bounds".into())];
            prov.extend(loaded.provenance);
            for (key, v) in [("n", n.map(|x| x.to_string())), ("a", a.map(|x| x.to_string())), ("b", b.map(|x| x.to_string())), ("k", k.map(|x| x.to_string()))] {
                if let Some(v) = v {
                    prov.push((key.into(), v));
                }
            }
            prov.extend(run.provenance(&cfg));
            for (key, v) in &prov {
                writeln!(out, "# {key}={v}")?;
            }
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(BoundReport::csv_header()).map_err(csv_err)?;
            for r in &reports {
                w.write_record(r.csv_record()).map_err(csv_err)?;
            }
            w.flush()?;
            Ok(EXIT_OK)
        }
        Command::Example { id, n, truncation, out } => {
            let id = ExampleId::parse(&id, n)?;
            let spec = match truncation {
                Some(k) => ExampleSpec::new(id, k),
                None => ExampleSpec::for_sweep(id, 1, 1e-7),
            };
            let f = make_example(&spec)?;
            let comment = match id {
                ExampleId::Ex2(_) => format!("example {id}"),
                _ => format!("example {id} K={}", spec.truncation_k),
            };
            let text = distribution_file(&f, &comment);
            let mut w = open_out(&out, stdout)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            Ok(EXIT_OK)
        }
        Command::CheckLemma {
            lemma,
            trials,
            seed,
            dim_max,
            atoms_max,
            profile,
            out,
        } => {
            let prof = match &profile {
                Some(p) => ScanProfile::parse(
                    &std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
                )?,
                None => ScanProfile::builtin(),
            };
            let rep = lemma_scan(&lemma, trials, seed, dim_max, atoms_max, &prof)?;
            let mut o = open_out(&out, stdout)?;
            writeln!(o, "# {}={}", version.0, version.1)?;
            writeln!(
                o,
                "# command=check-lemma lemma={lemma} trials={trials} seed={seed} dim_max={dim_max} atoms_max={atoms_max} profile_version={}",
                prof.version
            )?;
            let mut w = csv::Writer::from_writer(o);
            let csv_err = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(["lemma", "trials", "worst_ratio", "worst_ratio_lower", "violations", "refused", "worst_case"])
                .map_err(csv_err)?;
            w.write_record([
                rep.lemma_id.clone(),
                rep.trials.to_string(),
                format!("{:e}", rep.worst_ratio),
                format!("{:e}", rep.worst_ratio_lower),
                rep.violations.to_string(),
                rep.refused.to_string(),
                rep.worst_case.clone(),
            ])
            .map_err(csv_err)?;
            w.flush()?;
            if let Some(msg) = &rep.first_refusal {
                writeln!(stderr, "{} trial(s) refused, first: {msg}", rep.refused)?;
            }
            Ok(if rep.violations > 0 {
                EXIT_VIOLATION
            } else if rep.refused > 0 {
                EXIT_REFUSAL
            } else {
                EXIT_OK
            })
        }
        Command::FitC { input, grid, kind, bound, free, run } => {
            let cfg = run.config()?;
            let kind = kind_of(&kind)?;
            let n_grid = parse_grid(&grid)?;
            let loaded = input.load(*n_grid.last().expect("grid is nonempty"))?;
            let records = sweep(&loaded.name, &loaded.f, &n_grid, &[kind], run.tol, &cfg);
            let mut obs = Vec::new();
            for r in &records {
                let a = r.outcome.as_ref().map_err(Clone::clone)?;
                if !(a.tv_distance > a.err_interval) {
                    return Err(Error::ErrorDominated(format!(
                        "at n={} the distance {:e} is within its error interval {:e}",
                        r.n, a.tv_distance, a.err_interval
                    )));
                }
                let rep = r
                    .bounds
                    .iter()
                    .find(|b| b.bound_id == bound)
                    .ok_or_else(|| Error::InvalidArgument(format!("bound {bound} does not apply to kind {kind}")))?;
                // norm bounds compare against twice the distance
                let scale = if rep.as_distance() == rep.total_at_c { 1.0 } else { 2.0 };
                obs.push((scale * (a.tv_distance + a.err_interval), rep.clone()));
            }
            let c = fit_constant(&obs, free.as_deref(), &cfg)?;
            let free_id = free.unwrap_or_else(|| {
                obs[0].1.generic_terms.first().map_or_else(String::new, |t| t.0.clone())
            });
            let mut o = open_out(&run.out, stdout)?;
            let mut prov = vec![version, ("command".into(), "fit-c".into())];
            prov.extend(loaded.provenance);
            prov.extend([("grid".into(), grid), ("kind".into(), kind.to_string()), ("bound".into(), bound.clone())]);
            prov.extend(run.provenance(&cfg));
            for (key, v) in &prov {
                writeln!(o, "# {key}={v}")?;
            }
            writeln!(o, "bound_id,constant,fitted,observations")?;
            writeln!(o, "{bound},{free_id},{c:e},{}", obs.len())?;
            o.flush()?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    // output is buffered so the run can move onto a worker pool
    let mut out_buf: Vec<u8> = Vec::new();
    let mut err_buf: Vec<u8> = Vec::new();
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| run(cli.command, &mut out_buf, &mut err_buf)),
            Err(e) => Err(Error::InvalidArgument(format!("--threads: {e}"))),
        },
        None => run(cli.command, &mut out_buf, &mut err_buf),
    };
    let _ = stdout.write_all(&out_buf);
    let _ = stdout.flush();
    let _ = stderr.write_all(&err_buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "latcp: {e}");
            if e.is_numerical_refusal() {
                EXIT_REFUSAL
            } else {
                EXIT_USAGE
            }
        }
    }
}
