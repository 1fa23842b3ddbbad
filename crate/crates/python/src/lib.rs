//! Python module `latcp`: measures, example laws, approximants, bounds and scans.

use pyo3::create_exception;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use latcp::approx::{self, ApproximantKind, ApproximationResult};
use latcp::bounds::{self, BoundConfig, BoundInput, BoundParams, BoundReport};
use latcp::experiments::{self, ExampleId, ExampleSpec, ScanProfile};
use latcp::{Error, SignedLatticeMeasure, SymmetricDistribution};

create_exception!(latcp, LatcpError, PyValueError, "Invalid input or failed computation.");
create_exception!(
    latcp,
    RefusalError,
    LatcpError,
    "The computation was refused: cancellation, error domination or excessive size."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::UnknownId(_) => PyKeyError::new_err(e.to_string()),
        e if e.is_numerical_refusal() => RefusalError::new_err(e.to_string()),
        e => LatcpError::new_err(e.to_string()),
    }
}

fn parse_kind(kind: &str) -> PyResult<ApproximantKind> {
    kind.parse().map_err(to_py)
}

/// Sparse signed measure on `Z^d` with a tracked truncation error.
#[pyclass(name = "Measure", module = "latcp", frozen)]
struct PyMeasure {
    inner: SignedLatticeMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    #[pyo3(signature = (dim, atoms, trunc_err = 0.0))]
    fn new(dim: usize, atoms: Vec<(Vec<i64>, f64)>, trunc_err: f64) -> PyResult<Self> {
        if !(trunc_err >= 0.0) {
            return Err(LatcpError::new_err("trunc_err must be >= 0"));
        }
        let inner = SignedLatticeMeasure::from_atoms(dim, atoms).map_err(to_py)?.with_added_err(trunc_err);
        Ok(PyMeasure { inner })
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        PyMeasure {
            inner: SignedLatticeMeasure::identity(dim),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn trunc_err(&self) -> f64 {
        self.inner.trunc_err()
    }

    #[getter]
    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Atoms as `(point, weight)` in lexicographic order.
    fn atoms(&self) -> Vec<(Vec<i64>, f64)> {
        self.inner.iter().map(|(p, w)| (p.to_vec(), w)).collect()
    }

    fn weight_at(&self, point: Vec<i64>) -> f64 {
        self.inner.weight_at(&point)
    }

    fn scaled(&self, c: f64) -> Self {
        PyMeasure {
            inner: self.inner.scaled(c),
        }
    }

    fn is_symmetric(&self) -> bool {
        latcp::symmetry_check(&self.inner)
    }

    fn convolve(&self, py: Python<'_>, other: &PyMeasure) -> PyResult<Self> {
        let (a, b) = (&self.inner, &other.inner);
        let inner = py.detach(|| latcp::convolve(a, b)).map_err(to_py)?;
        Ok(PyMeasure { inner })
    }

    #[pyo3(signature = (n, tol = 1e-9))]
    fn power(&self, py: Python<'_>, n: u64, tol: f64) -> PyResult<Self> {
        let m = &self.inner;
        let inner = py.detach(|| latcp::convolution_power(m, n, tol)).map_err(to_py)?;
        Ok(PyMeasure { inner })
    }

    /// `exp{M}`; `tol = 0` sums to machine precision without truncating.
    #[pyo3(signature = (tol = 1e-9))]
    fn exp(&self, py: Python<'_>, tol: f64) -> PyResult<Self> {
        let m = &self.inner;
        let inner = py.detach(|| approx::measure_exp(m, tol)).map_err(to_py)?;
        Ok(PyMeasure { inner })
    }

    fn truncate(&self, eps: f64) -> Self {
        PyMeasure {
            inner: latcp::truncate(&self.inner, eps),
        }
    }

    /// `(½‖A − B‖, error bound)`.
    fn tv_distance(&self, other: &PyMeasure) -> PyResult<(f64, f64)> {
        latcp::tv_distance(&self.inner, &other.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Measure(dim={}, atoms={}, norm={:e}, trunc_err={:e})",
            self.inner.dim(),
            self.inner.len(),
            self.inner.norm(),
            self.inner.trunc_err()
        )
    }
}

/// Symmetric probability law on `Z^d`.
#[pyclass(name = "Distribution", module = "latcp", frozen)]
struct PyDistribution {
    inner: SymmetricDistribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(measure: &PyMeasure) -> PyResult<Self> {
        let inner = SymmetricDistribution::new(measure.inner.clone()).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    /// Example law `ex1`, `ex2` or `ex3`. Without `K` the truncation suits sweeps up to `n_max`.
    #[staticmethod]
    #[allow(non_snake_case)]
    #[pyo3(signature = (id, K = None, m = None, n_max = 4096, tail_target = 1e-7))]
    fn example(id: &str, K: Option<u64>, m: Option<i64>, n_max: u64, tail_target: f64) -> PyResult<Self> {
        let eid = ExampleId::parse(id, m).map_err(to_py)?;
        let spec = match K {
            Some(k) => ExampleSpec::new(eid, k),
            None => ExampleSpec::for_sweep(eid, n_max, tail_target),
        };
        let inner = experiments::make_example(&spec).map_err(to_py)?;
        Ok(PyDistribution { inner })
    }

    #[getter]
    fn measure(&self) -> PyMeasure {
        PyMeasure {
            inner: self.inner.measure().clone(),
        }
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_pairs(&self) -> usize {
        self.inner.num_pairs()
    }

    #[getter]
    fn trunc_err(&self) -> f64 {
        self.inner.trunc_err()
    }

    /// `δ(y)` over the stored atoms; `upper=True` adds the truncated tail's share.
    #[pyo3(signature = (y, upper = false))]
    fn delta(&self, y: f64, upper: bool) -> PyResult<f64> {
        if !(y >= 0.0) {
            return Err(LatcpError::new_err("δ needs y >= 0"));
        }
        Ok(if upper {
            bounds::delta_upper(&self.inner, y)
        } else {
            bounds::delta_functional(&self.inner, y)
        })
    }

    /// The approximant of `F^{*n}` of the given kind.
    #[pyo3(signature = (n, kind = "cp", tol = 1e-9))]
    fn approximant(&self, py: Python<'_>, n: u64, kind: &str, tol: f64) -> PyResult<PyMeasure> {
        let kind = parse_kind(kind)?;
        let f = &self.inner;
        let inner = py.detach(|| approx::build_approximant(f, n, kind, tol)).map_err(to_py)?;
        Ok(PyMeasure { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Distribution(dim={}, pairs={}, q={}, trunc_err={:e})",
            self.inner.dim(),
            self.inner.num_pairs(),
            self.inner.q(),
            self.inner.trunc_err()
        )
    }
}

fn result_dict<'py>(py: Python<'py>, r: &ApproximationResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("kind", r.kind.to_string())?;
    d.set_item("distance", r.tv_distance)?;
    d.set_item("err", r.err_interval)?;
    d.set_item("support", r.support_size)?;
    d.set_item("elapsed_s", r.elapsed)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &BoundReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("bound_id", &r.bound_id)?;
    d.set_item("n", r.n)?;
    d.set_item("applicable", r.applicable)?;
    d.set_item("explicit_part", r.explicit_part)?;
    d.set_item("generic_terms", r.generic_terms.clone())?;
    d.set_item("total", r.total_at_c)?;
    d.set_item("reason", &r.reason)?;
    Ok(d)
}

fn config(constants: Option<Vec<(String, f64)>>) -> PyResult<BoundConfig> {
    let mut cfg = BoundConfig::new();
    for (id, v) in constants.unwrap_or_default() {
        cfg.set(&id, v).map_err(to_py)?;
    }
    Ok(cfg)
}

/// Distance between `F^{*n}` and one approximant, with its error interval.
#[pyfunction]
#[pyo3(signature = (f, n, kind = "cp", tol = 1e-9))]
fn approximate<'py>(
    py: Python<'py>,
    f: &PyDistribution,
    n: u64,
    kind: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = parse_kind(kind)?;
    let inner = &f.inner;
    let r = py.detach(|| approx::approximate(inner, n, kind, tol)).map_err(to_py)?;
    result_dict(py, &r)
}

/// Evaluates one bound; `constants` assigns the unspecified constants (default 1).
#[pyfunction]
#[pyo3(signature = (bound_id, f, n = None, a = None, b = None, k = None, constants = None))]
#[allow(clippy::too_many_arguments)]
fn evaluate_bound<'py>(
    py: Python<'py>,
    bound_id: &str,
    f: &PyDistribution,
    n: Option<u64>,
    a: Option<f64>,
    b: Option<f64>,
    k: Option<u32>,
    constants: Option<Vec<(String, f64)>>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = BoundParams {
        n,
        a,
        b,
        k,
        ..Default::default()
    };
    let cfg = config(constants)?;
    let r = bounds::evaluate_bound(bound_id, BoundInput::Distribution(&f.inner), &params, &cfg).map_err(to_py)?;
    report_dict(py, &r)
}

/// Runs a sweep over `grid` (e.g. `"8:4096:x2"`) and `kinds` (e.g. `"cp,hipp"`).
/// Failed cells carry an `error` entry instead of a distance.
#[pyfunction]
#[pyo3(signature = (f, grid, kinds = "cp", tol = 1e-9, constants = None))]
fn sweep<'py>(
    py: Python<'py>,
    f: &PyDistribution,
    grid: &str,
    kinds: &str,
    tol: f64,
    constants: Option<Vec<(String, f64)>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let grid = experiments::parse_grid(grid).map_err(to_py)?;
    let kinds = experiments::parse_kinds(kinds).map_err(to_py)?;
    let cfg = config(constants)?;
    let inner = &f.inner;
    let cells = py.detach(|| experiments::sweep("python", inner, &grid, &kinds, tol, &cfg));
    let mut out = Vec::with_capacity(cells.len());
    for c in &cells {
        let d = match &c.outcome {
            Ok(r) => result_dict(py, r)?,
            Err(e) => {
                let d = PyDict::new(py);
                d.set_item("n", c.n)?;
                d.set_item("kind", c.kind.to_string())?;
                d.set_item("error", e.to_string())?;
                d
            }
        };
        let reports = c.bounds.iter().map(|r| report_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
        d.set_item("bounds", reports)?;
        out.push(d);
    }
    Ok(out)
}

/// Seeded scan of one explicit inequality over random instances.
#[pyfunction]
#[pyo3(signature = (lemma_id, trials = 500, seed = 42, dim_max = 3, atoms_max = 20))]
fn lemma_scan<'py>(
    py: Python<'py>,
    lemma_id: &str,
    trials: usize,
    seed: u64,
    dim_max: usize,
    atoms_max: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let profile = ScanProfile::builtin();
    let r = py
        .detach(|| experiments::lemma_scan(lemma_id, trials, seed, dim_max, atoms_max, &profile))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lemma_id", &r.lemma_id)?;
    d.set_item("trials", r.trials)?;
    d.set_item("worst_ratio", r.worst_ratio)?;
    d.set_item("worst_ratio_lower", r.worst_ratio_lower)?;
    d.set_item("violations", r.violations)?;
    d.set_item("refused", r.refused)?;
    d.set_item("first_refusal", r.first_refusal.clone())?;
    d.set_item("worst_case", &r.worst_case)?;
    Ok(d)
}

/// Identifiers of every bound and every scannable inequality.
#[pyfunction]
fn bound_ids() -> Vec<&'static str> {
    bounds::BOUND_IDS.iter().map(|(id, _, _)| *id).collect()
}

#[pyfunction]
fn scan_ids() -> Vec<&'static str> {
    experiments::SCAN_IDS.to_vec()
}

#[pymodule]
#[pyo3(name = "latcp")]
fn latcp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("LatcpError", m.py().get_type::<LatcpError>())?;
    m.add("RefusalError", m.py().get_type::<RefusalError>())?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyDistribution>()?;
    m.add_function(wrap_pyfunction!(approximate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_scan, m)?)?;
    m.add_function(wrap_pyfunction!(bound_ids, m)?)?;
    m.add_function(wrap_pyfunction!(scan_ids, m)?)?;
    Ok(())
}
