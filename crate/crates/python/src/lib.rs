//! Python bindings for `nbe-core`.

use num_bigint::BigUint;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nbe_core::cli::{self, RunConfig};
use nbe_core::cover::CoverGeometry;
use nbe_core::estimators::{self as est, BkMode, TruncationParams};
use nbe_core::symbolic::{self as sym, Transitions};
use nbe_core::{BallKind, CostScalar, Error, HighPrecision, LogF64, MeasureSpec, Precision, ShiftSpec, SubsetSpec, Target, Word};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidShift(_)
        | Error::InvalidWord(_)
        | Error::InvalidSubset(_)
        | Error::InvalidMeasure(_)
        | Error::InsufficientLength { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn ball(kind: &str) -> PyResult<BallKind> {
    match kind {
        "open" => Ok(BallKind::Open),
        "closed" => Ok(BallKind::Closed),
        other => Err(PyValueError::new_err(format!("ball must be 'open' or 'closed', got '{other}'"))),
    }
}

fn precision(p: &str) -> PyResult<Precision> {
    p.parse().map_err(to_py)
}

fn transitions(rows: Vec<Vec<u8>>) -> Transitions {
    rows.into_iter().map(|r| r.into_iter().map(|x| x != 0).collect()).collect()
}

fn params(n_min: usize, n_max: usize, tol: f64, kind: &str, prec: &str) -> PyResult<TruncationParams> {
    Ok(TruncationParams::new(n_min, n_max).with_tol(tol).with_kind(ball(kind)?).with_precision(precision(prec)?))
}

/// A full shift or a one-step shift of finite type.
#[pyclass(frozen, skip_from_py_object, module = "neutralized_entropy")]
#[derive(Clone)]
pub struct Shift(ShiftSpec);

#[pymethods]
impl Shift {
    #[staticmethod]
    fn full(alphabet: usize) -> PyResult<Self> {
        ShiftSpec::full(alphabet).map(Shift).map_err(to_py)
    }

    #[staticmethod]
    fn sft(transitions: Vec<Vec<u8>>) -> PyResult<Self> {
        ShiftSpec::sft(self::transitions(transitions)).map(Shift).map_err(to_py)
    }

    #[staticmethod]
    fn golden_mean() -> Self {
        Shift(ShiftSpec::golden_mean())
    }

    #[getter]
    fn alphabet(&self) -> usize {
        self.0.alphabet_size()
    }

    fn is_admissible(&self, word: Vec<u8>) -> bool {
        self.0.is_admissible(&word)
    }

    /// Number of admissible words of length `depth`.
    fn count_words(&self, depth: usize) -> BigUint {
        self.0.count_words(depth)
    }

    fn __repr__(&self) -> String {
        match self.0.transitions() {
            None => format!("Shift.full({})", self.0.alphabet_size()),
            Some(_) => format!("Shift.sft(alphabet={})", self.0.alphabet_size()),
        }
    }
}

/// The set whose entropy is measured.
#[pyclass(frozen, skip_from_py_object, module = "neutralized_entropy")]
#[derive(Clone)]
pub struct Subset(SubsetSpec);

#[pymethods]
impl Subset {
    #[staticmethod]
    fn whole() -> Self {
        Subset(SubsetSpec::whole())
    }

    #[staticmethod]
    fn empty() -> Self {
        Subset(SubsetSpec::Empty)
    }

    #[staticmethod]
    fn cylinders(words: Vec<Vec<u8>>) -> PyResult<Self> {
        SubsetSpec::cylinders(words.into_iter().map(Word::new).collect()).map(Subset).map_err(to_py)
    }

    #[staticmethod]
    fn subsystem(transitions: Vec<Vec<u8>>) -> Self {
        Subset(SubsetSpec::subsystem(self::transitions(transitions)))
    }

    #[staticmethod]
    fn golden_mean() -> Self {
        Subset(SubsetSpec::golden_mean())
    }

    fn count_words(&self, shift: &Shift, depth: usize) -> PyResult<BigUint> {
        self.0.count_words(&shift.0, depth).map_err(to_py)
    }
}

/// A shift-invariant Bernoulli or Markov measure.
#[pyclass(frozen, skip_from_py_object, module = "neutralized_entropy")]
#[derive(Clone)]
pub struct Measure(MeasureSpec);

#[pymethods]
impl Measure {
    #[staticmethod]
    fn uniform(alphabet: usize) -> PyResult<Self> {
        MeasureSpec::uniform(alphabet).map(Measure).map_err(to_py)
    }

    #[staticmethod]
    fn bernoulli(probs: Vec<f64>) -> PyResult<Self> {
        MeasureSpec::bernoulli(probs).map(Measure).map_err(to_py)
    }

    #[staticmethod]
    fn markov(stationary: Vec<f64>, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        MeasureSpec::markov(stationary, matrix).map(Measure).map_err(to_py)
    }

    #[staticmethod]
    fn parry(transitions: Vec<Vec<u8>>) -> PyResult<Self> {
        MeasureSpec::parry(&self::transitions(transitions)).map(Measure).map_err(to_py)
    }

    #[getter]
    fn entropy_rate(&self) -> f64 {
        self.0.entropy_rate()
    }

    fn log_cylinder_mass(&self, word: Vec<u8>) -> PyResult<f64> {
        self.0.log_cylinder_mass(&Word::new(word)).map_err(to_py)
    }

    fn sample_word(&self, length: usize, seed: u64) -> Vec<u8> {
        self.0.sample_word(length, seed).into_inner()
    }
}

/// Normalized flow measure carried by a subset.
#[pyclass(frozen, module = "neutralized_entropy")]
pub struct FrostmanMeasure {
    measure: nbe_core::cover::TreeMeasure,
    #[pyo3(get)]
    s: f64,
    #[pyo3(get)]
    log_total_mass: f64,
    #[pyo3(get)]
    worst_log_excess: f64,
    #[pyo3(get)]
    violations: usize,
}

#[pymethods]
impl FrostmanMeasure {
    fn log_mass(&self, word: Vec<u8>) -> PyResult<f64> {
        self.measure.log_mass(&Word::new(word)).map_err(to_py)
    }

    fn sample_word(&self, length: usize, seed: u64) -> Vec<u8> {
        self.measure.sample_word(length, seed).into_inner()
    }
}

/// Length of the cylinder equal to the ball of order `n` and rate `epsilon`.
#[pyfunction]
#[pyo3(signature = (n, epsilon, alphabet, ball = "open"))]
fn ball_cylinder_length(n: usize, epsilon: f64, alphabet: usize, ball: &str) -> PyResult<usize> {
    Ok(sym::ball_cylinder_length(n, epsilon, alphabet, self::ball(ball)?))
}

/// Neutralized Bowen distance between two words at order `n`.
#[pyfunction]
fn bowen_distance(x: Vec<u8>, y: Vec<u8>, n: usize, alphabet: usize) -> PyResult<f64> {
    sym::bowen_distance(&Word::new(x), &Word::new(y), n, alphabet).map_err(to_py)
}

/// Natural log of the cheapest cover cost at exponent `s`.
#[pyfunction]
#[pyo3(signature = (shift, subset, epsilon, n_min, n_max, s, ball = "open", precision = "double"))]
#[allow(clippy::too_many_arguments)]
fn log_cover_cost(
    shift: &Shift,
    subset: &Subset,
    epsilon: f64,
    n_min: usize,
    n_max: usize,
    s: f64,
    ball: &str,
    precision: &str,
) -> PyResult<f64> {
    let g = CoverGeometry::new(&shift.0, &Target::Indicator(subset.0.clone()), epsilon, n_min, n_max, self::ball(ball)?)
        .map_err(to_py)?;
    Ok(match self::precision(precision)? {
        Precision::Double => g.integral_cost::<LogF64>(s).ln(),
        Precision::High => g.integral_cost::<HighPrecision>(s).ln(),
    })
}

#[pyfunction]
#[pyo3(signature = (shift, subset, epsilon, n_min, n_max, s, ball = "open"))]
fn frostman(
    shift: &Shift,
    subset: &Subset,
    epsilon: f64,
    n_min: usize,
    n_max: usize,
    s: f64,
    ball: &str,
) -> PyResult<FrostmanMeasure> {
    let g = CoverGeometry::new(&shift.0, &Target::Indicator(subset.0.clone()), epsilon, n_min, n_max, self::ball(ball)?)
        .map_err(to_py)?;
    let f = g.frostman::<LogF64>(s).map_err(to_py)?;
    let audit = f.audit().clone();
    Ok(FrostmanMeasure {
        s,
        log_total_mass: f.total_mass.ln(),
        worst_log_excess: audit.worst_log_excess,
        violations: audit.violations,
        measure: f.measure,
    })
}

fn critical_dict<'py>(py: Python<'py>, e: &est::CriticalEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("epsilon", e.epsilon)?;
    d.set_item("s_star", e.s_star)?;
    d.set_item("bracket", e.bracket)?;
    d.set_item("n_min", e.n_min)?;
    d.set_item("n_max", e.n_max)?;
    d.set_item("d_max", e.d_max)?;
    d.set_item("converged", e.converged)?;
    d.set_item("status", format!("{:?}", e.status))?;
    d.set_item("evaluations", e.evaluations)?;
    Ok(d)
}

/// Critical exponent `s*` of the truncated cover cost.
#[pyfunction]
#[pyo3(signature = (shift, subset, epsilon, n_min = 50, n_max = 400, tol = 1e-3, ball = "open", precision = "double"))]
#[allow(clippy::too_many_arguments)]
fn critical_exponent<'py>(
    py: Python<'py>,
    shift: &Shift,
    subset: &Subset,
    epsilon: f64,
    n_min: usize,
    n_max: usize,
    tol: f64,
    ball: &str,
    precision: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(n_min, n_max, tol, ball, precision)?;
    let e = py.detach(|| est::critical_exponent(&shift.0, &subset.0, epsilon, &p)).map_err(to_py)?;
    critical_dict(py, &e)
}

/// Critical exponents over decreasing `epsilons` and their linear extrapolation to zero.
#[pyfunction]
#[pyo3(signature = (shift, subset, epsilons, n_min = 50, n_max = 400, tol = 1e-3, ball = "open", precision = "double"))]
#[allow(clippy::too_many_arguments)]
fn bowen_entropy<'py>(
    py: Python<'py>,
    shift: &Shift,
    subset: &Subset,
    epsilons: Vec<f64>,
    n_min: usize,
    n_max: usize,
    tol: f64,
    ball: &str,
    precision: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(n_min, n_max, tol, ball, precision)?;
    let t = py.detach(|| est::neutralized_bowen_entropy(&shift.0, &subset.0, &epsilons, &p)).map_err(to_py)?;
    let d = PyDict::new(py);
    let rows = t.rows.iter().map(|r| critical_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("rows", rows)?;
    d.set_item("extrapolated", t.extrapolation.map(|x| x.intercept))?;
    d.set_item("monotone", t.monotone)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (shift, measure, epsilon, deltas, n_min = 50, n_max = 400, tol = 1e-3, ball = "open"))]
#[allow(clippy::too_many_arguments)]
fn katok_entropy<'py>(
    py: Python<'py>,
    shift: &Shift,
    measure: &Measure,
    epsilon: f64,
    deltas: Vec<f64>,
    n_min: usize,
    n_max: usize,
    tol: f64,
    ball: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(n_min, n_max, tol, ball, "double")?;
    let t = py.detach(|| est::katok_entropy(&shift.0, &measure.0, epsilon, &deltas, &p)).map_err(to_py)?;
    let d = PyDict::new(py);
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let row = critical_dict(py, &r.estimate)?;
            row.set_item("delta", r.delta)?;
            row.set_item("lower", r.lower_root)?;
            row.set_item("upper", r.upper_root)?;
            row.set_item("duality_gap", r.duality_gap)?;
            row.set_item("exact_checked", r.exact_checked)?;
            Ok(row)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("epsilon", t.epsilon)?;
    d.set_item("rows", rows)?;
    d.set_item("value", t.value)?;
    d.set_item("monotone", t.monotone)?;
    d.set_item("warnings", t.warnings)?;
    Ok(d)
}

/// Brin-Katok entropy at `epsilon`; Monte Carlo when `samples` is given, exact otherwise.
#[pyfunction]
#[pyo3(signature = (measure, epsilon, orders, ball = "closed", samples = None, seed = 0, confidence = 0.95))]
#[allow(clippy::too_many_arguments)]
fn brin_katok_entropy<'py>(
    py: Python<'py>,
    measure: &Measure,
    epsilon: f64,
    orders: Vec<usize>,
    ball: &str,
    samples: Option<usize>,
    seed: u64,
    confidence: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = self::ball(ball)?;
    let mode = match samples {
        Some(samples) => BkMode::MonteCarlo { samples, seed },
        None => BkMode::ExactExpectation,
    };
    let rate = measure.0.entropy_rate();
    let r = py
        .detach(|| est::brin_katok_entropy(&measure.0, epsilon, &orders, kind, mode, confidence, Some(rate)))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("epsilon", r.epsilon)?;
    d.set_item("orders", r.orders)?;
    d.set_item("per_order", r.per_order)?;
    d.set_item("value", r.integral_estimate)?;
    d.set_item("exact_limit", r.exact_limit)?;
    d.set_item("ci", r.ci)?;
    d.set_item("std_error", r.std_error)?;
    d.set_item("samples", r.samples)?;
    Ok(d)
}

/// `-ln mu(B_n(x, eps)) / n` along the given orders.
#[pyfunction]
#[pyo3(signature = (measure, x, epsilon, orders, ball = "closed"))]
fn brin_katok_pointwise(measure: &Measure, x: Vec<u8>, epsilon: f64, orders: Vec<usize>, ball: &str) -> PyResult<Vec<f64>> {
    let r = est::brin_katok_pointwise(&measure.0, &Word::new(x), epsilon, &orders, self::ball(ball)?).map_err(to_py)?;
    Ok(r.values)
}

/// Smallest `(n, epsilon)`-spanning set size.
#[pyfunction]
fn min_spanning_count(shift: &Shift, n: usize, epsilon: f64) -> PyResult<BigUint> {
    est::min_spanning_count(&shift.0, n, epsilon).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (shift, epsilons, orders = None))]
fn spanning_entropy<'py>(
    py: Python<'py>,
    shift: &Shift,
    epsilons: Vec<f64>,
    orders: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let orders = orders.unwrap_or_else(est::default_order_schedule);
    let t = est::spanning_entropy(&shift.0, &epsilons, &orders).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("epsilons", t.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>())?;
    d.set_item("rates", t.rows.iter().map(|r| r.r).collect::<Vec<_>>())?;
    d.set_item("extrapolated", t.extrapolation.map(|x| x.intercept))?;
    Ok(d)
}

/// Runs a CLI command on a TOML config without writing files.
///
/// Returns `(exit_code, records)` with records as plain dictionaries.
#[pyfunction]
fn run<'py>(py: Python<'py>, command: &str, config_toml: &str) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let command: cli::Command = command.parse().map_err(to_py)?;
    let cfg = RunConfig::from_toml_str(config_toml).map_err(to_py)?;
    let outcome = py.detach(|| cli::execute(command, &cfg)).map_err(to_py)?;
    let text = serde_json::to_string(&outcome.records).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let records = py.import("json")?.call_method1("loads", (text,))?;
    Ok((outcome.exit_code, records))
}

#[pymodule]
fn neutralized_entropy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Shift>()?;
    m.add_class::<Subset>()?;
    m.add_class::<Measure>()?;
    m.add_class::<FrostmanMeasure>()?;
    m.add_function(wrap_pyfunction!(ball_cylinder_length, m)?)?;
    m.add_function(wrap_pyfunction!(bowen_distance, m)?)?;
    m.add_function(wrap_pyfunction!(log_cover_cost, m)?)?;
    m.add_function(wrap_pyfunction!(frostman, m)?)?;
    m.add_function(wrap_pyfunction!(critical_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(bowen_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(katok_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(brin_katok_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(brin_katok_pointwise, m)?)?;
    m.add_function(wrap_pyfunction!(min_spanning_count, m)?)?;
    m.add_function(wrap_pyfunction!(spanning_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
