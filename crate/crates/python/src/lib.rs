//! Python bindings: models, expressions, symmetry search and reduction.
//! Rationals cross the boundary as `fractions.Fraction`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nondim_core::expr::{self, Assignment, ExprDag, Symbol};
use nondim_core::num::{fmt_rational, parse_rational, Rational};
use nondim_core::odesys;
use nondim_core::reduce::{self, ReduceConfig};
use nondim_core::symfind::{self, Backend, FindConfig, Kind};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, r: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((fmt_rational(r),))
}

/// Accepts ints, Fractions and strings such as "3/4".
fn to_rational(v: &Bound<'_, PyAny>) -> PyResult<Rational> {
    let text = v.str()?.to_string();
    parse_rational(&text).ok_or_else(|| value_error(format!("not a rational number: {text}")))
}

fn to_assignment(point: &Bound<'_, PyDict>) -> PyResult<Assignment> {
    let mut a = Assignment::new();
    for (k, v) in point.iter() {
        a.insert(k.extract::<String>()?.as_str(), to_rational(&v)?);
    }
    Ok(a)
}

fn eval_error(e: expr::EvalError) -> PyErr {
    match e {
        expr::EvalError::DivisionByZero { .. } => PyZeroDivisionError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn kind_of(s: &str) -> PyResult<Kind> {
    match s {
        "scale" => Ok(Kind::Scale),
        "translation" => Ok(Kind::Translation),
        _ => Err(value_error(format!("kind must be 'scale' or 'translation', got {s:?}"))),
    }
}

/// A rational expression stored as a shared straight-line program.
#[pyclass(module = "nondim", frozen, from_py_object)]
#[derive(Clone)]
struct Expr {
    dag: ExprDag,
}

#[pymethods]
impl Expr {
    #[new]
    fn new(text: &str, variables: Vec<String>) -> PyResult<Self> {
        expr::parse_expr(text, &variables).map(|dag| Expr { dag }).map_err(value_error)
    }

    /// Number of arithmetic instructions.
    #[getter]
    fn length(&self) -> usize {
        self.dag.len()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.dag.variables().iter().map(ToString::to_string).collect()
    }

    fn evaluate<'py>(&self, py: Python<'py>, point: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyAny>> {
        let v = expr::evaluate(&self.dag, &to_assignment(point)?).map_err(eval_error)?;
        fraction(py, &v)
    }

    /// Value and all partial derivatives by one reverse sweep.
    fn gradient<'py>(&self, py: Python<'py>, point: &Bound<'py, PyDict>) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyDict>)> {
        let g = expr::gradient(&self.dag, &to_assignment(point)?).map_err(eval_error)?;
        let d = PyDict::new(py);
        for (s, v) in &g.partials {
            d.set_item(s.as_str(), fraction(py, v)?)?;
        }
        Ok((fraction(py, &g.value)?, d))
    }

    /// Canonical reduced fraction, as text.
    fn normalize(&self) -> PyResult<String> {
        expr::normalize(&self.dag).map(|r| r.to_string()).map_err(value_error)
    }

    fn substitute(&self, images: BTreeMap<String, Expr>) -> Expr {
        let map: BTreeMap<Symbol, ExprDag> = images.into_iter().map(|(k, v)| (Symbol::new(&k), v.dag)).collect();
        Expr { dag: expr::substitute(&self.dag, &map) }
    }

    fn __str__(&self) -> String {
        self.dag.to_infix()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.dag.to_infix())
    }
}

#[pyclass(module = "nondim", frozen, from_py_object)]
#[derive(Clone)]
struct Model {
    inner: odesys::Model,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        odesys::parse_model(text).map(|inner| Model { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(value_error)?;
        Model::parse(&text)
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn time(&self) -> String {
        self.inner.time().to_string()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states().iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn params(&self) -> Vec<String> {
        self.inner.params().iter().map(ToString::to_string).collect()
    }

    /// t, then the states, then the parameters.
    #[getter]
    fn coordinates(&self) -> Vec<String> {
        self.inner.coordinates().iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn rhs(&self) -> Vec<Expr> {
        self.inner.rhs().iter().map(|d| Expr { dag: d.clone() }).collect()
    }

    fn render(&self) -> String {
        self.inner.render()
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, states={:?}, params={:?})", self.inner.name(), self.states(), self.params())
    }
}

/// Verified exponent vectors over (t, states, params).
#[pyclass(module = "nondim", frozen, get_all)]
struct Symmetries {
    kind: String,
    coordinates: Vec<String>,
    generators: Vec<Vec<i64>>,
    operators: Vec<String>,
}

#[pymethods]
impl Symmetries {
    #[getter]
    fn m(&self) -> usize {
        self.generators.len()
    }

    fn __repr__(&self) -> String {
        format!("Symmetries(kind={:?}, m={}, generators={:?})", self.kind, self.generators.len(), self.generators)
    }
}

#[allow(clippy::too_many_arguments)]
fn config(seed: u64, bound: u64, trials: usize, backend: &str, jet_order: Option<usize>, lll: bool) -> PyResult<FindConfig> {
    let backend = match backend {
        "points" => Backend::Points,
        "series" => Backend::Series,
        _ => return Err(value_error(format!("backend must be 'points' or 'series', got {backend:?}"))),
    };
    Ok(FindConfig { seed, bound, trials, backend, jet_order, lll, ..FindConfig::default() })
}

#[pyfunction]
#[pyo3(signature = (model, kind="scale", seed=0, bound=65536, trials=8, backend="points", jet_order=None, lll=false))]
#[allow(clippy::too_many_arguments)]
fn find_symmetries(
    model: &Model,
    kind: &str,
    seed: u64,
    bound: u64,
    trials: usize,
    backend: &str,
    jet_order: Option<usize>,
    lll: bool,
) -> PyResult<Symmetries> {
    let cfg = config(seed, bound, trials, backend, jet_order, lll)?;
    let b = symfind::find_symmetries(&model.inner, kind_of(kind)?, &cfg).map_err(value_error)?;
    let generators = b
        .generators
        .iter()
        .map(|g| g.alpha.iter().map(|a| i64::try_from(a).map_err(value_error)).collect::<PyResult<Vec<_>>>())
        .collect::<PyResult<Vec<_>>>()?;
    Ok(Symmetries {
        kind: b.kind.to_string(),
        coordinates: b.coordinates.iter().map(ToString::to_string).collect(),
        operators: b.generators.iter().map(|g| g.describe(&b.coordinates)).collect(),
        generators,
    })
}

/// Condition rows of one specialization, as Fractions.
#[pyfunction]
#[pyo3(signature = (model, point, kind="scale"))]
fn condition_rows<'py>(py: Python<'py>, model: &Model, point: &Bound<'py, PyDict>, kind: &str) -> PyResult<Vec<Vec<Bound<'py, PyAny>>>> {
    let rows = symfind::condition_rows(&model.inner, kind_of(kind)?, &to_assignment(point)?).map_err(eval_error)?;
    rows.iter().map(|r| r.iter().map(|v| fraction(py, v)).collect()).collect()
}

#[pyclass(module = "nondim", frozen, get_all)]
struct Reduction {
    reduced: Model,
    total_m: usize,
    eliminated: Vec<String>,
    assumptions: Vec<String>,
    /// New coordinate name and its definition in the original coordinates.
    definitions: Vec<(String, String)>,
    passed: bool,
    report: String,
}

#[pymethods]
impl Reduction {
    fn __repr__(&self) -> String {
        format!("Reduction(total_m={}, passed={}, reduced={:?})", self.total_m, self.passed, self.reduced.inner.render())
    }
}

#[pyfunction]
#[pyo3(signature = (model, prefer=Vec::new(), seed=0, bound=65536, trials=8, backend="points", jet_order=None))]
fn reduce_system(
    model: &Model,
    prefer: Vec<String>,
    seed: u64,
    bound: u64,
    trials: usize,
    backend: &str,
    jet_order: Option<usize>,
) -> PyResult<Reduction> {
    let cfg = ReduceConfig { find: config(seed, bound, trials, backend, jet_order, false)?, ..ReduceConfig::default() };
    let prefer: Vec<Symbol> = prefer.iter().map(|s| Symbol::new(s)).collect();
    let r = reduce::reduce_system(&model.inner, &prefer, &cfg).map_err(value_error)?;
    Ok(Reduction {
        reduced: Model { inner: r.reduced.clone() },
        total_m: r.total_m,
        eliminated: r.eliminated.clone(),
        assumptions: r.assumptions.clone(),
        definitions: r
            .stages
            .iter()
            .flat_map(|s| s.definitions.iter().map(|(n, d)| (n.to_string(), d.clone())))
            .collect(),
        passed: r.check.passed(),
        report: reduce::report_json(&r).to_string(),
    })
}

#[pymodule]
fn nondim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expr>()?;
    m.add_class::<Model>()?;
    m.add_class::<Symmetries>()?;
    m.add_class::<Reduction>()?;
    m.add_function(wrap_pyfunction!(find_symmetries, m)?)?;
    m.add_function(wrap_pyfunction!(condition_rows, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_system, m)?)?;
    Ok(())
}
