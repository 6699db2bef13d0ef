//! Python bindings. Reports cross the boundary as plain dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pathcheck::cli::{self, DemoName, HomExample, HomQuery, Report, RunConfig};
use pathcheck::groupoid::{arrow_groupoid, classify, codiscrete, cyclic_group, discrete, FinGroupoid, GroupoidJson};
use pathcheck::kernel::{Kernel, KernelMode};
use pathcheck::semantics::SemEnv;
use pathcheck::syntax;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn config(extensional: bool, strict_j: bool, seed: u64) -> RunConfig {
    RunConfig { extensional, strict_j, seed, ..RunConfig::default() }
}

/// A parsed program: signature plus goals.
#[pyclass(module = "pathcheck", frozen)]
pub struct Program {
    inner: syntax::Program,
}

#[pymethods]
impl Program {
    #[getter]
    fn declarations(&self) -> Vec<String> {
        self.inner.signature.decls.iter().map(|d| d.to_string()).collect()
    }

    #[getter]
    fn goals(&self) -> Vec<String> {
        self.inner.goals.iter().map(|g| g.judgement.to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.goals.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Program({} declarations, {} goals)", self.inner.signature.decls.len(), self.inner.goals.len())
    }
}

/// Kernel verdict for one goal.
#[pyclass(module = "pathcheck", frozen, get_all)]
pub struct Verdict {
    goal: String,
    accepted: bool,
    reason: Option<String>,
    trace: Vec<(String, String)>,
}

#[pymethods]
impl Verdict {
    fn __bool__(&self) -> bool {
        self.accepted
    }

    fn __repr__(&self) -> String {
        match &self.reason {
            None => format!("Verdict(accepted, {:?})", self.goal),
            Some(r) => format!("Verdict(rejected, {:?}: {r})", self.goal),
        }
    }
}

/// A finite groupoid given by its composition table.
#[pyclass(module = "pathcheck", frozen)]
pub struct Groupoid {
    inner: Arc<FinGroupoid>,
}

#[pymethods]
impl Groupoid {
    #[staticmethod]
    fn interval() -> Groupoid {
        Groupoid { inner: Arc::new(codiscrete(2)) }
    }

    #[staticmethod]
    fn discrete(n: usize) -> Groupoid {
        Groupoid { inner: Arc::new(discrete(n)) }
    }

    #[staticmethod]
    fn codiscrete(n: usize) -> Groupoid {
        Groupoid { inner: Arc::new(codiscrete(n)) }
    }

    #[staticmethod]
    fn cyclic(k: usize) -> PyResult<Groupoid> {
        if k == 0 {
            return Err(value_err("cyclic group of order 0"));
        }
        Ok(Groupoid { inner: Arc::new(cyclic_group(k)) })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Groupoid> {
        let j: GroupoidJson = serde_json::from_str(text).map_err(value_err)?;
        Ok(Groupoid { inner: Arc::new(j.validate().map_err(value_err)?) })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.to_json()).unwrap()
    }

    #[getter]
    fn objects(&self) -> usize {
        self.inner.object_count()
    }

    #[getter]
    fn morphisms(&self) -> usize {
        self.inner.morphism_count()
    }

    /// The arrow groupoid `G^I`, with the factorization of the diagonal checked.
    fn path_object(&self) -> (Groupoid, bool) {
        let po = arrow_groupoid(&self.inner);
        let ok = classify(&po.r).acyclic_cofibration && classify(&po.p).fibration;
        (Groupoid { inner: po.total().clone() }, ok)
    }

    fn __eq__(&self, other: &Groupoid) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Groupoid({} objects, {} morphisms)", self.objects(), self.morphisms())
    }
}

#[pyfunction]
fn parse(source: &str) -> PyResult<Program> {
    syntax::parse(source).map(|inner| Program { inner }).map_err(value_err)
}

/// Kernel verdicts for every goal of `source`.
#[pyfunction]
#[pyo3(signature = (source, extensional = false, strict_j = false))]
fn check(source: &str, extensional: bool, strict_j: bool) -> PyResult<Vec<Verdict>> {
    let prog = syntax::parse(source).map_err(value_err)?;
    let k = Kernel::new(&prog.signature, KernelMode { extensional, strict_j });
    Ok(prog
        .goals
        .iter()
        .zip(k.check_program(&prog.goals))
        .map(|(g, v)| Verdict {
            goal: g.judgement.to_string(),
            accepted: v.accepted,
            reason: v.reason,
            trace: v.trace.into_iter().map(|s| (s.rule, s.judgement)).collect(),
        })
        .collect())
}

/// Same report as `pathcheck --json check FILE...`.
#[pyfunction]
#[pyo3(signature = (*files, extensional = false, strict_j = false))]
fn check_files<'py>(py: Python<'py>, files: Vec<PathBuf>, extensional: bool, strict_j: bool) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &cli::cmd_check(&files, &config(extensional, strict_j, 0)).to_json())
}

/// Interprets the goals of `source` in a built-in environment.
#[pyfunction]
#[pyo3(signature = (source, preset = "interval", extensional = false))]
fn interpret<'py>(py: Python<'py>, source: &str, preset: &str, extensional: bool) -> PyResult<Bound<'py, PyAny>> {
    let prog = syntax::parse(source).map_err(value_err)?;
    let env = SemEnv::preset(preset, &prog.signature).map_err(value_err)?;
    let goals = cli::interpret_program(&prog, env, &config(extensional, false, 0));
    to_py(py, &Report::new(goals).to_json())
}

#[pyfunction]
#[pyo3(signature = (name, seed = 0))]
fn demo<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let d = match name {
        "countermodel" => DemoName::Countermodel,
        "extensional-set" => DemoName::ExtensionalSet,
        "coherence" => DemoName::Coherence,
        "wfs" => DemoName::Wfs,
        other => return Err(value_err(format!("unknown demo {other:?}"))),
    };
    to_py(py, &cli::cmd_demo(d, &config(false, false, seed)).to_json())
}

/// Answers a model-structure query given as JSON text, or a named example.
#[pyfunction]
#[pyo3(signature = (query = None, example = None))]
fn hom<'py>(py: Python<'py>, query: Option<&str>, example: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let q: HomQuery = match (query, example) {
        (Some(text), None) => serde_json::from_str(text).map_err(value_err)?,
        (None, Some(ex)) => cli::example_query(match ex {
            "lift-interval" => HomExample::LiftInterval,
            "factor-diagonal" => HomExample::FactorDiagonal,
            "classify-diagonal" => HomExample::ClassifyDiagonal,
            "path-object-interval" => HomExample::PathObjectInterval,
            other => return Err(value_err(format!("unknown example {other:?}"))),
        }),
        _ => return Err(value_err("give exactly one of query or example")),
    };
    let report = Report::new(vec![cli::answer(&q, &RunConfig::default())]);
    to_py(py, &report.to_json())
}

#[pyfunction]
fn read_program(path: PathBuf) -> PyResult<Program> {
    let src = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    parse(&src)
}

#[pymodule(name = "pathcheck")]
fn pathcheck_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Program>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Groupoid>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(read_program, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(check_files, m)?)?;
    m.add_function(wrap_pyfunction!(interpret, m)?)?;
    m.add_function(wrap_pyfunction!(demo, m)?)?;
    m.add_function(wrap_pyfunction!(hom, m)?)?;
    Ok(())
}
