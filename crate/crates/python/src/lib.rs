//! Python bindings: load a domain, run value iteration, query values.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use xadd_sdp::cli::parse_assignments;
use xadd_sdp::domlang::parse_constant;
use xadd_sdp::sdp::{self, SolveOptions, SolveResult};
use xadd_sdp::{Domain, Rational, State, VarKind};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, r: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((r.to_string(),))
}

/// A parsed domain together with its most recent solution.
#[pyclass(module = "pyxadd")]
struct Model {
    domain: Domain,
    result: Option<SolveResult>,
}

impl Model {
    fn solved(&self) -> PyResult<&SolveResult> {
        self.result
            .as_ref()
            .ok_or_else(|| value_error("call solve() first"))
    }

    /// Accepts bools for boolean variables and anything `Fraction()`
    /// understands (int, float, str, Fraction) for continuous ones.
    fn state(&self, py: Python<'_>, values: &Bound<'_, PyDict>) -> PyResult<State> {
        let vocab = self.domain.store.vocab();
        let to_fraction = py.import("fractions")?.getattr("Fraction")?;
        let mut pairs = Vec::new();
        for (k, v) in values.iter() {
            let name: String = k.extract()?;
            let var = vocab
                .get(&name)
                .ok_or_else(|| PyKeyError::new_err(format!("unknown variable `{name}`")))?;
            let text = if vocab.kind(var) == VarKind::Boolean {
                v.is_truthy()?.to_string()
            } else {
                to_fraction.call1((v,))?.str()?.to_string()
            };
            pairs.push(format!("{name}={text}"));
        }
        parse_assignments(vocab, pairs.iter().map(String::as_str)).map_err(value_error)
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let domain = Domain::parse(text).map_err(value_error)?;
        Ok(Model { domain, result: None })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let domain = Domain::load(&path).map_err(value_error)?;
        Ok(Model { domain, result: None })
    }

    #[getter]
    fn name(&self) -> String {
        self.domain.mdp.name.clone()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.domain.mdp.action_names()
    }

    #[getter]
    fn variables(&self) -> Vec<(String, String)> {
        let vocab = self.domain.store.vocab();
        vocab
            .state_vars()
            .map(|v| (vocab.name(v).to_string(), vocab.kind(v).to_string()))
            .collect()
    }

    #[getter]
    fn discount<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.domain.mdp.discount)
    }

    #[setter]
    fn set_discount(&mut self, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = value.str()?.to_string();
        let gamma = parse_constant(&text).map_err(value_error)?;
        self.domain.mdp.discount = gamma;
        self.result = None;
        Ok(())
    }

    /// Runs value iteration; returns one stats dict per computed horizon.
    #[pyo3(signature = (horizon, prune = false))]
    fn solve<'py>(&mut self, py: Python<'py>, horizon: u32, prune: bool) -> PyResult<Bound<'py, PyList>> {
        let opts = SolveOptions { horizon, prune, ..Default::default() };
        let result =
            sdp::solve(&mut self.domain.store, &self.domain.mdp, &opts).map_err(value_error)?;
        let rows = PyList::empty(py);
        for (h, it) in result.iterations.iter().enumerate() {
            let row = PyDict::new(py);
            row.set_item("iter", h)?;
            row.set_item("nodes", it.stats.nodes)?;
            row.set_item("leaves", it.stats.leaves)?;
            row.set_item("decisions", it.stats.decisions)?;
            row.set_item("time_ms", it.elapsed.as_secs_f64() * 1000.0)?;
            rows.append(row)?;
        }
        self.result = Some(result);
        Ok(rows)
    }

    #[getter]
    fn converged_at(&self) -> Option<u32> {
        self.result.as_ref().and_then(|r| r.converged_at)
    }

    /// Exact `V^h(state)` as a `fractions.Fraction`.
    fn value<'py>(&self, py: Python<'py>, h: u32, state: &Bound<'_, PyDict>) -> PyResult<Bound<'py, PyAny>> {
        let s = self.state(py, state)?;
        let r = self.solved()?;
        let v = sdp::value_at(&self.domain.store, &self.domain.mdp, r, h, &s).map_err(value_error)?;
        fraction(py, &v)
    }

    /// Greedy action at horizon `h`.
    fn policy(&self, py: Python<'_>, h: u32, state: &Bound<'_, PyDict>) -> PyResult<String> {
        let s = self.state(py, state)?;
        let r = self.solved()?;
        let (name, _) =
            sdp::policy_at(&self.domain.store, &self.domain.mdp, r, h, &s).map_err(value_error)?;
        Ok(name)
    }

    /// `V^h` as `conditions : value` lines.
    fn to_case(&self, h: u32) -> PyResult<String> {
        let v = self.solved()?.value(h).map_err(value_error)?;
        Ok(self.domain.store.to_case(v))
    }

    fn to_dot(&self, h: u32) -> PyResult<String> {
        let v = self.solved()?.value(h).map_err(value_error)?;
        Ok(self.domain.store.export_dot(v))
    }

    fn serialize(&self) -> String {
        xadd_sdp::serialize_domain(&self.domain)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(name={:?}, actions={:?})",
            self.domain.mdp.name,
            self.domain.mdp.action_names()
        )
    }
}

#[pymodule]
fn pyxadd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    Ok(())
}
