use std::collections::BTreeMap;

use helpkit::grpdata::{self, GroupData};
use helpkit::help::{self, HelpConfig, PartialAugmentationSystem};
use helpkit::lattice::{self, Rep};
use helpkit::modalg::{self, FactSet};
use helpkit::report::{self, Branch, RunConfig, Task};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn json<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Character table data of a group.
#[pyclass(name = "Group", module = "pyhelpkit", frozen)]
struct PyGroup {
    inner: GroupData,
}

#[pymethods]
impl PyGroup {
    /// Loads a bundled group by name or a group file by path.
    #[staticmethod]
    fn load(spec: &str) -> PyResult<Self> {
        Ok(PyGroup { inner: grpdata::load(spec).map_err(err)? })
    }

    #[staticmethod]
    fn bundled_names() -> Vec<&'static str> {
        grpdata::bundled_names()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn order(&self) -> u64 {
        self.inner.order
    }

    #[getter]
    fn classes(&self) -> Vec<(String, u64)> {
        self.inner.classes.iter().map(|c| (c.name.clone(), c.order)).collect()
    }

    #[getter]
    fn characters(&self) -> Vec<String> {
        self.inner.characters().map(|f| f.name.clone()).collect()
    }

    /// Value of a character on a class, as text.
    fn value(&self, character: &str, class: &str) -> PyResult<Option<String>> {
        let f = self
            .inner
            .character(character)
            .ok_or_else(|| PyValueError::new_err(format!("unknown character {character}")))?;
        Ok(f.value(class).map(|v| v.to_string()))
    }

    /// `(plus, minus)` dimensions at an involution class.
    fn plus_minus_dims(&self, character: &str, involution_class: &str) -> PyResult<(u64, u64)> {
        let f = self
            .inner
            .character(character)
            .ok_or_else(|| PyValueError::new_err(format!("unknown character {character}")))?;
        modalg::plus_minus_dims(f, involution_class).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Group({:?}, order={}, classes={})", self.inner.name, self.inner.order, self.inner.classes.len())
    }
}

/// Partial augmentations of a unit and of its powers.
#[pyclass(name = "System", module = "pyhelpkit", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PySystem {
    inner: PartialAugmentationSystem,
}

#[pymethods]
impl PySystem {
    /// The system of a group element of the given class.
    #[staticmethod]
    fn trivial(group: &PyGroup, class: &str) -> PyResult<Self> {
        Ok(PySystem { inner: PartialAugmentationSystem::trivial(&group.inner, class).map_err(err)? })
    }

    /// A system of order `n` from `ε(u)` and the classes of `u^p`.
    #[staticmethod]
    fn from_parts(
        group: &PyGroup,
        n: u64,
        epsilon: BTreeMap<String, i64>,
        powers: BTreeMap<u64, String>,
    ) -> PyResult<Self> {
        let mut parts = BTreeMap::new();
        for (p, c) in powers {
            parts.insert(p, PartialAugmentationSystem::trivial(&group.inner, &c).map_err(err)?);
        }
        Ok(PySystem { inner: PartialAugmentationSystem::from_parts(n, epsilon, &parts).map_err(err)? })
    }

    #[getter]
    fn unit_order(&self) -> u64 {
        self.inner.unit_order
    }

    /// Nonzero `ε(u)`.
    #[getter]
    fn epsilon(&self) -> BTreeMap<String, i64> {
        self.inner.slot(1)
    }

    #[getter]
    fn powers(&self) -> BTreeMap<u64, String> {
        self.inner.powers.clone()
    }

    fn is_trivial(&self) -> bool {
        self.inner.is_trivial()
    }

    fn __repr__(&self) -> String {
        format!("System({})", self.inner)
    }
}

/// Surviving systems of order `n`.
#[pyfunction]
#[pyo3(signature = (group, n, characters=None))]
fn enumerate(group: &PyGroup, n: u64, characters: Option<Vec<String>>) -> PyResult<Vec<PySystem>> {
    let cfg = HelpConfig { characters: characters.unwrap_or_default(), ..Default::default() };
    let e = help::enumerate(&group.inner, n, &cfg).map_err(err)?;
    Ok(e.systems().iter().map(|s| PySystem { inner: s.clone() }).collect())
}

/// Eigenvalue multiplicities `μ_l` as rational strings.
#[pyfunction]
fn multiplicities(group: &PyGroup, character: &str, system: &PySystem) -> PyResult<Vec<String>> {
    let f = group
        .inner
        .character(character)
        .ok_or_else(|| PyValueError::new_err(format!("unknown character {character}")))?;
    let m = help::multiplicities(f, &system.inner).map_err(err)?;
    Ok(m.mult.iter().map(|q| q.to_string()).collect())
}

/// Lattice obstruction report for a unit of order `p·m`.
#[pyfunction]
fn obstruction_check<'py>(
    py: Python<'py>,
    group: &PyGroup,
    system: &PySystem,
    p: u64,
    m: u64,
    rep_a: &str,
    rep_b: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let a = Rep::from_group(&group.inner, rep_a).map_err(err)?;
    let b = Rep::from_group(&group.inner, rep_b).map_err(err)?;
    let r = lattice::obstruction_check(&group.inner, &system.inner, p, m, &a, &b).map_err(err)?;
    json(py, &r)
}

/// Module derivation for a unit of order `2p` of the fact set's base group.
#[pyfunction]
fn derive_order6<'py>(py: Python<'py>, facts: &str, system: &PySystem, target: &str) -> PyResult<Bound<'py, PyAny>> {
    let fs = FactSet::parse(&grpdata::load_text(facts).map_err(err)?).map_err(err)?;
    let base = grpdata::load(&fs.base_group).map_err(err)?;
    let mut groups = BTreeMap::new();
    for n in fs.referenced_groups() {
        groups.insert(n.clone(), grpdata::load(&n).map_err(err)?);
    }
    let d = modalg::derive_order6(&fs, &base, &groups, &system.inner, target).map_err(err)?;
    json(py, &d)
}

/// Whether `0 → M_μ → M_λ → M_ν → 0` exists.
#[pyfunction]
fn ses_feasible(lam: Vec<u64>, mu: Vec<u64>, nu: Vec<u64>) -> PyResult<bool> {
    modalg::ses_feasible(&lam, &mu, &nu).map_err(err)
}

/// Runs a task as the command line does; returns `(exit_code, report)`.
#[pyfunction]
#[pyo3(signature = (task, group, orders=None, pair=None, characters=None, facts=None, lattice_pair=None, branch=None, mu_tables=false))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    task: &str,
    group: &str,
    orders: Option<Vec<u64>>,
    pair: Option<(u64, u64)>,
    characters: Option<Vec<String>>,
    facts: Option<String>,
    lattice_pair: Option<(String, String)>,
    branch: Option<String>,
    mu_tables: bool,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let task = match task {
        "help" => Task::Help,
        "zc" => Task::Zc,
        "pq" => Task::Pq,
        "lattice-check" => Task::LatticeCheck,
        "order6-derive" => Task::Order6Derive,
        other => return Err(PyValueError::new_err(format!("unknown task {other}"))),
    };
    let mut cfg = RunConfig::new(group, task);
    cfg.orders = orders.unwrap_or_default();
    cfg.pair = pair;
    cfg.characters = characters.unwrap_or_default();
    cfg.facts = facts;
    cfg.lattice_pair = lattice_pair;
    cfg.branch = match branch {
        None => Branch::All,
        Some(b) if b == "all" => Branch::All,
        Some(b) => Branch::Class(b),
    };
    cfg.mu_tables = mu_tables;
    let r = report::run(&cfg).map_err(err)?;
    Ok((r.exit_code(), json(py, &r.deterministic_json())?))
}

#[pymodule]
fn pyhelpkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", report::VERSION)?;
    m.add_class::<PyGroup>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(multiplicities, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction_check, m)?)?;
    m.add_function(wrap_pyfunction!(derive_order6, m)?)?;
    m.add_function(wrap_pyfunction!(ses_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
