//! Python bindings: instances, solving, exact enumeration, evaluation and
//! feasibility checks.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use rezone_core::constraints::check_feasible as core_check_feasible;
use rezone_core::eval::evaluate as core_evaluate;
use rezone_core::instance::{load_instance, ConstraintConfig, InstancePaths, SchoolId, UnitId, Zoning};
use rezone_core::objectives::{Objective, ObjectiveConfig};
use rezone_core::solver::{enumerate_optimal as core_enumerate, solve as core_solve, SolveResult, SolverParams};
use rezone_core::synth::{generate, SynthParams};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_zoning(map: BTreeMap<u32, u32>) -> Zoning {
    Zoning::new(map.into_iter().map(|(u, s)| (UnitId(u), SchoolId(s))).collect())
}

fn from_zoning(z: &Zoning) -> BTreeMap<u32, u32> {
    z.assignment.iter().map(|(u, s)| (u.0, s.0)).collect()
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

/// A school district: schools, planning units, students and adjacency.
#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: rezone_core::instance::Instance,
}

#[pymethods]
impl PyInstance {
    /// Loads the CSV/GeoJSON instance files from a directory.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let inner = load_instance(&InstancePaths::in_dir(&dir), &ConstraintConfig::default()).map_err(err)?;
        Ok(Self { inner })
    }

    /// Generates a synthetic grid district.
    #[staticmethod]
    #[pyo3(signature = (rows=10, cols=10, levels=vec![1], schools_per_level=vec![4], clustering=0.5, group_share=0.3, seed=0))]
    fn synth(
        rows: usize,
        cols: usize,
        levels: Vec<u32>,
        schools_per_level: Vec<usize>,
        clustering: f64,
        group_share: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let p = SynthParams {
            rows,
            cols,
            levels,
            schools_per_level,
            clustering,
            group_share,
            seed,
            ..SynthParams::default()
        };
        let inner = generate(&p, &ConstraintConfig::default()).map_err(err)?;
        Ok(Self { inner })
    }

    /// The four-unit, two-school reference district.
    #[staticmethod]
    fn tiny1() -> Self {
        Self {
            inner: rezone_core::fixtures::tiny1(&ConstraintConfig::default()),
        }
    }

    #[getter]
    fn levels(&self) -> Vec<u32> {
        self.inner.levels().levels().to_vec()
    }

    #[getter]
    fn num_units(&self) -> usize {
        self.inner.units().len()
    }

    #[getter]
    fn num_schools(&self) -> usize {
        self.inner.schools().len()
    }

    #[getter]
    fn num_students(&self) -> usize {
        self.inner.students().len()
    }

    /// Current zoning as `{unit_id: school_id}`.
    fn status_quo(&self) -> BTreeMap<u32, u32> {
        from_zoning(self.inner.sq_zoning())
    }

    /// Writes the instance files to `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        rezone_core::instance::write_instance_files(&self.inner, &dir).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(levels={:?}, units={}, schools={}, students={})",
            self.levels(),
            self.num_units(),
            self.num_schools(),
            self.num_students()
        )
    }
}

/// Selected objectives with calibration factors and constraint toggles.
#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: ObjectiveConfig,
}

#[pymethods]
impl PyConfig {
    /// `calibrations` maps `(level, objective)` to its scale factor.
    #[new]
    #[pyo3(signature = (
        objectives,
        *,
        dissimilarity_bound=false,
        feeder_no_increase=false,
        capacity=true,
        contiguity=true,
        travel=true,
        margin=None,
        epsilon=None,
        calibrations=None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        objectives: Vec<String>,
        dissimilarity_bound: bool,
        feeder_no_increase: bool,
        capacity: bool,
        contiguity: bool,
        travel: bool,
        margin: Option<f64>,
        epsilon: Option<u64>,
        calibrations: Option<BTreeMap<(u32, String), f64>>,
    ) -> PyResult<Self> {
        let selected = objectives
            .iter()
            .map(|o| o.parse::<Objective>().map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        let defaults = ConstraintConfig::default();
        let constraints = ConstraintConfig {
            enforce_dissimilarity_bound: dissimilarity_bound,
            enforce_feeder_no_increase: feeder_no_increase,
            enforce_capacity: capacity,
            enforce_contiguity: contiguity,
            enforce_travel: travel,
            lambda: margin.unwrap_or(defaults.lambda),
            epsilon: epsilon.unwrap_or(defaults.epsilon),
            ..defaults
        };
        let mut inner = ObjectiveConfig::new(selected, constraints);
        for ((level, obj), b) in calibrations.unwrap_or_default() {
            inner.calibrations.insert((level, obj.parse().map_err(err)?), b);
        }
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn objectives(&self) -> Vec<String> {
        self.inner.selected.iter().map(|o| o.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Config({:?})", self.objectives())
    }
}

/// Outcome of a search or an exhaustive enumeration.
#[pyclass(name = "SolveResult", frozen)]
struct PySolveResult {
    inner: SolveResult,
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective()
    }

    #[getter]
    fn sq_objective(&self) -> f64 {
        self.inner.sq_objective
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter]
    fn proven_optimal(&self) -> bool {
        self.inner.proven_optimal
    }

    #[getter]
    fn zoning(&self) -> BTreeMap<u32, u32> {
        from_zoning(&self.inner.best_zoning)
    }

    /// Best-objective improvements as `(iteration, objective)` pairs.
    #[getter]
    fn trace(&self) -> Vec<(u64, f64)> {
        self.inner.trace.iter().map(|t| (t.iteration, t.objective)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(objective={}, sq_objective={}, proven_optimal={})",
            self.inner.objective(),
            self.inner.sq_objective,
            self.inner.proven_optimal
        )
    }
}

/// Simulated-annealing search from the status quo.
#[pyfunction]
#[pyo3(signature = (instance, config, *, seed=0, max_iterations=None, time_limit=None))]
fn solve(
    py: Python<'_>,
    instance: &PyInstance,
    config: &PyConfig,
    seed: u64,
    max_iterations: Option<u64>,
    time_limit: Option<f64>,
) -> PyResult<PySolveResult> {
    let mut params = SolverParams::default().with_seed(seed);
    if let Some(n) = max_iterations {
        params.max_iterations = n;
    }
    if let Some(t) = time_limit {
        params.time_limit = t;
    }
    let inner = py
        .detach(|| core_solve(&instance.inner, &config.inner, &params))
        .map_err(err)?;
    Ok(PySolveResult { inner })
}

/// Exhaustive search over all candidate zonings of a small instance.
#[pyfunction]
fn enumerate_optimal(py: Python<'_>, instance: &PyInstance, config: &PyConfig) -> PyResult<PySolveResult> {
    let inner = py
        .detach(|| core_enumerate(&instance.inner, &config.inner))
        .map_err(err)?;
    Ok(PySolveResult { inner })
}

/// Per-level metrics as a flat dict keyed `level{l}.{metric}`.
#[pyfunction]
#[pyo3(signature = (instance, zoning, config=None))]
fn evaluate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    zoning: BTreeMap<u32, u32>,
    config: Option<&PyConfig>,
) -> PyResult<Bound<'py, PyAny>> {
    let default = ObjectiveConfig::default();
    let cfg = config.map_or(&default, |c| &c.inner);
    let report = core_evaluate(&to_zoning(zoning), &instance.inner, cfg).map_err(err)?;
    json_to_py(py, &report.to_flat_json())
}

/// Constraint violations as `(family, entity, value, bound)` tuples; empty
/// when the zoning is feasible.
#[pyfunction]
fn check_feasible(
    instance: &PyInstance,
    zoning: BTreeMap<u32, u32>,
    config: &PyConfig,
) -> PyResult<Vec<(String, String, f64, f64)>> {
    let report = core_check_feasible(&to_zoning(zoning), &instance.inner, &config.inner).map_err(err)?;
    Ok(report.rows())
}

#[pymodule]
#[pyo3(name = "rezone")]
fn rezone_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(check_feasible, m)?)?;
    Ok(())
}
