//! Python bindings: coefficients, operator matrices, single kinetic/fluid
//! runs and the config-driven harness.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use vmb_core::harness::run::{fluid_params, run as run_harness, run_fluid, run_kinetic, Setup, FLUID_COLUMNS};
use vmb_core::harness::{parse_config as parse_toml, ExperimentConfig, Mode};
use vmb_core::VmbError;

fn py_err(e: VmbError) -> PyErr {
    match e {
        VmbError::Config(_) | VmbError::Argument(_) | VmbError::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(a) => {
            let l = PyList::empty(py);
            for x in a {
                l.append(to_py(py, x)?)?;
            }
            Ok(l.into_any())
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            Ok(d.into_any())
        }
    }
}

fn json<T: serde::Serialize>(x: &T) -> PyResult<Value> {
    serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn rows<'py>(py: Python<'py>, header: &[&str], data: &[Vec<f64>]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (i, h) in header.iter().enumerate() {
        let col: Vec<f64> = data.iter().map(|r| r[i]).collect();
        d.set_item(*h, col)?;
    }
    Ok(d)
}

/// Hard-sphere collision frequency ν(v).
#[pyfunction]
fn collision_frequency(v: [f64; 3]) -> f64 {
    vmb_core::collision::collision_frequency(v)
}

/// Validate a TOML experiment file; returns the resolved config and the
/// fields that were filled from defaults.
#[pyfunction]
fn parse_config<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let r = parse_toml(text).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("config", to_py(py, &json(&r.config)?)?)?;
    d.set_item("toml", r.config.to_toml())?;
    d.set_item("defaulted", r.defaulted)?;
    Ok(d)
}

/// Run a full experiment from TOML text. Returns (passed, summary).
#[pyfunction]
#[pyo3(signature = (text, out=None))]
fn run_experiment<'py>(py: Python<'py>, text: &str, out: Option<std::path::PathBuf>) -> PyResult<(bool, Bound<'py, PyAny>)> {
    let mut r = parse_toml(text).map_err(py_err)?;
    if let Some(o) = out {
        r.config.out = o;
    }
    let o = py.detach(|| run_harness(&r)).map_err(py_err)?;
    Ok((o.passed, to_py(py, &o.summary)?))
}

/// Velocity basis, collision operators and transport solutions at one order.
#[pyclass(frozen, name = "Model")]
struct PyModel {
    setup: Setup,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(py: Python<'_>, order: usize) -> PyResult<Self> {
        let setup = py.detach(|| Setup::build(order)).map_err(py_err)?;
        Ok(PyModel { setup })
    }

    #[getter]
    fn order(&self) -> usize {
        self.setup.basis.order
    }

    /// Number of single-species basis functions.
    #[getter]
    fn basis_size(&self) -> usize {
        self.setup.basis.size
    }

    /// μ, κ, σ, λ and isotropy defects.
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &json(&self.setup.report)?)
    }

    fn spectral_gap(&self) -> f64 {
        self.setup.ops.spectral_gap(&self.setup.basis)
    }

    /// "l_single", "frak_l", "l_two", "nu" or "gram", as nested lists.
    fn matrix(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        let o = &self.setup.ops;
        let m = match name {
            "l_single" => o.l_single.clone(),
            "frak_l" => o.frak_l.clone(),
            "l_two" => o.l_two.clone(),
            "nu" => o.nu_matrix.clone(),
            "gram" => self.setup.basis.gram(),
            _ => return Err(PyValueError::new_err(format!("unknown matrix '{name}'"))),
        };
        Ok(m.row_iter().map(|r| r.iter().cloned().collect()).collect())
    }

    /// Γ(g, h) on two-species coefficient vectors of length 2·basis_size.
    fn gamma(&self, g: Vec<f64>, h: Vec<f64>) -> PyResult<Vec<f64>> {
        let n = 2 * self.setup.basis.size;
        if g.len() != n || h.len() != n {
            return Err(PyValueError::new_err(format!("vectors must have length {n}")));
        }
        let g = nalgebra_vec(g);
        let h = nalgebra_vec(h);
        Ok(self.setup.ops.apply_gamma(&g, &h).iter().cloned().collect())
    }

    /// One kinetic run; returns the summary and the moment columns at each snapshot.
    #[pyo3(signature = (eps, modes=32, dim=1, dt=0.01, t_end=1.0, cadence=10, profile="shear-wave", amplitude=1e-2))]
    #[allow(clippy::too_many_arguments)]
    fn kinetic<'py>(
        &self,
        py: Python<'py>,
        eps: f64,
        modes: usize,
        dim: usize,
        dt: f64,
        t_end: f64,
        cadence: usize,
        profile: &str,
        amplitude: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config(Mode::SimulateKinetic, self.order(), eps, modes, dim, dt, t_end, cadence, profile, amplitude)?;
        let run = py.detach(|| run_kinetic(&self.setup, &cfg, eps)).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("summary", to_py(py, &json(&run.summary)?)?)?;
        let data: Vec<Vec<f64>> = run.records.iter().map(|r| r.row()).collect();
        d.set_item("records", rows(py, &vmb_core::diagnostics::MomentRecord::header(), &data)?)?;
        Ok(d)
    }

    /// Fluid run with this model's coefficients (two-species convention).
    #[pyo3(signature = (modes=32, dim=1, dt=0.01, t_end=1.0, cadence=10, profile="shear-wave", amplitude=1e-2))]
    #[allow(clippy::too_many_arguments)]
    fn fluid<'py>(
        &self,
        py: Python<'py>,
        modes: usize,
        dim: usize,
        dt: f64,
        t_end: f64,
        cadence: usize,
        profile: &str,
        amplitude: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config(Mode::SimulateFluid, self.order(), 1.0, modes, dim, dt, t_end, cadence, profile, amplitude)?;
        let params = fluid_params(&cfg, &self.setup.report);
        let run = py.detach(|| run_fluid(&cfg, params)).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("summary", to_py(py, &json(&run.summary)?)?)?;
        d.set_item("records", rows(py, &FLUID_COLUMNS, &run.rows)?)?;
        Ok(d)
    }
}

fn nalgebra_vec(v: Vec<f64>) -> vmb_core::velocity::TwoSpeciesVector {
    vmb_core::velocity::TwoSpeciesVector::from_vec(v)
}

#[allow(clippy::too_many_arguments)]
fn config(
    mode: Mode,
    order: usize,
    eps: f64,
    modes: usize,
    dim: usize,
    dt: f64,
    t_end: f64,
    cadence: usize,
    profile: &str,
    amplitude: f64,
) -> PyResult<ExperimentConfig> {
    let mut c = ExperimentConfig::for_mode(mode);
    c.basis.order = order;
    c.physics.eps = vec![eps];
    c.grid.modes = modes;
    c.grid.dim = dim;
    c.time.dt = dt;
    c.time.t_end = t_end;
    c.time.cadence = cadence;
    c.seed.amplitude = amplitude;
    c.seed.profile = serde_json::from_value(Value::String(profile.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown seed profile '{profile}'")))?;
    // round-trip through the parser for validation
    Ok(parse_toml(&c.to_toml()).map_err(py_err)?.config)
}

#[pymodule]
pub fn vmb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(collision_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
