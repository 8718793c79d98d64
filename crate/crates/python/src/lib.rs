//! Python bindings. Fields cross the boundary as flat lists of node values
//! in row-major order (`index = j * (nx + 1) + i`); vector fields are pairs
//! of such lists. Structured results come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use ptns_core::config::RunConfig;
use ptns_core::estimates::scan_elliptic_estimates;
use ptns_core::grid::{self, bmo_norm, default_radii, Grid, NormKind, ScalarField, VectorField};
use ptns_core::lame::{self, Viscosity};
use ptns_core::march;
use ptns_core::momentum::{self, PhysParams};
use ptns_core::picard::{self, State, WindowConfig};

create_exception!(ptns, PtnsError, PyException);

fn err(e: ptns_core::Error) -> PyErr {
    PtnsError::new_err(e.to_string())
}

/// Serialises through JSON so nested results arrive as dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PtnsError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Grid", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyGrid(Grid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny, lx = 1.0, ly = 1.0))]
    fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> PyResult<Self> {
        Grid::new(nx, ny, lx, ly).map(PyGrid).map_err(err)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx()
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    /// Node coordinates as two flat lists.
    fn coords(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.0.node_count())
            .map(|k| {
                let (i, j) = self.0.ij(k);
                (self.0.x(i), self.0.y(j))
            })
            .unzip()
    }

    fn weights(&self) -> Vec<f64> {
        self.0.weights()
    }

    fn __repr__(&self) -> String {
        format!("Grid(nx={}, ny={}, lx={}, ly={})", self.0.nx(), self.0.ny(), self.0.lx(), self.0.ly())
    }
}

fn scalar(g: &PyGrid, v: Vec<f64>) -> PyResult<ScalarField> {
    ScalarField::new(g.0, v).map_err(err)
}

fn vector(g: &PyGrid, x: Vec<f64>, y: Vec<f64>) -> PyResult<VectorField> {
    VectorField::new(g.0, x, y).map_err(err)
}

fn pair(v: VectorField) -> (Vec<f64>, Vec<f64>) {
    (v.xs().to_vec(), v.ys().to_vec())
}

#[pyfunction]
fn grad(g: &PyGrid, f: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    Ok(pair(grid::grad(&scalar(g, f)?)))
}

#[pyfunction]
fn div(g: &PyGrid, ux: Vec<f64>, uy: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(grid::div(&vector(g, ux, uy)?).into_values())
}

#[pyfunction]
fn laplacian(g: &PyGrid, f: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(grid::laplacian(&scalar(g, f)?).into_values())
}

/// `kind` is `"inf"` or a number `q >= 1`.
#[pyfunction]
fn norm(g: &PyGrid, f: Vec<f64>, kind: &Bound<'_, PyAny>) -> PyResult<f64> {
    let kind = match kind.extract::<f64>() {
        Ok(q) => NormKind::Lq(q),
        Err(_) if kind.extract::<String>()? == "inf" => NormKind::Linf,
        Err(_) => return Err(PtnsError::new_err("norm kind must be a number or 'inf'")),
    };
    grid::norm(&scalar(g, f)?, kind).map_err(err)
}

#[pyfunction]
fn bmo(g: &PyGrid, f: Vec<f64>) -> PyResult<f64> {
    bmo_norm(&scalar(g, f)?, &default_radii(&g.0)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, ux, uy, mu = 1.0, lam = 0.0))]
fn apply_lame(g: &PyGrid, ux: Vec<f64>, uy: Vec<f64>, mu: f64, lam: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let visc = Viscosity::new(mu, lam).map_err(err)?;
    lame::apply_lame(&vector(g, ux, uy)?, visc).map(pair).map_err(err)
}

/// Solves `L U = F` with `U = 0` on the boundary.
#[pyfunction]
#[pyo3(signature = (g, fx, fy, mu = 1.0, lam = 0.0, tol = 1e-10))]
fn solve_lame(
    py: Python<'_>,
    g: &PyGrid,
    fx: Vec<f64>,
    fy: Vec<f64>,
    mu: f64,
    lam: f64,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let visc = Viscosity::new(mu, lam).map_err(err)?;
    let f = vector(g, fx, fy)?;
    py.detach(|| lame::solve_lame(&f, visc, tol)).map(pair).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, z, a = 1.0, gamma = 1.4))]
fn pressure(g: &PyGrid, z: Vec<f64>, a: f64, gamma: f64) -> PyResult<Vec<f64>> {
    let params = PhysParams {
        a,
        gamma,
        ..PhysParams::default()
    };
    params.validate().map_err(err)?;
    momentum::pressure(&scalar(g, z)?, &params).map(ScalarField::into_values).map_err(err)
}

#[pyfunction]
fn theta_transform(g: &PyGrid, rho: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
    march::theta_transform(&scalar(g, rho)?, &scalar(g, z)?)
        .map(ScalarField::into_values)
        .map_err(err)
}

#[pyfunction]
fn z_transform(g: &PyGrid, rho: Vec<f64>, theta: Vec<f64>) -> PyResult<Vec<f64>> {
    march::z_transform(&scalar(g, rho)?, &scalar(g, theta)?)
        .map(ScalarField::into_values)
        .map_err(err)
}

/// Runs the Picard iteration on one window from the given state. Returns
/// the report and the final state's fields.
#[pyfunction]
#[pyo3(signature = (g, ux, uy, rho, z, t_window = 0.1, n_steps = 10, mu = 1.0, lam = 0.0, a = 1.0, gamma = 1.4))]
#[allow(clippy::too_many_arguments)]
fn solve_window<'py>(
    py: Python<'py>,
    g: &PyGrid,
    ux: Vec<f64>,
    uy: Vec<f64>,
    rho: Vec<f64>,
    z: Vec<f64>,
    t_window: f64,
    n_steps: usize,
    mu: f64,
    lam: f64,
    a: f64,
    gamma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = PhysParams {
        mu,
        lambda: lam,
        a,
        gamma,
        ..PhysParams::default()
    };
    params.validate().map_err(err)?;
    let cfg = WindowConfig {
        t_window,
        n_steps,
        ..WindowConfig::default()
    };
    let init = State::new(vector(g, ux, uy)?, scalar(g, rho)?, scalar(g, z)?).map_err(err)?;
    let (traj, report) = py.detach(|| picard::solve_window(&init, &params, &cfg)).map_err(err)?;
    let last = traj.last();
    let out = PyDict::new(py);
    out.set_item("report", to_py(py, &report)?)?;
    out.set_item("t_end", traj.t_end())?;
    out.set_item("u", pair(last.u.clone()))?;
    out.set_item("rho", last.rho.values().to_vec())?;
    out.set_item("z", last.z.values().to_vec())?;
    Ok(out)
}

/// Runs a simulation from config text in the `key = value` format.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::parse(config).map_err(err)?;
    let res = py.detach(|| march::simulate(&cfg)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("termination", res.termination.as_str())?;
    out.set_item("final_t", res.final_t)?;
    out.set_item("final_step", res.final_step)?;
    out.set_item("monitor_max", res.monitor_max)?;
    out.set_item("records", to_py(py, &res.records)?)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (qs = vec![2.0, 4.0, 6.0], levels = vec![16, 32, 64], samples = 10, seed = 2024))]
fn scan_estimates<'py>(
    py: Python<'py>,
    qs: Vec<f64>,
    levels: Vec<usize>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let rep = py
        .detach(|| scan_elliptic_estimates(&qs, &levels, samples, seed))
        .map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
fn ptns(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PtnsError", m.py().get_type::<PtnsError>())?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(grad, m)?)?;
    m.add_function(wrap_pyfunction!(div, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(bmo, m)?)?;
    m.add_function(wrap_pyfunction!(apply_lame, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lame, m)?)?;
    m.add_function(wrap_pyfunction!(pressure, m)?)?;
    m.add_function(wrap_pyfunction!(theta_transform, m)?)?;
    m.add_function(wrap_pyfunction!(z_transform, m)?)?;
    m.add_function(wrap_pyfunction!(solve_window, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(scan_estimates, m)?)?;
    Ok(())
}
