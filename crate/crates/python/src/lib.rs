//! Python bindings. Parameter sets and scan configurations cross the boundary
//! as dicts with the same keys as the JSON configs; results come back as dicts
//! or small wrapper classes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use dicke_squeeze::experiments::{self, ScanConfig};
use dicke_squeeze::hamiltonian::HamiltonianCoefficients;
use dicke_squeeze::metrics::{husimi_q_pure, GridSpec};
use dicke_squeeze::open_dynamics::propagate_pure;
use dicke_squeeze::params::ParamsV1;
use dicke_squeeze::{Error, Moments};

fn to_py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = PyModule::import(py, "json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

/// Derived quantities for one parameter set (rad/s internally).
#[pyclass(frozen, module = "dicke_squeeze_py")]
struct Derived {
    inner: dicke_squeeze::DerivedParams,
}

#[pymethods]
impl Derived {
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn chi_tilde(&self) -> f64 {
        self.inner.chi_tilde
    }
    #[getter]
    fn omega_r(&self) -> f64 {
        self.inner.omega_r
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn tanh2r(&self) -> f64 {
        self.inner.tanh2r
    }
    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.label()
    }
    #[getter]
    fn n_spins(&self) -> usize {
        self.inner.n_spins
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    /// Large-N squeezing floor for these parameters.
    fn asymptotic_bound(&self) -> PyResult<f64> {
        dicke_squeeze::asymptotic_bound(&self.inner).map_err(to_py_err)
    }

    /// Closed-form optimum of the moment equations (TAT_yz only).
    fn analytic_optimum(&self, py: Python<'_>, n_spins: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &dicke_squeeze::analytic_optimum(&self.inner, n_spins).map_err(to_py_err)?)
    }

    /// Moment-equation ξ²(t) on `times`.
    fn moment_xi2(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        let sys = dicke_squeeze::build_moment_system(&self.inner, self.inner.n_spins).map_err(to_py_err)?;
        Ok(dicke_squeeze::solve_moments(&sys, &times).map_err(to_py_err)?.xi2)
    }

    fn __repr__(&self) -> String {
        format!(
            "Derived(N={}, scheme={}, chi={:.6e}, omega_r={:.6e}, c={:.6e}, epsilon={:.6e})",
            self.inner.n_spins,
            self.inner.scheme.label(),
            self.inner.chi,
            self.inner.omega_r,
            self.inner.c,
            self.inner.epsilon
        )
    }
}

/// Moments and ξ² along a trajectory.
#[pyclass(frozen, module = "dicke_squeeze_py")]
struct Trajectory {
    inner: dicke_squeeze::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }
    #[getter]
    fn xi2(&self) -> Vec<f64> {
        self.inner.xi2()
    }
    #[getter]
    fn trace(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.trace).collect()
    }
    #[getter]
    fn purity(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.purity).collect()
    }
    /// Rows of (Sx, Sy, Sz, Sy², Sz², Sx², Cyz, Cxy, Cxz).
    #[getter]
    fn moments(&self) -> Vec<[f64; 9]> {
        self.inner.records.iter().map(|r| r.moments.to_array()).collect()
    }
    fn max_trace_drift(&self) -> f64 {
        self.inner.max_trace_drift()
    }
    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

/// Derive the effective parameters from a `params.v1` dict.
#[pyfunction]
fn derive(py: Python<'_>, params: &Bound<'_, PyAny>) -> PyResult<Derived> {
    let p: ParamsV1 = from_py(py, params)?;
    let raw = p.to_raw().map_err(to_py_err)?;
    Ok(Derived { inner: dicke_squeeze::derive(&raw).map_err(to_py_err)? })
}

/// ξ² of the x-polarized coherent spin state of `n_spins` spins.
#[pyfunction]
fn css_xi2(n_spins: usize) -> PyResult<f64> {
    let css = dicke_squeeze::css_state(n_spins as f64 / 2.0, std::f64::consts::FRAC_PI_2, 0.0).map_err(to_py_err)?;
    Ok(dicke_squeeze::squeezing_parameter(&Moments::from_state(&css), n_spins).map_err(to_py_err)?.xi2)
}

/// Evolve the x-polarized CSS on `times` under the master equation, or
/// unitarily when `unitary` is set or every rate vanishes.
#[pyfunction]
#[pyo3(signature = (params, times, unitary = false, rtol = 1e-9, atol = 1e-12))]
fn evolve(py: Python<'_>, params: &Bound<'_, PyAny>, times: Vec<f64>, unitary: bool, rtol: f64, atol: f64) -> PyResult<Trajectory> {
    let p: ParamsV1 = from_py(py, params)?;
    let mut cfg = ScanConfig::new(p);
    cfg.unitary = unitary;
    cfg.rtol = rtol;
    cfg.atol = atol;
    let raw = cfg.params.to_raw().map_err(to_py_err)?;
    let d = cfg.point(&raw, raw.n_spins, raw.n_th, None).map_err(to_py_err)?;
    let opts = cfg.evolve_options();
    let inner = py.detach(|| experiments::exact_trajectory(&d, raw.n_spins, &times, &opts)).map_err(to_py_err)?;
    Ok(Trajectory { inner })
}

/// Husimi Q of the unitarily evolved CSS at time `t`: (theta, phi, Q row-major, normalization).
#[pyfunction]
fn husimi_unitary(py: Python<'_>, params: &Bound<'_, PyAny>, t: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let d = derive(py, params)?.inner;
    let j = d.n_spins as f64 / 2.0;
    let css = dicke_squeeze::css_state(j, std::f64::consts::FRAC_PI_2, 0.0).map_err(to_py_err)?;
    let state = propagate_pure(&css, &HamiltonianCoefficients::from_params(&d), t);
    let q = husimi_q_pure(&state, GridSpec::for_spin(j)).map_err(to_py_err)?;
    let norm = q.normalization();
    Ok((q.theta, q.phi, q.values, norm))
}

/// Least-squares fit of y = a·N^b + const.
#[pyfunction]
#[pyo3(signature = (n, y, log_space = false))]
fn fit_power_law(py: Python<'_>, n: Vec<f64>, y: Vec<f64>, log_space: bool) -> PyResult<Py<PyAny>> {
    let opts = experiments::FitOptions { log_space, ..experiments::FitOptions::default() };
    to_py(py, &experiments::fit_power_law(&n, &y, &opts).map_err(to_py_err)?)
}

/// Run one CLI-equivalent command on a `scan.v1` dict and return its results.
/// Commands: evolve, scan-n, optimize, moments, bound, verify.
#[pyfunction]
fn run(py: Python<'_>, command: &str, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let cfg: ScanConfig = from_py(py, config)?;
    let value = py
        .detach(|| -> dicke_squeeze::Result<serde_json::Value> {
            let v = match command {
                "evolve" => serde_json::to_value(experiments::scan_time(&cfg)?)?,
                "scan-n" => serde_json::to_value(experiments::asymptote_report(&cfg)?)?,
                "optimize" => serde_json::to_value(experiments::scan_n_optimized(&cfg)?)?,
                "moments" => serde_json::to_value(experiments::moment_runs(&cfg)?)?,
                "bound" => serde_json::to_value(experiments::bound_table(&cfg)?)?,
                "verify" => serde_json::to_value(experiments::verify_run(&cfg)?)?,
                other => return Err(Error::Config(format!("unknown command {other:?}"))),
            };
            Ok(v)
        })
        .map_err(to_py_err)?;
    to_py(py, &value)
}

#[pymodule]
pub fn dicke_squeeze_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Derived>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(derive, m)?)?;
    m.add_function(wrap_pyfunction!(css_xi2, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(husimi_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
