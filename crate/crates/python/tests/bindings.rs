//! Drives the extension module through an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;

use dicke_squeeze_py::dicke_squeeze_py as extension;

fn hardware<'py>(py: Python<'py>, n: usize) -> Bound<'py, PyDict> {
    let d = PyDict::new(py);
    for (k, v) in [
        ("omega_b_hz", 1e9),
        ("g_hz", 1e3),
        ("gamma_knob_hz", -2.5e8),
        ("omega_r_hz", 53e3),
        ("Q_m", 1e6),
        ("T2_s", 0.01),
        ("n_th", 20.0),
    ] {
        d.set_item(k, v).unwrap();
    }
    d.set_item("N", n).unwrap();
    d
}

#[test]
fn module_exposes_derive_evolve_and_run() {
    pyo3::append_to_inittab!(extension);
    Python::attach(|py| {
        let m = py.import("dicke_squeeze_py").unwrap();

        let d = m.getattr("derive").unwrap().call1((hardware(py, 100),)).unwrap();
        assert_eq!(d.getattr("scheme").unwrap().extract::<String>().unwrap(), "TAT_yz");
        let lb: f64 = d.call_method0("asymptotic_bound").unwrap().extract().unwrap();
        assert!((lb - 0.4951).abs() < 1e-3, "{lb}");

        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 1e-5).collect();
        let traj = m.getattr("evolve").unwrap().call1((hardware(py, 10), times.clone())).unwrap();
        assert_eq!(traj.len().unwrap(), times.len());
        let drift: f64 = traj.call_method0("max_trace_drift").unwrap().extract().unwrap();
        assert!(drift < 1e-8);

        let cfg = PyDict::new(py);
        cfg.set_item("params", hardware(py, 100)).unwrap();
        cfg.set_item("n_th_values", vec![10.0, 30.0]).unwrap();
        let rows = m.getattr("run").unwrap().call1(("bound", cfg)).unwrap();
        assert_eq!(rows.len().unwrap(), 2);

        let bad = PyDict::new(py);
        bad.set_item("omega_b_hz", 1e9).unwrap();
        let err = m.getattr("derive").unwrap().call1((bad,)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
