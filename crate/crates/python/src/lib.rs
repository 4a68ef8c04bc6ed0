//! Python bindings for `horodrift`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use horodrift::brownian::{HeatKernel, McKeanKernel};
use horodrift::geometry;
use horodrift::harness::{self, ResultRecord, SelftestOptions};
use horodrift::{ModelSpace, Point};

fn err(e: horodrift::Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.code()))
}

fn space(id: &str) -> PyResult<ModelSpace> {
    ModelSpace::from_id(id).map_err(err)
}

fn records<'py>(py: Python<'py>, rs: &[ResultRecord]) -> PyResult<Bound<'py, PyList>> {
    let json = py.import("json")?;
    let out = PyList::empty(py);
    for r in rs {
        out.append(json.call_method1("loads", (r.to_line().map_err(err)?,))?)?;
    }
    Ok(out)
}

/// Riemannian distance between two points of a catalog space.
#[pyfunction]
fn distance(space_id: &str, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    geometry::distance(&space(space_id)?, &Point::new(p), &Point::new(q)).map_err(err)
}

/// Natural log of the heat kernel `p_t(x, y)`.
#[pyfunction]
fn ln_heat_kernel(space_id: &str, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    McKeanKernel
        .ln_kernel(&space(space_id)?, t, &Point::new(x), &Point::new(y))
        .map_err(err)
}

/// Parse `key = value` config text, run it without a store, and return the
/// records as dicts.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyList>> {
    let cfg = harness::parse_config(config).map_err(err)?;
    let outcome = py.detach(|| harness::run(&cfg, None)).map_err(err)?;
    records(py, &outcome.records)
}

/// Invariants and the six verdicts for one space.
#[pyfunction]
#[pyo3(signature = (space_id, t = 50.0, dt = 0.01, paths = 10_000, seed = 0))]
fn check<'py>(
    py: Python<'py>,
    space_id: &str,
    t: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyList>> {
    let text = format!("space = {space_id}\nquantity = check\nT = {t}\ndt = {dt}\npaths = {paths}\nseed = {seed}\n");
    run(py, &text)
}

/// Exact drift and entropy rows for a group such as `free:2` or `z:2`.
#[pyfunction]
fn group_report<'py>(py: Python<'py>, group_id: &str) -> PyResult<Bound<'py, PyList>> {
    run(py, &format!("group = {group_id}\nquantity = group_report\n"))
}

/// Markdown report over record dicts.
#[pyfunction]
#[pyo3(signature = (rows, space_id = None))]
fn report(py: Python<'_>, rows: &Bound<'_, PyList>, space_id: Option<&str>) -> PyResult<String> {
    let json = py.import("json")?;
    let mut rs = Vec::with_capacity(rows.len());
    for row in rows.iter() {
        let line: String = json.call_method1("dumps", (row,))?.extract()?;
        rs.push(ResultRecord::from_line(&line).map_err(err)?);
    }
    harness::report(&rs, space_id).map_err(err)
}

/// Run the reduced invariant suite; returns a dict with `passed` and `lines`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn selftest<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let rep = py.detach(|| {
        harness::selftest(&SelftestOptions {
            master: seed,
            ..SelftestOptions::default()
        })
    });
    let d = PyDict::new(py);
    d.set_item("passed", rep.all_passed())?;
    d.set_item("lines", rep.render().lines().collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn pyhorodrift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(ln_heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(group_report, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
