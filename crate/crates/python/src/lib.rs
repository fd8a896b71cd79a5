//! Python bindings. Structured values cross the boundary as JSON and come
//! out as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use gesture_lang::classify::bundled::{bundled_static_model, evaluate};
use gesture_lang::classify::GestureSet;
use gesture_lang::deictic::{object_distances, target_object, Ray};
use gesture_lang::geometry::Vec3;
use gesture_lang::session::metrics::report_metrics;
use gesture_lang::session::scenario::{self, ScenarioReport, SessionSource};
use gesture_lang::session::{self as gs, parse_line, Inbound, SessionConfig, SessionFile, SessionHeader};
use gesture_lang::simworld::scenes;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn config(toml: Option<&str>) -> PyResult<SessionConfig> {
    toml.map_or_else(|| Ok(SessionConfig::default()), |t| SessionConfig::from_toml(t).map_err(err))
}

fn vec3(v: Vec<f64>) -> PyResult<Vec3> {
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(PyValueError::new_err(format!("expected 3 coordinates, got {}", v.len()))),
    }
}

#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    scenario::catalog().iter().map(|s| s.name).collect()
}

/// Runs a catalog scenario from its scripted session and returns the report.
#[pyfunction]
#[pyo3(signature = (name, mode = "high_level_gesture", seed = 7, config_toml = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    name: &str,
    mode: &str,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = mode.parse().map_err(PyValueError::new_err)?;
    let (report, _) =
        scenario::run_scenario(name, mode, SessionSource::Scripted, &config(config_toml)?, seed).map_err(err)?;
    to_py(py, &report)
}

/// Replays a session file's text; returns the report and the outbound log.
#[pyfunction]
#[pyo3(signature = (session_text, config_toml = None))]
fn replay<'py>(py: Python<'py>, session_text: &str, config_toml: Option<&str>) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let file = SessionFile::parse(session_text).map_err(err)?;
    let (report, log) = scenario::replay(&file, &config(config_toml)?).map_err(err)?;
    Ok((to_py(py, &report)?, to_py(py, &log)?))
}

/// Comparison table for a list of report dicts.
#[pyfunction]
fn metrics_table(reports: &Bound<'_, PyAny>) -> PyResult<String> {
    let reports: Vec<ScenarioReport> = serde_json::from_str(&to_json(reports)?).map_err(err)?;
    Ok(report_metrics(&reports).to_string())
}

/// Balanced accuracies of the four classifiers on held-out synthetic data.
#[pyfunction]
#[pyo3(name = "bench", signature = (seed = 7))]
fn classifier_bench<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = evaluate(&GestureSet::default(), &bundled_static_model(), seed).map_err(err)?;
    to_py(py, &r)
}

/// Line distances from the ray through `p1` and `p2` to every object, and
/// the selected target.
#[pyfunction]
#[pyo3(signature = (p1, p2, scene = "tabletop"))]
fn deictic<'py>(py: Python<'py>, p1: Vec<f64>, p2: Vec<f64>, scene: &str) -> PyResult<(Bound<'py, PyAny>, Option<String>)> {
    let world = scenes::builtin(scene).ok_or_else(|| PyValueError::new_err(format!("unknown scene `{scene}`")))?;
    let params = SessionConfig::default().deictic;
    let ray = Ray::new(vec3(p1)?, vec3(p2)?, params.source).map_err(err)?;
    let d = object_distances(&ray, &world, &params);
    Ok((to_py(py, &d.distances)?, target_object(&d)))
}

/// Live interpreter session speaking the event-message protocol.
#[pyclass(unsendable)]
struct Session {
    inner: gs::Session,
    seq: u64,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (header = None, config_toml = None))]
    fn new(header: Option<&Bound<'_, PyAny>>, config_toml: Option<&str>) -> PyResult<Self> {
        let header: SessionHeader = match header {
            Some(h) => serde_json::from_str(&to_json(h)?).map_err(err)?,
            None => SessionHeader::default(),
        };
        let inner = gs::Session::new(header, config(config_toml)?).map_err(err)?;
        Ok(Self { inner, seq: 0 })
    }

    /// Handles one inbound message, given as an envelope line or dict.
    /// Returns the outbound messages it caused.
    fn handle<'py>(&mut self, py: Python<'py>, message: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        self.seq += 1;
        let m = parse_line::<Inbound>(&to_json(message)?, self.seq as usize).map_err(err)?;
        let out = self.inner.handle(&m);
        to_py(py, &out)
    }

    /// Ends the input and runs queued plans to completion.
    fn finish<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let out = self.inner.finish();
        to_py(py, &out)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode().name()
    }

    #[getter]
    fn world<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.world())
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &scenario::session_report(&self.inner).map_err(err)?)
    }
}

#[pymodule]
fn pygesture(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMA_VERSION", gs::SCHEMA_VERSION)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_table, m)?)?;
    m.add_function(wrap_pyfunction!(classifier_bench, m)?)?;
    m.add_function(wrap_pyfunction!(deictic, m)?)?;
    m.add_class::<Session>()?;
    Ok(())
}
