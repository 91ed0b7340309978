//! Python bindings: series ingestion, hyperbolic fitting, slope-change tests
//! and synthetic trajectories.

use growthlens as gl;
use growthlens::{ObservationSeries, YearWindow};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(growthlens_py, GrowthlensError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    GrowthlensError::new_err(e.to_string())
}

fn window(text: Option<&str>) -> PyResult<YearWindow> {
    match text {
        None => Ok(YearWindow::ALL),
        Some(t) => t.parse().map_err(err),
    }
}

/// An ordered, strictly positive annual series.
#[pyclass(name = "Series", module = "growthlens_py", frozen)]
pub struct PySeries {
    inner: ObservationSeries,
}

#[pymethods]
impl PySeries {
    #[new]
    #[pyo3(signature = (entity, years, values))]
    fn new(entity: &str, years: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        if years.len() != values.len() {
            return Err(err(format!(
                "years and values differ in length ({} vs {})",
                years.len(),
                values.len()
            )));
        }
        let inner =
            ObservationSeries::from_pairs(entity, years.into_iter().zip(values)).map_err(err)?;
        Ok(PySeries { inner })
    }

    #[getter]
    fn entity(&self) -> &str {
        self.inner.entity()
    }

    #[getter]
    fn unit(&self) -> &str {
        self.inner.unit()
    }

    #[getter]
    fn years(&self) -> Vec<f64> {
        self.inner.years()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Series({:?}, {} points)",
            self.inner.entity(),
            self.inner.len()
        )
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        Ok(PySeries {
            inner: self.inner.scaled(c).map_err(err)?,
        })
    }

    fn shifted(&self, t0: f64) -> PyResult<Self> {
        Ok(PySeries {
            inner: self.inner.shifted(t0).map_err(err)?,
        })
    }

    /// The series as a long `year,gdp` table.
    fn to_csv(&self) -> String {
        gl::ingest::to_long_table(&self.inner)
    }
}

/// Fitted `S(t) = 1 / (a - k t)` with uncertainties.
#[pyclass(name = "HyperbolicFit", module = "growthlens_py", frozen)]
pub struct PyFit {
    inner: gl::HyperbolicFitReport,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn a(&self) -> f64 {
        self.inner.params.a()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.params.k()
    }

    #[getter]
    fn a_stderr(&self) -> f64 {
        self.inner.line.intercept_stderr
    }

    #[getter]
    fn k_stderr(&self) -> f64 {
        self.inner.line.slope_stderr
    }

    #[getter]
    fn singularity_year(&self) -> f64 {
        self.inner.singularity_time()
    }

    #[getter]
    fn singularity_stderr(&self) -> f64 {
        self.inner.singularity_stderr()
    }

    #[getter]
    fn r2_reciprocal(&self) -> f64 {
        self.inner.r2_reciprocal
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.line.n
    }

    #[getter]
    fn window(&self) -> String {
        self.inner.window.to_string()
    }

    #[getter]
    fn weighting(&self) -> String {
        self.inner.weighting.to_string()
    }

    /// `(year, relative residual)` for every fitted point.
    #[getter]
    fn residuals(&self) -> Vec<(f64, f64)> {
        self.inner.natural_space_residual_stats.residuals.clone()
    }

    fn evaluate(&self, t: f64) -> PyResult<f64> {
        self.inner.params.evaluate(t).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "HyperbolicFit(a={:e}, k={:e}, singularity_year={:.2})",
            self.a(),
            self.k(),
            self.singularity_year()
        )
    }
}

/// Reads a wide or long CSV table from text.
#[pyfunction]
#[pyo3(signature = (text, entity=None))]
fn parse_table(text: &str, entity: Option<&str>) -> PyResult<PySeries> {
    Ok(PySeries {
        inner: gl::parse_table(text, entity).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (path, entity=None))]
fn read_table(path: std::path::PathBuf, entity: Option<&str>) -> PyResult<PySeries> {
    let text = std::fs::read_to_string(&path).map_err(err)?;
    parse_table(&text, entity)
}

#[pyfunction]
#[pyo3(signature = (series, window=Some("1000:1950"), weighting="uniform"))]
fn fit_hyperbolic(series: &PySeries, window: Option<&str>, weighting: &str) -> PyResult<PyFit> {
    let w: gl::Weighting = weighting.parse().map_err(err)?;
    let inner = gl::fit_hyperbolic(&series.inner, self::window(window)?, w).map_err(err)?;
    Ok(PyFit { inner })
}

fn breakpoint_dict<'py>(py: Python<'py>, r: &gl::BreakpointResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("candidate_year", r.candidate_year)?;
    d.set_item("gradient_before", r.gradient_before)?;
    d.set_item("gradient_after", r.gradient_after)?;
    d.set_item("delta", r.delta)?;
    d.set_item("t_statistic", r.t_statistic)?;
    d.set_item("dof", r.dof)?;
    d.set_item("welch", r.welch)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("alpha", r.alpha)?;
    d.set_item("classification", r.classification.to_string())?;
    d.set_item("n_before", r.n_before)?;
    d.set_item("n_after", r.n_after)?;
    Ok(d)
}

/// Two-segment slope-change test on `1/S` at `candidate`.
#[pyfunction]
#[pyo3(signature = (series, candidate, window=None, alpha=0.01))]
fn gradient_change_test<'py>(
    py: Python<'py>,
    series: &PySeries,
    candidate: f64,
    window: Option<&str>,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = gl::gradient_change_test(&series.inner, candidate, self::window(window)?, alpha)
        .map_err(err)?;
    breakpoint_dict(py, &r)
}

/// Tests every candidate; untestable ones carry a `reason` instead of a result.
#[pyfunction]
#[pyo3(signature = (series, candidates, window=None, alpha=0.01))]
fn breakpoint_scan<'py>(
    py: Python<'py>,
    series: &PySeries,
    candidates: Vec<f64>,
    window: Option<&str>,
    alpha: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let scan = gl::breakpoint_scan(&series.inner, &candidates, self::window(window)?, alpha)
        .map_err(err)?;
    scan.iter()
        .map(|e| match &e.outcome {
            gl::ScanOutcome::Tested {
                result,
                bonferroni_significant,
            } => {
                let d = breakpoint_dict(py, result)?;
                d.set_item("bonferroni_significant", *bonferroni_significant)?;
                Ok(d)
            }
            gl::ScanOutcome::Untestable { reason } => {
                let d = PyDict::new(py);
                d.set_item("candidate_year", e.candidate_year)?;
                d.set_item("reason", reason)?;
                Ok(d)
            }
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (series, window=Some("1000:1950")))]
fn classify_model<'py>(
    py: Python<'py>,
    series: &PySeries,
    window: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let v = gl::classify_model(&series.inner, self::window(window)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("choice", v.choice.to_string())?;
    d.set_item("r2_reciprocal", v.r2_reciprocal)?;
    d.set_item("r2_log", v.r2_log)?;
    Ok(d)
}

/// Relative residuals and bending of the series against a fit.
#[pyfunction]
#[pyo3(signature = (series, fit, band=0.25))]
fn deviation_profile<'py>(
    py: Python<'py>,
    series: &PySeries,
    fit: &PyFit,
    band: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = gl::deviation_profile(&series.inner, &fit.inner.params, fit.inner.window, band)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("residuals", p.residuals.clone())?;
    d.set_item(
        "segments",
        p.segments
            .iter()
            .map(|s| (s.year, s.bending.to_string()))
            .collect::<Vec<_>>(),
    )?;
    d.set_item("overall", p.overall.to_string())?;
    d.set_item("band", p.band)?;
    Ok(d)
}

/// Takeoff verdicts at 1750, 1870 and 1900 within the fit's window.
#[pyfunction]
#[pyo3(signature = (series, fit, alpha=0.01))]
fn regime_overlay_report<'py>(
    py: Python<'py>,
    series: &PySeries,
    fit: &PyFit,
    alpha: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let r = gl::regime_overlay_report(&series.inner, &fit.inner, alpha).map_err(err)?;
    r.entries
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("year", e.boundary.year)?;
            d.set_item("label", e.boundary.label)?;
            d.set_item("verdict", e.verdict.to_string())?;
            d.set_item("bending", e.bending.map(|b| b.to_string()))?;
            d.set_item(
                "classification",
                e.test.as_ref().map(|t| t.classification.to_string()),
            )?;
            d.set_item("p_value", e.test.as_ref().map(|t| t.p_value))?;
            d.set_item("note", e.note.clone())?;
            Ok(d)
        })
        .collect()
}

/// Samples `1/(a - k t)` at `years`, optionally with seeded noise.
#[pyfunction]
#[pyo3(signature = (a, k, years, sigma=0.0, seed=0, space="natural-relative"))]
fn generate_hyperbolic(
    a: f64,
    k: f64,
    years: Vec<f64>,
    sigma: f64,
    seed: u64,
    space: &str,
) -> PyResult<PySeries> {
    let params = gl::HyperbolicParams::new(a, k).map_err(err)?;
    let noise = gl::NoiseSpec {
        space: space.parse().map_err(err)?,
        sigma,
        seed,
    };
    let spec = gl::TrajectorySpec::new(gl::TrajectoryKind::Hyperbolic(params), years, noise);
    Ok(PySeries {
        inner: gl::generate(&spec).map_err(err)?,
    })
}

/// Runs a Monte Carlo calibration described by `key = value` config text.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn simulate<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg: gl::synth::SimulationConfig = config.parse().map_err(err)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let r = py
        .detach(|| gl::monte_carlo_rates(&cfg.null, &cfg.alt, &cfg.test, cfg.trials, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("trials", r.trials)?;
    d.set_item("seed", r.master_seed)?;
    d.set_item("false_positive_rate", r.false_positive_rate)?;
    d.set_item("false_positive_halfwidth", r.false_positive_halfwidth)?;
    d.set_item("detection_rate", r.detection_rate)?;
    d.set_item("detection_halfwidth", r.detection_halfwidth)?;
    Ok(d)
}

#[pymodule]
fn growthlens_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GrowthlensError", m.py().get_type::<GrowthlensError>())?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(parse_table, m)?)?;
    m.add_function(wrap_pyfunction!(read_table, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hyperbolic, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_change_test, m)?)?;
    m.add_function(wrap_pyfunction!(breakpoint_scan, m)?)?;
    m.add_function(wrap_pyfunction!(classify_model, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_profile, m)?)?;
    m.add_function(wrap_pyfunction!(regime_overlay_report, m)?)?;
    m.add_function(wrap_pyfunction!(generate_hyperbolic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
