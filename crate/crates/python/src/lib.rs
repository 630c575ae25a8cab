//! Python bindings: parameters, analytic evaluation, simulation, sweeps and
//! validation.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

use uav_coverage::analytic::{conditional_coverage, conditional_handover_any, evaluate as evaluate_params};
use uav_coverage::config::to_config_string;
use uav_coverage::montecarlo::simulate as simulate_params;
use uav_coverage::sweep::{run_sweep, write_csv, AntennaKind, Engine, Metric, SweepSpec};
use uav_coverage::validate::validate as validate_params;
use uav_coverage::{AntennaModel, AssociationPolicy, Error, HandoverContext, LinkType, McEstimate, QuadratureSpec, SystemParams};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidGeometry { .. } | Error::OutOfBeam { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn quad(rel_tol: Option<f64>) -> PyResult<QuadratureSpec> {
    let spec = match rel_tol {
        Some(rel_tol) => QuadratureSpec {
            rel_tol,
            ..QuadratureSpec::default()
        },
        None => QuadratureSpec::default(),
    };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

fn link(name: &str) -> PyResult<LinkType> {
    match name {
        "los" | "LoS" | "L" => Ok(LinkType::Los),
        "nlos" | "NLoS" | "N" => Ok(LinkType::Nlos),
        other => Err(PyValueError::new_err(format!("link type must be \"los\" or \"nlos\", got {other:?}"))),
    }
}

/// System parameters. Keyword arguments use the configuration-file keys and
/// units, e.g. `Params(lambda_b=50, antenna="omni", r_max=2000)`.
#[pyclass(name = "Params", module = "uavcov", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: SystemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = String::new();
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                let rendered = if value.is_instance_of::<PyString>() {
                    format!("{:?}", value.extract::<String>()?)
                } else if let Ok(i) = value.extract::<i64>() {
                    i.to_string()
                } else {
                    format!("{:?}", value.extract::<f64>()?)
                };
                text.push_str(&format!("{key} = {rendered}\n"));
            }
        }
        Self::from_config(&text)
    }

    /// Parameters from the text of a configuration file.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(PyParams {
            inner: uav_coverage::parse_config(text).map_err(py_err)?,
        })
    }

    /// Configuration-file text that reproduces these parameters.
    fn to_config(&self) -> String {
        to_config_string(&self.inner)
    }

    /// Copy with some keys replaced.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = to_config_string(&self.inner);
        if let Some(kwargs) = kwargs {
            let antenna_keys = ["antenna", "beamwidth_deg", "r_max"];
            let touches_antenna = kwargs.keys().iter().any(|k| k.extract::<String>().is_ok_and(|k| antenna_keys.contains(&k.as_str())));
            let overridden: Vec<String> = kwargs.keys().iter().filter_map(|k| k.extract().ok()).collect();
            text = text
                .lines()
                .filter(|l| {
                    let key = l.split(" = ").next().unwrap_or("");
                    !overridden.iter().any(|k| k == key) && !(touches_antenna && antenna_keys.contains(&key))
                })
                .map(|l| format!("{l}\n"))
                .collect();
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                let rendered = if value.is_instance_of::<PyString>() {
                    format!("{:?}", value.extract::<String>()?)
                } else if let Ok(i) = value.extract::<i64>() {
                    i.to_string()
                } else {
                    format!("{:?}", value.extract::<f64>()?)
                };
                text.push_str(&format!("{key} = {rendered}\n"));
            }
        }
        Self::from_config(&text)
    }

    /// GBS density in GBSs per square metre.
    #[getter]
    fn lambda_b(&self) -> f64 {
        self.inner.lambda_b
    }

    #[getter]
    fn v(&self) -> f64 {
        self.inner.v
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    /// Linear SIR threshold.
    #[getter]
    fn t_thresh(&self) -> f64 {
        self.inner.t_thresh
    }

    #[getter]
    fn antenna(&self) -> &'static str {
        self.inner.antenna.name()
    }

    /// Beamwidth in degrees, or `None` for the omni antenna.
    #[getter]
    fn beamwidth_deg(&self) -> Option<f64> {
        match self.inner.antenna {
            AntennaModel::Directional { beamwidth_deg } => Some(beamwidth_deg),
            AntennaModel::Omni { .. } => None,
        }
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.inner.policy.as_str()
    }

    /// Horizontal receiving radius at UAV height `z`.
    fn receiving_radius(&self, z: f64) -> PyResult<f64> {
        self.inner.receiving_radius(z).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = to_config_string(&self.inner).lines().map(|l| l.replacen(" = ", "=", 1)).collect();
        format!("Params({})", fields.join(", "))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

fn params_or_default(params: Option<PyParams>) -> SystemParams {
    params.map(|p| p.inner).unwrap_or_default()
}

/// Analytic coverage, handover, association and void probabilities.
#[pyfunction]
#[pyo3(signature = (params=None, rel_tol=None))]
fn evaluate(py: Python<'_>, params: Option<PyParams>, rel_tol: Option<f64>) -> PyResult<BTreeMap<&'static str, f64>> {
    let p = params_or_default(params);
    let spec = quad(rel_tol)?;
    let b = py.detach(|| evaluate_params(&p, &spec)).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("coverage", b.total),
        ("sir_coverage", b.sir_coverage),
        ("handover", b.handover_prob),
        ("association_los", b.association[LinkType::Los.index()]),
        ("association_nlos", b.association[LinkType::Nlos.index()]),
        ("void", b.void_prob),
    ]))
}

/// Handover probability given a `serving` link at horizontal distance `r0`
/// from a UAV ending its hop at height `z`.
#[pyfunction]
#[pyo3(signature = (serving, r0, z, params=None))]
fn conditional_handover(serving: &str, r0: f64, z: f64, params: Option<PyParams>) -> PyResult<f64> {
    let p = params_or_default(params);
    conditional_handover_any(HandoverContext { serving: link(serving)?, r0, z_t: z }, &p).map_err(py_err)
}

/// `P(SIR > T)` given a `serving` link at horizontal distance `r0`.
#[pyfunction(name = "conditional_coverage")]
#[pyo3(signature = (serving, r0, z, params=None, rel_tol=None))]
fn py_conditional_coverage(serving: &str, r0: f64, z: f64, params: Option<PyParams>, rel_tol: Option<f64>) -> PyResult<f64> {
    let p = params_or_default(params);
    conditional_coverage(link(serving)?, r0, z, &p, &quad(rel_tol)?).map_err(py_err)
}

fn estimate_tuple(e: McEstimate) -> (f64, f64, f64) {
    (e.mean, e.ci_low, e.ci_high)
}

/// Monte Carlo estimates as `(mean, ci_low, ci_high)` with 95% Wilson
/// intervals.
#[pyfunction]
#[pyo3(signature = (params=None, trials=100_000, seed=1))]
fn simulate(py: Python<'_>, params: Option<PyParams>, trials: u64, seed: u64) -> PyResult<BTreeMap<&'static str, (f64, f64, f64)>> {
    let p = params_or_default(params);
    let s = py.detach(|| simulate_params(&p, trials, seed)).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("coverage", estimate_tuple(s.coverage())),
        ("sir_coverage", estimate_tuple(s.sir_coverage())),
        ("handover", estimate_tuple(s.handover())),
        ("association_los", estimate_tuple(s.association(LinkType::Los))),
        ("association_nlos", estimate_tuple(s.association(LinkType::Nlos))),
        ("void", estimate_tuple(s.void())),
    ]))
}

/// Compares both engines; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (params=None, trials=100_000, seed=1, rel_tol=None))]
fn validate(py: Python<'_>, params: Option<PyParams>, trials: u64, seed: u64, rel_tol: Option<f64>) -> PyResult<(bool, String)> {
    let p = params_or_default(params);
    let spec = quad(rel_tol)?;
    let report = py.detach(|| validate_params(&p, trials, seed, &spec)).map_err(py_err)?;
    Ok((report.passed(), report.to_string()))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: Vec<String>) -> PyResult<Vec<T>> {
    items.iter().map(|s| s.parse().map_err(py_err)).collect()
}

/// One-parameter sweep; returns the CSV text.
#[pyfunction]
#[pyo3(signature = (
    axis, values, params=None, metrics=vec!["coverage".to_string(), "handover".to_string()],
    policies=vec!["strongest_rss".to_string()], antennas=vec!["directional".to_string()],
    engine="analytic", trials=10_000, seed=1, rel_tol=None,
))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    axis: &str,
    values: Vec<f64>,
    params: Option<PyParams>,
    metrics: Vec<String>,
    policies: Vec<String>,
    antennas: Vec<String>,
    engine: &str,
    trials: u64,
    seed: u64,
    rel_tol: Option<f64>,
) -> PyResult<String> {
    let p = params_or_default(params);
    let spec = SweepSpec {
        axis: axis.parse().map_err(py_err)?,
        values,
        metrics: parse_list::<Metric>(metrics)?,
        policies: parse_list::<AssociationPolicy>(policies)?,
        antennas: parse_list::<AntennaKind>(antennas)?,
        engine: engine.parse::<Engine>().map_err(py_err)?,
        trials,
        seed,
        fixed: Vec::new(),
    };
    let q = quad(rel_tol)?;
    let rows = py.detach(|| run_sweep(&spec, &p, &q)).map_err(py_err)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Parameters from a configuration file.
#[pyfunction]
fn load_config(path: std::path::PathBuf) -> PyResult<PyParams> {
    Ok(PyParams {
        inner: uav_coverage::load_config(path).map_err(py_err)?,
    })
}

#[pymodule]
fn uavcov(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_handover, m)?)?;
    m.add_function(wrap_pyfunction!(py_conditional_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    Ok(())
}
