//! Python bindings: the report commands plus point evaluations of the
//! series and the exact references. Structured results cross the boundary
//! as JSON and come back as plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use opnm::bath::{BathModel, ClassicalNoiseModel, QuantumBathModel};
use opnm::measurement::MeasurementScheme;
use opnm::operator::DensityMatrix;
use opnm::oracle::{gaussian_dephasing_exact, mc_joint_prob, pseudomode_joint_prob, McOptions, OracleResult};
use opnm::report::{self, ExperimentConfig, RunOptions};
use opnm::series::SeriesEngine;

create_exception!(opnm_py, OpnmError, PyException);

fn err(e: opnm::Error) -> PyErr {
    OpnmError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| OpnmError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn run_options(parallel: bool) -> RunOptions {
    RunOptions { parallel }
}

fn config(config_json: &str, overrides: Vec<String>) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_json_str(config_json, &overrides).map_err(err)
}

/// Sweep described by a JSON config; returns `{"rows": [...], "csv": str}`.
#[pyfunction]
#[pyo3(signature = (config_json, overrides = vec![], parallel = true))]
fn simulate<'py>(
    py: Python<'py>,
    config_json: &str,
    overrides: Vec<String>,
    parallel: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_json, overrides)?;
    let out = py.detach(|| report::simulate(&cfg, &run_options(parallel))).map_err(err)?;
    let csv = out.table.to_csv().map_err(err)?;
    to_py(py, &serde_json::json!({ "rows": out.rows, "csv": csv }))
}

#[pyfunction]
#[pyo3(signature = (config_json, overrides = vec![], parallel = true))]
fn compare<'py>(
    py: Python<'py>,
    config_json: &str,
    overrides: Vec<String>,
    parallel: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_json, overrides)?;
    let rep = py.detach(|| report::compare(&cfg, &run_options(parallel))).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (parallel = true))]
fn validate(py: Python<'_>, parallel: bool) -> PyResult<Bound<'_, PyAny>> {
    let rep = py.detach(|| report::validate(&run_options(parallel)));
    to_py(py, &rep)
}

/// `{"files": {name: csv}, "checks": [...]}` for figure 1, 2 or 3.
#[pyfunction]
#[pyo3(signature = (figure, overrides = vec![], parallel = true))]
fn figure_data(py: Python<'_>, figure: u8, overrides: Vec<String>, parallel: bool) -> PyResult<Bound<'_, PyAny>> {
    let bundle = py.detach(|| report::figure_data(figure, &overrides, &run_options(parallel))).map_err(err)?;
    let mut files = serde_json::Map::new();
    for f in &bundle.files {
        files.insert(f.name.clone(), f.table.to_csv().map_err(err)?.into());
    }
    to_py(py, &serde_json::json!({ "files": files, "checks": bundle.checks }))
}

fn model(kind: &str, gamma: f64, tau_c: f64, nbar: f64) -> opnm::Result<BathModel> {
    match kind {
        "dephasing" => Ok(BathModel::Dephasing(ClassicalNoiseModel::new(gamma, tau_c)?)),
        "bosonic" => Ok(BathModel::Bosonic(QuantumBathModel::new(gamma, tau_c, nbar)?)),
        other => Err(opnm::Error::Config(format!("unknown model type '{other}'"))),
    }
}

fn engine(kind: &str, gamma: f64, tau_c: f64, nbar: f64, scheme: &str, p: f64, s_max: f64) -> opnm::Result<SeriesEngine> {
    let rho0 = DensityMatrix::qubit_superposition(p)?;
    SeriesEngine::for_model(
        model(kind, gamma, tau_c, nbar)?,
        MeasurementScheme::preset(scheme)?,
        &rho0,
        s_max,
        Default::default(),
        Default::default(),
    )
}

/// Perturbative CPF at one point; returns `(total, [order 1, ...])`.
#[pyfunction]
#[pyo3(signature = (model_type, gamma, tau_c, scheme, p, t, tau, y, order, nbar = 0.0))]
#[allow(clippy::too_many_arguments)]
fn cpf_perturbative(
    py: Python<'_>,
    model_type: &str,
    gamma: f64,
    tau_c: f64,
    scheme: &str,
    p: f64,
    t: f64,
    tau: f64,
    y: f64,
    order: usize,
    nbar: f64,
) -> PyResult<(f64, Vec<f64>)> {
    py.detach(|| {
        let e = engine(model_type, gamma, tau_c, nbar, scheme, p, (t + tau).max(tau_c))?;
        let yi = e.scheme().middle_index(y)?;
        let r = e.cpf_perturbative(t, tau, yi, order)?;
        Ok((r.value, r.per_order))
    })
    .map_err(err)
}

/// Perturbative `P(z, y, x)` as a nested list indexed `[z][y][x]`.
#[pyfunction]
#[pyo3(signature = (model_type, gamma, tau_c, scheme, p, t, tau, order, nbar = 0.0))]
#[allow(clippy::too_many_arguments)]
fn joint_prob_perturbative(
    py: Python<'_>,
    model_type: &str,
    gamma: f64,
    tau_c: f64,
    scheme: &str,
    p: f64,
    t: f64,
    tau: f64,
    order: usize,
    nbar: f64,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    py.detach(|| {
        let e = engine(model_type, gamma, tau_c, nbar, scheme, p, (t + tau).max(tau_c))?;
        Ok(nested(&e.joint_prob_perturbative(t, tau, order)?.joint))
    })
    .map_err(err)
}

fn nested(j: &opnm::measurement::JointDistribution) -> Vec<Vec<Vec<f64>>> {
    let (nz, ny, nx) = j.shape();
    (0..nz).map(|z| (0..ny).map(|y| (0..nx).map(|x| j.get(z, y, x)).collect()).collect()).collect()
}

/// Exact CPF from an oracle: `"gaussian"`, `"monte-carlo"` or `"pseudomode"`.
/// Returns `(cpf, stderr or None)`.
#[pyfunction]
#[pyo3(signature = (oracle, gamma, tau_c, scheme, p, t, tau, y, nbar = 0.0, n_traj = 100_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn cpf_exact(
    py: Python<'_>,
    oracle: &str,
    gamma: f64,
    tau_c: f64,
    scheme: &str,
    p: f64,
    t: f64,
    tau: f64,
    y: f64,
    nbar: f64,
    n_traj: usize,
    seed: u64,
) -> PyResult<(f64, Option<f64>)> {
    py.detach(|| {
        let rho0 = DensityMatrix::qubit_superposition(p)?;
        let s = MeasurementScheme::preset(scheme)?;
        let r: OracleResult = match oracle {
            "gaussian" => gaussian_dephasing_exact(&ClassicalNoiseModel::new(gamma, tau_c)?, &s, &rho0, t, tau)?,
            "monte-carlo" => {
                let opts = McOptions { n_traj, seed, ..McOptions::default() };
                mc_joint_prob(&ClassicalNoiseModel::new(gamma, tau_c)?, &s, &rho0, t, tau, &opts)?
            }
            "pseudomode" => pseudomode_joint_prob(&QuantumBathModel::new(gamma, tau_c, nbar)?, &s, &rho0, t, tau, None)?,
            other => return Err(opnm::Error::Config(format!("unknown oracle '{other}'"))),
        };
        let yi = s.middle_index(y)?;
        Ok((r.cpf(yi)?, r.cpf_stderr(yi)))
    })
    .map_err(err)
}

#[pymodule]
fn opnm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OpnmError", m.py().get_type::<OpnmError>())?;
    m.add("__version__", report::VERSION)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(figure_data, m)?)?;
    m.add_function(wrap_pyfunction!(cpf_perturbative, m)?)?;
    m.add_function(wrap_pyfunction!(joint_prob_perturbative, m)?)?;
    m.add_function(wrap_pyfunction!(cpf_exact, m)?)?;
    Ok(())
}
