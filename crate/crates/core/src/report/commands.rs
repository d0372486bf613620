//! `simulate`, `compare`, `validate` and `figure-data`.
//!
//! Grid points are independent, so they fan out over the rayon pool and
//! are collected back in grid order. Monte Carlo seeds are derived from
//! the configured seed and the point index, never from thread identity.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ModelKind, OracleKind};
use super::table::{fmt_num, joint_checksum, row_columns, CsvTable, ResultRow, RowStatus};
use crate::bath::{decay_amplitude, BathModel, ClassicalNoiseModel, QuantumBathModel};
use crate::error::{Error, Result};
use crate::measurement::{cpf_from_joint, MeasurementScheme};
use crate::operator::{c, projector_onto, DensityMatrix, ProjectorPair};
use crate::oracle::{
    gaussian_dephasing_exact, mc_joint_prob, mode_correlation_check, pseudomode_joint_prob, McOptions,
    OracleResult, PseudomodeModel,
};
use crate::series::{appendix_convergence, ExchangeModel, QuadratureOptions, SeriesEngine, SeriesOptions};

/// Execution settings that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallel: true }
    }
}

/// CLI exit code for an error: 2 configuration, 3 accuracy, 4 unsupported
/// combination, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::Argument(_) | Error::Config(_) => 2,
        Error::Accuracy(_) | Error::Consistency(_) => 3,
        Error::Model(_) | Error::UnsupportedOrder { .. } | Error::ConditioningImpossible { .. } => 4,
        Error::Io(_) => 1,
    }
}

fn map_points<T: Send>(n: usize, run: &RunOptions, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if run.parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything one sweep needs, built once.
struct Sweep<'a> {
    config: &'a ExperimentConfig,
    model: BathModel,
    scheme: MeasurementScheme,
    rho0: DensityMatrix,
    engine: SeriesEngine,
    conditions: Vec<usize>,
    axis: Vec<f64>,
}

impl<'a> Sweep<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = config.build_model()?;
        let scheme = config.build_scheme()?;
        let rho0 = config.build_initial_state()?;
        match (config.oracle.kind, config.model.kind) {
            (OracleKind::Gaussian | OracleKind::MonteCarlo, ModelKind::Bosonic)
            | (OracleKind::Pseudomode, ModelKind::Dephasing) => {
                return Err(Error::Model(format!(
                    "oracle {:?} does not apply to the {} model",
                    config.oracle.kind,
                    model.name()
                )))
            }
            _ => {}
        }
        let s_max = (2.0 * config.grid.t_max / config.time_scale()).max(config.model.tau_c);
        let engine = SeriesEngine::for_model(
            model,
            scheme.clone(),
            &rho0,
            s_max,
            config.model.finite_t_method,
            config.series_options(),
        )?;
        let conditions = config.condition_indices(&scheme)?;
        Ok(Self { config, model, scheme, rho0, engine, conditions, axis: config.axis_points() })
    }

    fn oracle(&self, index: usize, t: f64) -> Result<Option<OracleResult>> {
        let o = &self.config.oracle;
        Ok(match (o.kind, &self.model) {
            (OracleKind::None, _) => None,
            (OracleKind::Gaussian, BathModel::Dephasing(m)) => {
                Some(gaussian_dephasing_exact(m, &self.scheme, &self.rho0, t, t)?)
            }
            (OracleKind::MonteCarlo, BathModel::Dephasing(m)) => {
                let opts = McOptions { n_traj: o.n_traj, seed: point_seed(o.seed, index), ..McOptions::default() };
                Some(mc_joint_prob(m, &self.scheme, &self.rho0, t, t, &opts)?)
            }
            (OracleKind::Pseudomode, BathModel::Bosonic(m)) => {
                Some(pseudomode_joint_prob(m, &self.scheme, &self.rho0, t, t, o.fock_cutoff)?)
            }
            _ => unreachable!("checked when the sweep was built"),
        })
    }

    fn point(&self, index: usize) -> Result<Vec<ResultRow>> {
        let axis = self.axis[index];
        let t = axis / self.config.time_scale();
        let order = self.config.series.max_order;
        let series = self.engine.joint_prob_perturbative(t, t, order)?;
        let checksum = joint_checksum(&series.joint);
        let oracle = self.oracle(index, t)?;
        let mut rows = Vec::with_capacity(self.conditions.len());
        for &y in &self.conditions {
            let label = self.scheme.middle.outcome(y);
            let mut row = ResultRow {
                axis,
                t,
                tau: t,
                y: label,
                status: RowStatus::Ok,
                per_order: vec![],
                total: None,
                oracle: None,
                oracle_stderr: None,
                checksum,
            };
            match self.engine.cpf_perturbative(t, t, y, order) {
                Ok(cpf) => {
                    row.total = Some(cpf.value);
                    row.per_order = cpf.per_order;
                }
                Err(Error::ConditioningImpossible { .. }) => row.status = RowStatus::ConditioningImpossible,
                Err(e) => return Err(e),
            }
            if let Some(o) = &oracle {
                match o.cpf(y) {
                    Ok(v) => {
                        row.oracle = Some(v);
                        row.oracle_stderr = o.cpf_stderr(y);
                    }
                    Err(Error::ConditioningImpossible { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }

    fn rows(&self, run: &RunOptions) -> Result<Vec<ResultRow>> {
        log::info!(
            "{} model, {} points x {} conditions, order {}",
            self.model.name(),
            self.axis.len(),
            self.conditions.len(),
            self.config.series.max_order
        );
        Ok(map_points(self.axis.len(), run, |k| self.point(k))?.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutput {
    pub rows: Vec<ResultRow>,
    pub table: CsvTable,
}

/// One row per `(grid point, y)` with the per-order CPF and, when an
/// oracle is configured, its value.
pub fn simulate(config: &ExperimentConfig, run: &RunOptions) -> Result<SimulationOutput> {
    let sweep = Sweep::new(config)?;
    let rows = sweep.rows(run)?;
    let order = config.series.max_order;
    let mut table = CsvTable::new("simulate", &config.to_json(), row_columns(order));
    table.records = rows.iter().map(|r| r.record(order)).collect();
    Ok(SimulationOutput { rows, table })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub axis: f64,
    pub y: f64,
    pub series: f64,
    pub oracle: f64,
    pub oracle_stderr: Option<f64>,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Points where `P(y)` vanished for the series or the oracle.
    pub skipped: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub table: CsvTable,
}

/// `|CPF_series − CPF_oracle|` per point with max/mean and a verdict
/// against `oracle.tolerance`.
pub fn compare(config: &ExperimentConfig, run: &RunOptions) -> Result<ComparisonReport> {
    if config.oracle.kind == OracleKind::None {
        return Err(Error::Config("compare needs an oracle block with a kind other than none".into()));
    }
    let sweep = Sweep::new(config)?;
    let raw = sweep.rows(run)?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in &raw {
        match (r.total, r.oracle) {
            (Some(series), Some(oracle)) => rows.push(ComparisonRow {
                axis: r.axis,
                y: r.y,
                series,
                oracle,
                oracle_stderr: r.oracle_stderr,
                abs_error: (series - oracle).abs(),
            }),
            _ => skipped += 1,
        }
    }
    let max_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    let mean_error =
        if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.abs_error).sum::<f64>() / rows.len() as f64 };
    let tolerance = config.oracle.tolerance;
    let passed = max_error <= tolerance;
    let columns = ["axis", "y", "series_cpf", "oracle_cpf", "oracle_stderr", "abs_error"];
    let mut table = CsvTable::new("compare", &config.to_json(), columns.iter().map(|s| s.to_string()).collect());
    table.comments.push(format!(
        "summary: max_error={} mean_error={} tolerance={} skipped={} result={}",
        fmt_num(max_error),
        fmt_num(mean_error),
        fmt_num(tolerance),
        skipped,
        if passed { "PASS" } else { "FAIL" }
    ));
    table.records = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.axis),
                fmt_num(r.y),
                fmt_num(r.series),
                fmt_num(r.oracle),
                r.oracle_stderr.map(fmt_num).unwrap_or_default(),
                fmt_num(r.abs_error),
            ]
        })
        .collect();
    Ok(ComparisonReport { rows, skipped, max_error, mean_error, tolerance, passed, table })
}

/// One invariant with its measured value and the bound it is held to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, threshold: format!("<= {bound:e}"), passed: value <= bound }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, threshold: format!("in [{lo}, {hi}]"), passed: (lo..=hi).contains(&value) }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self { name: name.into(), value: f64::NAN, threshold: format!("error: {err}"), passed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn checked(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, &e))
}

fn validation_models() -> Result<Vec<BathModel>> {
    Ok(vec![
        BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.1)?),
        BathModel::Bosonic(QuantumBathModel::zero_temperature(1.0, 0.25)?),
        BathModel::Bosonic(QuantumBathModel::new(1.0, 0.25, 0.1)?),
    ])
}

fn presets() -> [MeasurementScheme; 3] {
    [MeasurementScheme::zzz(), MeasurementScheme::xzx(), MeasurementScheme::xxx()]
}

/// Fixed invariant suite; every check runs even if an earlier one fails.
pub fn validate(run: &RunOptions) -> ValidationReport {
    let tasks: Vec<(&str, fn() -> Result<Check>)> = vec![
        ("projector algebra", || {
            let pm = PseudomodeModel::with_cutoff(&QuantumBathModel::new(1.0, 0.25, 0.1)?, 3);
            let defect = ProjectorPair::new(&pm.thermal_state(), 2).algebra_defect();
            Ok(Check::at_most("projector algebra", defect, 1e-12))
        }),
        ("appendix irrelevant-part step ratio", || {
            let m = ExchangeModel::default();
            let conv = appendix_convergence(|s| m.generator(s), &m.vacuum(), &m.correlated_state(), 2, 0.0, 1.5, 40)?;
            Ok(Check::within("appendix irrelevant-part step ratio", conv.irrelevant_ratio, 3.5, 4.5))
        }),
        ("appendix relevant-part step ratio", || {
            let m = ExchangeModel::default();
            let conv = appendix_convergence(|s| m.generator(s), &m.vacuum(), &m.correlated_state(), 2, 0.0, 1.5, 40)?;
            Ok(Check::within("appendix relevant-part step ratio", conv.relevant_ratio, 3.5, 4.5))
        }),
        ("joint normalization", || {
            let rho0 = DensityMatrix::qubit_superposition(0.8)?;
            let mut worst: f64 = 0.0;
            for model in validation_models()? {
                for scheme in presets() {
                    let e = SeriesEngine::for_model(model, scheme, &rho0, 3.0, Default::default(), Default::default())?;
                    for q in [QuadratureOptions::fixed(11), QuadratureOptions::default()] {
                        let r = e.joint_prob_with(1.3, 0.7, 3, &q)?;
                        worst = worst.max((r.joint.total() - 1.0).abs());
                        for part in &r.per_order {
                            worst = worst.max(part.total().abs());
                        }
                    }
                }
            }
            Ok(Check::at_most("joint normalization", worst, 1e-12))
        }),
        ("cpf from slot equals cpf from joint", || {
            let rho0 = DensityMatrix::qubit_superposition(0.8)?;
            let mut worst: f64 = 0.0;
            for model in validation_models()? {
                for scheme in presets() {
                    let e = SeriesEngine::for_model(model, scheme, &rho0, 3.0, Default::default(), Default::default())?;
                    let joint = e.joint_prob_perturbative(1.1, 0.9, 3)?.joint;
                    for y in 0..2 {
                        let direct = e.cpf_perturbative(1.1, 0.9, y, 3)?.value;
                        worst = worst.max((direct - cpf_from_joint(&joint, y, 1e-12)?).abs());
                    }
                }
            }
            Ok(Check::at_most("cpf from slot equals cpf from joint", worst, 1e-10))
        }),
        ("markov term has zero cpf", || {
            let rho0 = DensityMatrix::qubit_superposition(0.65)?;
            let mut worst: f64 = 0.0;
            for model in validation_models()? {
                for scheme in presets() {
                    let e = SeriesEngine::for_model(model, scheme, &rho0, 3.0, Default::default(), Default::default())?;
                    let m = e.markov_term(0.8, 1.1)?;
                    for y in 0..2 {
                        worst = worst.max(cpf_from_joint(&m, y, 1e-12)?.abs());
                    }
                }
            }
            Ok(Check::at_most("markov term has zero cpf", worst, 1e-14))
        }),
        ("zero-temperature y=+1 cpf", || {
            let model = QuantumBathModel::zero_temperature(1.0, 0.125)?;
            let rho0 = DensityMatrix::qubit_superposition(0.8)?;
            let mut worst: f64 = 0.0;
            for scheme in [MeasurementScheme::zzz(), MeasurementScheme::xzx()] {
                let e = SeriesEngine::for_model(
                    BathModel::Bosonic(model),
                    scheme.clone(),
                    &rho0,
                    3.0,
                    Default::default(),
                    Default::default(),
                )?;
                worst = worst.max(e.cpf_perturbative(1.0, 1.0, 0, 3)?.value.abs());
                worst = worst.max(pseudomode_joint_prob(&model, &scheme, &rho0, 1.0, 1.0, None)?.cpf(0)?.abs());
            }
            Ok(Check::at_most("zero-temperature y=+1 cpf", worst, 1e-9))
        }),
        ("dephasing first order", || {
            let rho0 = DensityMatrix::qubit_superposition(1.0)?;
            let model = BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.05)?);
            let e = SeriesEngine::for_model(model, MeasurementScheme::xxx(), &rho0, 3.0, Default::default(), SeriesOptions::default())?;
            let r = e.joint_prob_perturbative(1.0, 1.0, 1)?;
            let worst = r.per_order[0].values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            Ok(Check::at_most("dephasing first order", worst, 1e-12))
        }),
        ("pseudomode decay amplitude", || {
            let mut worst: f64 = 0.0;
            for tc in [0.125, 0.5] {
                let m = QuantumBathModel::zero_temperature(1.0, tc)?;
                let pm = PseudomodeModel::from_bath(&m);
                let h = 0.01;
                let channels = pm.reduced_channels(h, 200)?;
                let excited = projector_onto(&[c(1.0, 0.0), c(0.0, 0.0)]);
                for (k, ch) in channels.iter().enumerate() {
                    let g = decay_amplitude(m.gamma, m.tau_c, k as f64 * h);
                    worst = worst.max((ch.apply(&excited)[(0, 0)].re - g * g).abs());
                }
            }
            worst = worst.max((decay_amplitude(1.0, 0.5, 1.0) - 2.0 * (-1.0f64).exp()).abs());
            Ok(Check::at_most("pseudomode decay amplitude", worst, 1e-6))
        }),
        ("pseudomode correlation functions", || {
            let times = [0.0, 0.1, 0.4, 1.0];
            let mut worst: f64 = 0.0;
            for m in [QuantumBathModel::zero_temperature(1.0, 0.5)?, QuantumBathModel::new(1.0, 0.25, 0.1)?] {
                let r = mode_correlation_check(&m, 12, &times)?;
                worst = worst.max(r.down_error).max(r.up_error);
            }
            Ok(Check::at_most("pseudomode correlation functions", worst, 1e-8))
        }),
    ];
    let checks: Vec<Check> = if run.parallel {
        tasks.par_iter().map(|(name, f)| checked(name, f)).collect()
    } else {
        tasks.iter().map(|(name, f)| checked(name, f)).collect()
    };
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { checks, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureFile {
    pub name: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    #[serde(skip)]
    pub table: CsvTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureBundle {
    pub figure: u8,
    pub files: Vec<FigureFile>,
    pub checks: Vec<Check>,
}

fn figure_configs(figure: u8) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    match figure {
        1 => {
            for tc in [0.05, 0.1] {
                out.push((
                    format!("fig1_xxx_gtc{tc}.csv"),
                    json!({
                        "model": {"type": "dephasing", "gamma": 1.0, "tau_c": tc},
                        "scheme": {"preset": "xxx"},
                        "initial_state": {"p": 1.0},
                        "oracle": {"kind": "gaussian"}
                    }),
                ));
            }
        }
        2 => {
            for scheme in ["zzz", "xzx"] {
                for tc in [0.125, 0.5] {
                    out.push((
                        format!("fig2_{scheme}_gtc{tc}.csv"),
                        json!({
                            "model": {"type": "bosonic", "gamma": 1.0, "tau_c": tc, "nbar": 0.0},
                            "scheme": {"preset": scheme},
                            "initial_state": {"p": 0.8},
                            "conditions": [-1.0],
                            "oracle": {"kind": "pseudomode"}
                        }),
                    ));
                }
            }
        }
        3 => {
            for scheme in ["zzz", "xzx"] {
                for nbar in FIG3_NBAR {
                    out.push((
                        format!("fig3_{scheme}_nbar{nbar}.csv"),
                        json!({
                            "model": {"type": "bosonic", "gamma": 1.0, "tau_c": 0.125, "nbar": nbar},
                            "scheme": {"preset": scheme},
                            "initial_state": {"p": 0.8}
                        }),
                    ));
                }
            }
        }
        other => return Err(Error::Config(format!("unknown figure {other} (expected 1, 2 or 3)"))),
    }
    Ok(out)
}

const FIG3_NBAR: [f64; 3] = [0.05, 0.1, 0.2];

fn max_amplitude(rows: &[ResultRow], y: f64) -> f64 {
    rows.iter().filter(|r| r.y == y).filter_map(|r| r.total).fold(0.0, |a, v| a.max(v.abs()))
}

/// Data behind one figure: one CSV per parameter set, with the qualitative
/// statements about the curves evaluated as checks.
pub fn figure_data(figure: u8, overrides: &[String], run: &RunOptions) -> Result<FigureBundle> {
    let mut files = Vec::new();
    for (name, base) in figure_configs(figure)? {
        let config = ExperimentConfig::from_value(base, overrides)?;
        log::info!("figure {figure}: {name}");
        let out = simulate(&config, run)?;
        files.push(FigureFile { name, config, rows: out.rows, table: out.table });
    }
    let mut checks = Vec::new();
    match figure {
        1 => {
            let mut worst: f64 = 0.0;
            for f in &files {
                let (plus, minus): (Vec<&ResultRow>, Vec<&ResultRow>) = f.rows.iter().partition(|r| r.y > 0.0);
                for (a, b) in plus.iter().zip(&minus) {
                    if let (Some(x), Some(y)) = (a.total, b.total) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
            checks.push(Check::at_most("fig1 cpf independent of y", worst, 1e-10));
        }
        3 => {
            for scheme in ["zzz", "xzx"] {
                let of = |nbar: f64| {
                    files.iter().find(|f| f.name == format!("fig3_{scheme}_nbar{nbar}.csv")).expect("file exists")
                };
                let plus: Vec<f64> = FIG3_NBAR.iter().map(|&n| max_amplitude(&of(n).rows, 1.0)).collect();
                let increasing = plus.windows(2).all(|w| w[1] > w[0]);
                checks.push(Check {
                    name: format!("fig3 {scheme} y=+1 amplitude increases with nbar"),
                    value: plus[2] - plus[0],
                    threshold: "strictly increasing".into(),
                    passed: increasing,
                });
            }
        }
        _ => {}
    }
    Ok(FigureBundle { figure, files, checks })
}
