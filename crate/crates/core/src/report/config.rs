//! Experiment configuration: a JSON document with defaults, dotted-path
//! overrides and validation ahead of any computation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bath::{BathModel, ClassicalNoiseModel, FiniteTemperatureMethod, QuantumBathModel};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementScheme, MeasurementSet};
use crate::operator::{c, ComplexMatrix, DensityMatrix};
use crate::series::{QuadratureOptions, SeriesOptions, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dephasing,
    Bosonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub gamma: f64,
    pub tau_c: f64,
    #[serde(default)]
    pub nbar: f64,
    #[serde(default)]
    pub finite_t_method: FiniteTemperatureMethod,
}

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixConfig = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub operators: Vec<MatrixConfig>,
    pub outcomes: Vec<f64>,
}

/// Either a named preset or three explicit measurement sets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<MeasurementConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub middle: Option<MeasurementConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last: Option<MeasurementConfig>,
}

/// `p` for `√p|+⟩ + √(1−p)|−⟩`, or a full density matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// End of the `t = τ` sweep on the emitted time axis.
    pub t_max: f64,
    pub n_points: usize,
    pub quadrature_nodes: usize,
    /// Refinement floor for the quadrature; 0 keeps `quadrature_nodes`.
    pub min_nodes_per_tau_c: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let q = QuadratureOptions::default();
        Self { t_max: 4.0, n_points: 41, quadrature_nodes: q.nodes_per_axis, min_nodes_per_tau_c: q.min_nodes_per_tau_c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub max_order: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { max_order: MAX_ORDER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    None,
    Gaussian,
    MonteCarlo,
    Pseudomode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fock_cutoff: Option<usize>,
    /// Largest acceptable `|CPF_series − CPF_oracle|` for `compare`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_n_traj() -> usize {
    100_000
}

fn default_tolerance() -> f64 {
    0.01
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { kind: OracleKind::None, n_traj: default_n_traj(), seed: 0, fock_cutoff: None, tolerance: default_tolerance() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub scheme: SchemeConfig,
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Middle outcome labels to condition on; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Sets `path = value` inside a JSON tree, creating intermediate objects.
/// The value is parsed as JSON and kept as a string when that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key.path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override path `{path}` has an empty component")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override `{path}`: `{}` is not an object", keys[..i].join(".")))
        })?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one component")
}

impl ExperimentConfig {
    /// Parses a JSON document, applies overrides and validates.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        Self::from_value(value, overrides)
    }

    pub fn from_value(mut value: Value, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: Self = serde_path_to_error::deserialize(value)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        for (name, v) in [("model.gamma", m.gamma), ("model.tau_c", m.tau_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(m.nbar >= 0.0 && m.nbar.is_finite()) {
            return Err(Error::Config(format!("model.nbar must be non-negative, got {}", m.nbar)));
        }
        if m.kind == ModelKind::Dephasing && m.nbar != 0.0 {
            return Err(Error::Config("model.nbar applies to the bosonic model only".into()));
        }
        if !(self.grid.t_max >= 0.0 && self.grid.t_max.is_finite()) {
            return Err(Error::Config(format!("grid.t_max must be non-negative, got {}", self.grid.t_max)));
        }
        self.quadrature().validate().map_err(|e| Error::Config(format!("grid: {e}")))?;
        if self.series.max_order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { requested: self.series.max_order, maximum: MAX_ORDER });
        }
        let o = &self.oracle;
        if o.kind == OracleKind::MonteCarlo && o.n_traj < 1000 {
            return Err(Error::Config(format!("oracle.n_traj must be at least 1000, got {}", o.n_traj)));
        }
        if !(o.tolerance > 0.0) {
            return Err(Error::Config(format!("oracle.tolerance must be positive, got {}", o.tolerance)));
        }
        let scheme = self.build_scheme()?;
        let rho0 = self.build_initial_state()?;
        if rho0.dim() != scheme.dim() {
            return Err(Error::Config(format!(
                "initial state has dimension {}, scheme acts on dimension {}",
                rho0.dim(),
                scheme.dim()
            )));
        }
        self.condition_indices(&scheme)?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<BathModel> {
        let m = &self.model;
        Ok(match m.kind {
            ModelKind::Dephasing => BathModel::Dephasing(ClassicalNoiseModel::new(m.gamma, m.tau_c)?),
            ModelKind::Bosonic => BathModel::Bosonic(QuantumBathModel::new(m.gamma, m.tau_c, m.nbar)?),
        })
    }

    pub fn build_scheme(&self) -> Result<MeasurementScheme> {
        let s = &self.scheme;
        match (&s.preset, &s.first, &s.middle, &s.last) {
            (Some(name), None, None, None) => {
                MeasurementScheme::preset(name).map_err(|e| Error::Config(format!("scheme.preset: {e}")))
            }
            (None, Some(f), Some(m), Some(l)) => {
                let set = |cfg: &MeasurementConfig, name: &str| {
                    let ops = cfg
                        .operators
                        .iter()
                        .map(|op| matrix(op, &format!("scheme.{name}")))
                        .collect::<Result<Vec<_>>>()?;
                    MeasurementSet::new(ops, cfg.outcomes.clone())
                        .map_err(|e| Error::Config(format!("scheme.{name}: {e}")))
                };
                MeasurementScheme::new(set(f, "first")?, set(m, "middle")?, set(l, "last")?)
                    .map_err(|e| Error::Config(format!("scheme: {e}")))
            }
            _ => Err(Error::Config(
                "scheme needs either `preset` or all of `first`, `middle`, `last`".into(),
            )),
        }
    }

    pub fn build_initial_state(&self) -> Result<DensityMatrix> {
        let s = &self.initial_state;
        let state = match (s.p, &s.matrix) {
            (Some(p), None) => DensityMatrix::qubit_superposition(p),
            (None, Some(m)) => DensityMatrix::new(matrix(m, "initial_state.matrix")?),
            _ => return Err(Error::Config("initial_state needs exactly one of `p`, `matrix`".into())),
        };
        state.map_err(|e| Error::Config(format!("initial_state: {e}")))
    }

    /// Middle outcome indices in configured order.
    pub fn condition_indices(&self, scheme: &MeasurementScheme) -> Result<Vec<usize>> {
        match &self.conditions {
            None => Ok((0..scheme.middle.len()).collect()),
            Some(labels) => labels
                .iter()
                .map(|&l| scheme.middle_index(l).map_err(|e| Error::Config(format!("conditions: {e}"))))
                .collect(),
        }
    }

    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            nodes_per_axis: self.grid.quadrature_nodes,
            min_nodes_per_tau_c: self.grid.min_nodes_per_tau_c,
        }
    }

    pub fn series_options(&self) -> SeriesOptions {
        SeriesOptions { quadrature: self.quadrature(), ..SeriesOptions::default() }
    }

    /// Rate that makes the emitted time axis dimensionless: `γ(n̄+1)`.
    pub fn time_scale(&self) -> f64 {
        self.model.gamma * (self.model.nbar + 1.0)
    }

    /// Points of the `t = τ` sweep on the emitted axis.
    pub fn axis_points(&self) -> Vec<f64> {
        let n = self.grid.n_points;
        match n {
            0 => vec![],
            1 => vec![0.0],
            _ => (0..n)
                .map(|k| if k + 1 == n { self.grid.t_max } else { self.grid.t_max * k as f64 / (n - 1) as f64 })
                .collect(),
        }
    }
}

fn matrix(rows: &MatrixConfig, what: &str) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what}: matrices must be square and non-empty")));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}
