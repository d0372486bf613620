//! Measurement sets, three-measurement schemes and outcome statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    c, identity, max_abs, trace, validate_square, ComplexMatrix, DensityMatrix, SuperOperator, C64,
    TOLERANCES,
};

/// Measurement operators `Ω_i` with real outcome values `O_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    operators: Vec<ComplexMatrix>,
    effects: Vec<ComplexMatrix>,
    outcomes: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(operators: Vec<ComplexMatrix>, outcomes: Vec<f64>) -> Result<Self> {
        if operators.is_empty() || operators.len() != outcomes.len() {
            return Err(Error::Validation(format!(
                "measurement set needs one outcome per operator ({} operators, {} outcomes)",
                operators.len(),
                outcomes.len()
            )));
        }
        let dim = operators[0].nrows();
        for (i, op) in operators.iter().enumerate() {
            validate_square(op, &format!("measurement operator {i}"))?;
            if op.nrows() != dim {
                return Err(Error::Validation("measurement operators differ in dimension".into()));
            }
        }
        if outcomes.iter().any(|o| !o.is_finite()) {
            return Err(Error::Validation("outcome values must be finite".into()));
        }
        let effects: Vec<ComplexMatrix> = operators.iter().map(|o| o.adjoint() * o).collect();
        let total = effects.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, e| acc + e);
        let defect = max_abs(&(total - identity(dim)));
        if defect > TOLERANCES.measurement_completeness {
            return Err(Error::Validation(format!(
                "effects do not sum to the identity (defect {defect:e})"
            )));
        }
        Ok(Self { operators, effects, outcomes })
    }

    /// Rank-one projectors onto the given (normalized) vectors, outcomes in
    /// the same order.
    pub fn projective(vectors: &[Vec<C64>], outcomes: Vec<f64>) -> Result<Self> {
        let ops = vectors
            .iter()
            .map(|v| crate::operator::projector_onto(v))
            .collect();
        Self::new(ops, outcomes)
    }

    /// σ_z eigenbasis, outcomes (+1, −1).
    pub fn z_basis() -> Self {
        Self::projective(
            &[vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]],
            vec![1.0, -1.0],
        )
        .expect("computational basis is complete")
    }

    /// σ_x eigenbasis, outcomes (+1, −1).
    pub fn x_basis() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::projective(
            &[vec![c(s, 0.), c(s, 0.)], vec![c(s, 0.), c(-s, 0.)]],
            vec![1.0, -1.0],
        )
        .expect("x basis is complete")
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn operator(&self, i: usize) -> &ComplexMatrix {
        &self.operators[i]
    }

    /// `E_i = Ω_i†Ω_i`
    pub fn effect(&self, i: usize) -> &ComplexMatrix {
        &self.effects[i]
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.outcomes[i]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn is_projective(&self) -> bool {
        self.operators
            .iter()
            .zip(&self.effects)
            .all(|(o, e)| max_abs(&(e - o)) <= TOLERANCES.measurement_completeness)
    }

    /// Projective with every effect of unit trace, so that `E_y` is itself
    /// the collapsed state.
    pub fn is_rank_one_projective(&self) -> bool {
        self.is_projective()
            && self
                .effects
                .iter()
                .all(|e| (trace(e) - c(1.0, 0.0)).norm() <= TOLERANCES.measurement_completeness)
    }
}

/// First, middle and last measurement of a three-time protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScheme {
    pub first: MeasurementSet,
    pub middle: MeasurementSet,
    pub last: MeasurementSet,
}

impl MeasurementScheme {
    pub fn new(first: MeasurementSet, middle: MeasurementSet, last: MeasurementSet) -> Result<Self> {
        if first.dim() != middle.dim() || middle.dim() != last.dim() {
            return Err(Error::Validation("measurement sets act on different dimensions".into()));
        }
        if !middle.is_projective() {
            return Err(Error::Validation("middle measurement must be projective".into()));
        }
        if !middle.is_rank_one_projective() {
            return Err(Error::Validation(
                "middle measurement must consist of rank-one projectors".into(),
            ));
        }
        Ok(Self { first, middle, last })
    }

    pub fn zzz() -> Self {
        Self::new(MeasurementSet::z_basis(), MeasurementSet::z_basis(), MeasurementSet::z_basis())
            .expect("preset is valid")
    }

    pub fn xzx() -> Self {
        Self::new(MeasurementSet::x_basis(), MeasurementSet::z_basis(), MeasurementSet::x_basis())
            .expect("preset is valid")
    }

    pub fn xxx() -> Self {
        Self::new(MeasurementSet::x_basis(), MeasurementSet::x_basis(), MeasurementSet::x_basis())
            .expect("preset is valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "zzz" => Ok(Self::zzz()),
            "xzx" => Ok(Self::xzx()),
            "xxx" => Ok(Self::xxx()),
            other => Err(Error::Config(format!(
                "unknown scheme preset '{other}' (expected zzz, xzx or xxx)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    /// Collapsed system state after middle outcome `y`.
    pub fn rho_y(&self, y: usize) -> &ComplexMatrix {
        self.middle.effect(y)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.last.len(), self.middle.len(), self.first.len())
    }

    /// Index of the middle outcome carrying `label`.
    pub fn middle_index(&self, label: f64) -> Result<usize> {
        self.middle
            .outcomes()
            .iter()
            .position(|&o| o == label)
            .ok_or_else(|| Error::Argument(format!("middle measurement has no outcome {label}")))
    }
}

/// Unnormalized post-first-measurement states `ρ̃_x = Ω_x ρ0 Ω_x†`.
#[derive(Debug, Clone)]
pub struct PostFirstStates {
    pub per_outcome: Vec<ComplexMatrix>,
    pub total: ComplexMatrix,
}

impl PostFirstStates {
    pub fn build(rho0: &DensityMatrix, first: &MeasurementSet) -> Result<Self> {
        if rho0.dim() != first.dim() {
            return Err(Error::Validation(format!(
                "initial state has dimension {}, measurement {}",
                rho0.dim(),
                first.dim()
            )));
        }
        let per_outcome: Vec<ComplexMatrix> = (0..first.len())
            .map(|i| {
                let o = first.operator(i);
                o * rho0.matrix() * o.adjoint()
            })
            .collect();
        let total = per_outcome
            .iter()
            .fold(ComplexMatrix::zeros(rho0.dim(), rho0.dim()), |acc, r| acc + r);
        Ok(Self { per_outcome, total })
    }

    /// `P(x) = Tr ρ̃_x`
    pub fn probability(&self, x: usize) -> f64 {
        trace(&self.per_outcome[x]).re
    }

    pub fn len(&self) -> usize {
        self.per_outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_outcome.is_empty()
    }
}

/// `P(y) = Σ_x Tr(E_y Λ_t[ρ̃_x])`
pub fn prob_y(states: &PostFirstStates, lambda_t: &SuperOperator, e_y: &ComplexMatrix) -> f64 {
    trace(&(e_y * lambda_t.apply(&states.total))).re
}

/// The auxiliary matrix `ρ̃_yx` together with a degeneracy flag.
#[derive(Debug, Clone)]
pub struct RhoYx {
    pub matrix: ComplexMatrix,
    /// Set when `P(x) = 0` or `ρ̃_x ∝ ρ̃`; the matrix then vanishes and the
    /// branch carries zero weight.
    pub degenerate: bool,
}

/// `ρ̃_yx = ρ̃_x Tr(E_y Λ_t[ρ̃]) − ρ̃ Tr(E_y Λ_t[ρ̃_x])`
pub fn rho_yx(
    states: &PostFirstStates,
    lambda_t: &SuperOperator,
    e_y: &ComplexMatrix,
    x: usize,
) -> Result<RhoYx> {
    if x >= states.len() {
        return Err(Error::Argument(format!("first-measurement outcome index {x} out of range")));
    }
    if !lambda_t.is_trace_preserving() {
        return Err(Error::Validation(format!(
            "propagator is not trace preserving (defect {:e})",
            lambda_t.trace_defect()
        )));
    }
    let rx = &states.per_outcome[x];
    let px = states.probability(x);
    if px.abs() <= TOLERANCES.conditioning {
        let d = rx.nrows();
        return Ok(RhoYx { matrix: ComplexMatrix::zeros(d, d), degenerate: true });
    }
    let p_y = trace(&(e_y * lambda_t.apply(&states.total)));
    let p_yx = trace(&(e_y * lambda_t.apply(rx)));
    let matrix = rx * p_y - &states.total * p_yx;
    let proportional = max_abs(&(rx / c(px, 0.0) - &states.total)) <= TOLERANCES.conditioning;
    Ok(RhoYx { matrix, degenerate: proportional })
}

/// Joint table `P[z][y][x]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    shape: (usize, usize, usize),
    values: Vec<f64>,
    pub z_outcomes: Vec<f64>,
    pub y_labels: Vec<f64>,
    pub x_outcomes: Vec<f64>,
}

/// Two- and one-point marginals of a joint table.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    /// `P(z, y)` indexed `[z][y]`
    pub zy: Vec<Vec<f64>>,
    /// `P(y, x)` indexed `[y][x]`
    pub yx: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
}

impl JointDistribution {
    pub fn from_fn(scheme: &MeasurementScheme, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let (nz, ny, nx) = scheme.shape();
        let mut values = Vec::with_capacity(nz * ny * nx);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    values.push(f(z, y, x));
                }
            }
        }
        Self {
            shape: (nz, ny, nx),
            values,
            z_outcomes: scheme.last.outcomes().to_vec(),
            y_labels: scheme.middle.outcomes().to_vec(),
            x_outcomes: scheme.first.outcomes().to_vec(),
        }
    }

    /// Raw table with explicit outcome values, checked for shape,
    /// entries `≥ −tol` and total `1 ± tol`.
    pub fn from_values(
        values: Vec<f64>,
        z_outcomes: Vec<f64>,
        y_labels: Vec<f64>,
        x_outcomes: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        let shape = (z_outcomes.len(), y_labels.len(), x_outcomes.len());
        if values.len() != shape.0 * shape.1 * shape.2 {
            return Err(Error::Validation(format!(
                "joint table has {} entries, expected {}",
                values.len(),
                shape.0 * shape.1 * shape.2
            )));
        }
        let out = Self { shape, values, z_outcomes, y_labels, x_outcomes };
        out.validate(tol)?;
        Ok(out)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(v) = self.values.iter().find(|v| !v.is_finite() || **v < -tol) {
            return Err(Error::Validation(format!("joint table entry {v} below -{tol:e}")));
        }
        let total = self.total();
        if (total - 1.0).abs() > tol.max(TOLERANCES.trace) {
            return Err(Error::Validation(format!("joint table sums to {total}")));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.shape.1 + y) * self.shape.2 + x
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f64 {
        self.values[self.index(z, y, x)]
    }

    pub fn set(&mut self, z: usize, y: usize, x: usize, value: f64) {
        let i = self.index(z, y, x);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &JointDistribution) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn marginals(&self) -> Marginals {
        marginals(self)
    }
}

pub fn marginals(j: &JointDistribution) -> Marginals {
    let (nz, ny, nx) = j.shape;
    let mut zy = vec![vec![0.0; ny]; nz];
    let mut yx = vec![vec![0.0; nx]; ny];
    let mut y_marg = vec![0.0; ny];
    let mut x_marg = vec![0.0; nx];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = j.get(z, y, x);
                zy[z][y] += p;
                yx[y][x] += p;
            }
        }
    }
    for y in 0..ny {
        y_marg[y] = yx[y].iter().sum();
        for x in 0..nx {
            x_marg[x] += yx[y][x];
        }
    }
    Marginals { zy, yx, y: y_marg, x: x_marg }
}

/// Conditional past-future correlation for one middle outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CPFResult {
    pub y_label: f64,
    pub t: f64,
    pub tau: f64,
    pub value: f64,
    /// Contribution of each series order, starting at order 1. Empty for
    /// non-perturbative sources.
    pub per_order: Vec<f64>,
}

/// `Σ_{zx} O_z O_x [P(z,y,x)P(y) − P(z,y)P(y,x)] / P(y)²`
pub fn cpf_from_joint(j: &JointDistribution, y: usize, epsilon: f64) -> Result<f64> {
    let m = j.marginals();
    let py = m.y[y];
    if py <= epsilon {
        return Err(Error::ConditioningImpossible { label: j.y_labels[y], probability: py });
    }
    let (nz, _, nx) = j.shape;
    let mut acc = 0.0;
    for z in 0..nz {
        for x in 0..nx {
            let num = j.get(z, y, x) * py - m.zy[z][y] * m.yx[y][x];
            acc += j.z_outcomes[z] * j.x_outcomes[x] * num;
        }
    }
    Ok(acc / (py * py))
}
