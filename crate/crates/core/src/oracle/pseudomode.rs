//! Single damped mode standing in for the Lorentzian bosonic bath.
//!
//! With `B = g a`, `g² = γ/2τc` and mode damping `κ = 2/τc`, the stationary
//! mode correlations are exactly `χ↓` and `χ↑`, so the qubit ⊗ mode Lindblad
//! dynamics reproduces every multi-time statistic of the original bath.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{OracleMeta, OracleResult};
use crate::bath::{QuantumBathModel, Table};
use crate::error::{Error, Result};
use crate::measurement::{JointDistribution, MeasurementScheme, PostFirstStates};
use crate::operator::{
    c, commutator_superop, identity, kron, partial_trace, sigma_minus, sigma_plus, trace,
    ComplexMatrix, DensityMatrix, StepPropagator, Subsystem, SuperOperator, C64,
};

/// Change in results below which the Fock cutoff counts as converged.
pub const CUTOFF_TOLERANCE: f64 = 1e-8;
const MAX_CUTOFF: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudomodeModel {
    pub g: f64,
    pub kappa: f64,
    pub nbar: f64,
    pub cutoff: usize,
}

/// Annihilation operator truncated to `0..=cutoff` quanta.
pub fn annihilation(cutoff: usize) -> ComplexMatrix {
    let n = cutoff + 1;
    ComplexMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

impl PseudomodeModel {
    pub fn from_bath(model: &QuantumBathModel) -> Self {
        let cutoff = if model.nbar == 0.0 { 4 } else { 8 };
        Self::with_cutoff(model, cutoff)
    }

    pub fn with_cutoff(model: &QuantumBathModel, cutoff: usize) -> Self {
        Self {
            g: (model.gamma / (2.0 * model.tau_c)).sqrt(),
            kappa: 2.0 / model.tau_c,
            nbar: model.nbar,
            cutoff,
        }
    }

    pub fn tau_c(&self) -> f64 {
        2.0 / self.kappa
    }

    pub fn mode_dim(&self) -> usize {
        self.cutoff + 1
    }

    /// Thermal mode state truncated at the cutoff and renormalized.
    pub fn thermal_state(&self) -> DensityMatrix {
        let n = self.mode_dim();
        let ratio = self.nbar / (self.nbar + 1.0);
        let weights: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = weights.iter().sum();
        let m = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(weights[i] / total, 0.0) } else { c(0.0, 0.0) });
        DensityMatrix::new(m).expect("thermal weights form a state")
    }

    /// Mode-only damping `κ(n̄+1)D[a] + κn̄D[a†]`.
    pub fn mode_generator(&self) -> SuperOperator {
        let a = annihilation(self.cutoff);
        let down = SuperOperator::dissipator(&a).scale(c(self.kappa * (self.nbar + 1.0), 0.0));
        if self.nbar == 0.0 {
            return down;
        }
        down.add(&SuperOperator::dissipator(&a.adjoint()).scale(c(self.kappa * self.nbar, 0.0)))
    }

    /// Qubit ⊗ mode generator.
    pub fn generator(&self) -> SuperOperator {
        let a = annihilation(self.cutoff);
        let id_s = identity(2);
        let h = (kron(&sigma_plus(), &a) + kron(&sigma_minus(), &a.adjoint())) * c(self.g, 0.0);
        let mut l = commutator_superop(&h).expect("coupling Hamiltonian is Hermitian");
        let big_a = kron(&id_s, &a);
        l = l.add(&SuperOperator::dissipator(&big_a).scale(c(self.kappa * (self.nbar + 1.0), 0.0)));
        if self.nbar > 0.0 {
            l = l.add(&SuperOperator::dissipator(&big_a.adjoint()).scale(c(self.kappa * self.nbar, 0.0)));
        }
        l
    }

    /// Largest step allowed for the embedding stepper.
    pub fn max_step(&self) -> f64 {
        self.tau_c() / 100.0
    }

    /// Both the coupling and the damping conserve the difference between ket
    /// and bra excitation numbers, so the generator splits into one block per
    /// difference.
    fn stepper(&self, step: f64) -> Result<StepPropagator> {
        let modes = self.mode_dim();
        let excitations: Vec<isize> = (0..2 * modes)
            .map(|i| (i % modes) as isize + if i < modes { 1 } else { 0 })
            .collect();
        StepPropagator::with_blocks(self.generator(), step, sectors(&excitations))
    }

    fn reduce_to_system(&self, m: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(m, (2, self.mode_dim()), Subsystem::System).expect("dimensions fixed")
    }

    fn reduce_to_mode(&self, m: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(m, (2, self.mode_dim()), Subsystem::Environment).expect("dimensions fixed")
    }

    /// Reduced qubit channel `Λ_{k h}` for `k = 0..=n`.
    pub fn reduced_channels(&self, step: f64, n: usize) -> Result<Vec<SuperOperator>> {
        let prop = self.stepper(step)?;
        let sigma = self.thermal_state();
        let mut columns: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(4);
        for col in 0..4 {
            let mut unit = ComplexMatrix::zeros(2, 2);
            unit[(col % 2, col / 2)] = c(1.0, 0.0);
            let traj = prop.trajectory(&kron(&unit, sigma.matrix()), n);
            columns.push(traj.iter().map(|m| self.reduce_to_system(m)).collect());
        }
        Ok((0..=n)
            .map(|k| {
                let mut m = DMatrix::zeros(4, 4);
                for (col, images) in columns.iter().enumerate() {
                    for (row, v) in images[k].as_slice().iter().enumerate() {
                        m[(row, col)] = *v;
                    }
                }
                SuperOperator::from_matrix(2, m).expect("4x4 qubit map")
            })
            .collect())
    }

    /// `P(z, y, x)` for one `(t, τ)` pair at this cutoff.
    pub fn joint_table(
        &self,
        scheme: &MeasurementScheme,
        rho0: &DensityMatrix,
        t: f64,
        tau: f64,
    ) -> Result<JointDistribution> {
        let prop = self.stepper(self.max_step())?;
        let states = PostFirstStates::build(rho0, &scheme.first)?;
        let sigma = self.thermal_state();
        let id_m = identity(self.mode_dim());
        let (nz, ny, nx) = scheme.shape();
        let mut values = vec![0.0; nz * ny * nx];
        for x in 0..nx {
            let after_t = prop.evolve(&kron(&states.per_outcome[x], sigma.matrix()), t);
            for y in 0..ny {
                let e_y = kron(scheme.middle.effect(y), &id_m);
                let conditioned = self.reduce_to_mode(&(&e_y * &after_t));
                let restart = kron(scheme.rho_y(y), &conditioned);
                let after_tau = prop.evolve(&restart, tau);
                let reduced = self.reduce_to_system(&after_tau);
                for z in 0..nz {
                    values[(z * ny + y) * nx + x] = trace(&(scheme.last.effect(z) * &reduced)).re;
                }
            }
        }
        Ok(JointDistribution::from_fn(scheme, |z, y, x| values[(z * ny + y) * nx + x]))
    }

    /// `(⟨a(s)a†(0)⟩, ⟨a†(s)a(0)⟩)` in the stationary mode state, by
    /// quantum regression.
    pub fn mode_correlations(&self, times: &[f64]) -> Result<Vec<(C64, C64)>> {
        let quanta: Vec<isize> = (0..self.mode_dim() as isize).collect();
        let prop = StepPropagator::with_blocks(self.mode_generator(), self.max_step(), sectors(&quanta))?;
        let a = annihilation(self.cutoff);
        let rho = self.thermal_state();
        let seed_down = a.adjoint() * rho.matrix();
        let seed_up = &a * rho.matrix();
        Ok(times
            .iter()
            .map(|&s| {
                let down = trace(&(&a * prop.evolve(&seed_down, s)));
                let up = trace(&(a.adjoint() * prop.evolve(&seed_up, s)));
                (down, up)
            })
            .collect())
    }
}

/// Vectorized indices grouped by ket-minus-bra excitation number.
fn sectors(excitations: &[isize]) -> Vec<Vec<usize>> {
    let d = excitations.len();
    let top = *excitations.iter().max().unwrap_or(&0);
    let mut out = vec![Vec::new(); (2 * top + 1) as usize];
    for j in 0..d {
        for i in 0..d {
            out[(excitations[i] - excitations[j] + top) as usize].push(i + j * d);
        }
    }
    out
}

/// Repeats `compute` with the cutoff raised by two until successive results
/// agree within [`CUTOFF_TOLERANCE`]; returns the converged model and result.
pub fn converge_cutoff<T>(
    model: &QuantumBathModel,
    start: Option<usize>,
    compute: impl Fn(&PseudomodeModel) -> Result<T>,
    distance: impl Fn(&T, &T) -> f64,
) -> Result<(PseudomodeModel, T)> {
    let mut pm = match start {
        Some(n) => PseudomodeModel::with_cutoff(model, n),
        None => PseudomodeModel::from_bath(model),
    };
    let mut current = compute(&pm)?;
    while pm.cutoff + 2 <= MAX_CUTOFF {
        let next_pm = PseudomodeModel::with_cutoff(model, pm.cutoff + 2);
        let next = compute(&next_pm)?;
        if distance(&current, &next) < CUTOFF_TOLERANCE {
            return Ok((next_pm, next));
        }
        pm = next_pm;
        current = next;
    }
    Err(Error::Accuracy(format!(
        "pseudomode results did not converge in the Fock cutoff (reached {MAX_CUTOFF})"
    )))
}

/// Exact `P(z, y, x)` from the pseudomode embedding.
pub fn pseudomode_joint_prob(
    model: &QuantumBathModel,
    scheme: &MeasurementScheme,
    rho0: &DensityMatrix,
    t: f64,
    tau: f64,
    cutoff: Option<usize>,
) -> Result<OracleResult> {
    if t < 0.0 || tau < 0.0 {
        return Err(Error::Argument(format!("times must be non-negative (t = {t}, τ = {tau})")));
    }
    let (pm, joint) = converge_cutoff(
        model,
        cutoff,
        |pm| pm.joint_table(scheme, rho0, t, tau),
        |a, b| a.max_abs_diff(b),
    )?;
    Ok(OracleResult {
        joint,
        stderr: None,
        meta: OracleMeta { kind: "pseudomode".into(), n_traj: None, seed: None, fock_cutoff: Some(pm.cutoff) },
        covariance: None,
    })
}

/// Reduced channel table at spacing `step` covering `[0, s_max]`.
pub fn pseudomode_channel_table(
    model: &QuantumBathModel,
    s_max: f64,
    step: f64,
) -> Result<(PseudomodeModel, Table<ComplexMatrix>)> {
    let n = ((s_max / step).ceil() as usize).max(3);
    let (pm, channels) = converge_cutoff(
        model,
        None,
        |pm| pm.reduced_channels(step, n),
        |a, b| a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max),
    )?;
    Ok((pm, Table::new(step, channels.into_iter().map(|s| restore_trace(s.matrix().clone())).collect())))
}

/// Reset the population-sum row of a column-stacked qubit map so the trace
/// functional is preserved exactly; removes stepping roundoff.
fn restore_trace(mut m: ComplexMatrix) -> ComplexMatrix {
    for j in 0..4 {
        let target = if j == 0 || j == 3 { 1.0 } else { 0.0 };
        m[(3, j)] = c(target, 0.0) - m[(0, j)];
    }
    m
}

/// Deviation of the regression correlations from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCorrelationReport {
    /// `max |g²⟨a(s)a†⟩ − χ↓(s)|`
    pub down_error: f64,
    /// `max |g²⟨a†(s)a⟩ − χ↑(s)|`
    pub up_error: f64,
    /// `max |⟨a†(s)a⟩/⟨a(s)a†⟩ − n̄/(n̄+1)|`
    pub ratio_error: f64,
    pub cutoff: usize,
}

pub fn mode_correlation_check(model: &QuantumBathModel, cutoff: usize, times: &[f64]) -> Result<ModeCorrelationReport> {
    let pm = PseudomodeModel::with_cutoff(model, cutoff);
    let g2 = pm.g * pm.g;
    let corr = pm.mode_correlations(times)?;
    let expected_ratio = model.nbar / (model.nbar + 1.0);
    let mut report = ModeCorrelationReport { down_error: 0.0, up_error: 0.0, ratio_error: 0.0, cutoff };
    for (&s, (down, up)) in times.iter().zip(corr) {
        report.down_error = report.down_error.max((down * g2 - c(model.chi_down(s), 0.0)).norm());
        report.up_error = report.up_error.max((up * g2 - c(model.chi_up(s), 0.0)).norm());
        report.ratio_error = report.ratio_error.max((up / down - c(expected_ratio, 0.0)).norm());
    }
    Ok(report)
}
