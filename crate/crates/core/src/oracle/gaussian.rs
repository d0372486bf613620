//! Closed-form dephasing statistics.
//!
//! Along one noise realization the qubit is rotated about z by
//! `U(φ) = diag(e^{−iφ/2}, e^{iφ/2})`, with `φ₁ = 2∫₀ᵗξ` before the middle
//! measurement and `φ₂ = 2∫ₜ^{t+τ}ξ` after it. Each trace `Tr(E U(φ)ρU(φ)†)`
//! is a trigonometric polynomial `α + β₋e^{−iφ} + β₊e^{iφ}`, and the joint
//! Gaussian characteristic function of `(φ₁, φ₂)` averages their product.

use serde::Serialize;

use super::{OracleMeta, OracleResult};
use crate::bath::ClassicalNoiseModel;
use crate::error::{Error, Result};
use crate::measurement::{JointDistribution, MeasurementScheme, PostFirstStates};
use crate::operator::{ComplexMatrix, DensityMatrix, C64};

/// Second moments of the accumulated phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCovariance {
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

pub fn phase_covariance(model: &ClassicalNoiseModel, t: f64, tau: f64) -> PhaseCovariance {
    let (g, tc) = (model.gamma, model.tau_c);
    let var = |s: f64| 4.0 * g * (s + tc * (-s / tc).exp_m1());
    PhaseCovariance {
        var1: var(t),
        var2: var(tau),
        cov: 2.0 * g * tc * (-(-t / tc).exp_m1()) * (-(-tau / tc).exp_m1()),
    }
}

/// Fourier coefficients `[c₋₁, c₀, c₊₁]` of `φ ↦ Tr(E U(φ)ρU(φ)†)`.
fn fourier(e: &ComplexMatrix, rho: &ComplexMatrix) -> [C64; 3] {
    let alpha = e[(0, 0)] * rho[(0, 0)] + e[(1, 1)] * rho[(1, 1)];
    let minus = e[(1, 0)] * rho[(0, 1)];
    let plus = e[(0, 1)] * rho[(1, 0)];
    [minus, alpha, plus]
}

/// Joint table for prescribed phase moments.
pub fn gaussian_joint_with_covariance(
    scheme: &MeasurementScheme,
    rho0: &DensityMatrix,
    moments: PhaseCovariance,
) -> Result<JointDistribution> {
    if scheme.dim() != 2 {
        return Err(Error::Model("Gaussian dephasing oracle handles qubit schemes only".into()));
    }
    let states = PostFirstStates::build(rho0, &scheme.first)?;
    let PhaseCovariance { var1, var2, cov } = moments;
    let charfn = |a: f64, b: f64| (-0.5 * (a * a * var1 + b * b * var2 + 2.0 * a * b * cov)).exp();
    Ok(JointDistribution::from_fn(scheme, |z, y, x| {
        let first = fourier(scheme.middle.effect(y), &states.per_outcome[x]);
        let second = fourier(scheme.last.effect(z), scheme.rho_y(y));
        let mut acc = C64::new(0.0, 0.0);
        for (i, c1) in first.iter().enumerate() {
            for (j, c2) in second.iter().enumerate() {
                acc += c1 * c2 * charfn(i as f64 - 1.0, j as f64 - 1.0);
            }
        }
        acc.re
    }))
}

pub fn gaussian_dephasing_exact(
    model: &ClassicalNoiseModel,
    scheme: &MeasurementScheme,
    rho0: &DensityMatrix,
    t: f64,
    tau: f64,
) -> Result<OracleResult> {
    if t < 0.0 || tau < 0.0 {
        return Err(Error::Argument(format!("times must be non-negative (t = {t}, τ = {tau})")));
    }
    let joint = gaussian_joint_with_covariance(scheme, rho0, phase_covariance(model, t, tau))?;
    Ok(OracleResult {
        joint,
        stderr: None,
        meta: OracleMeta { kind: "gaussian".into(), n_traj: None, seed: None, fock_cutoff: None },
        covariance: None,
    })
}
