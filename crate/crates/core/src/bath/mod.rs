//! Bath correlation models, system-side coupling and the reduced propagator.

mod interp;
mod propagator;
mod volterra;

pub use interp::{lagrange_weights, Table};
pub use propagator::{
    check_channel, decay_amplitude, dephasing_factor, dephasing_propagator, finite_t_propagator,
    zero_t_decay_propagator, FiniteTemperatureMethod, Provenance, UnperturbedPropagator,
};
pub use volterra::{solve_volterra, VolterraAmplitude};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{pauli_z, sigma_minus, sigma_plus, ComplexMatrix};

/// Classical stationary Gaussian noise with `χ(t) = (γ/2τc) e^{−|t|/τc}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalNoiseModel {
    pub gamma: f64,
    pub tau_c: f64,
}

/// Bosonic bath seen through `χ↓(t) = (n̄+1)(γ/2τc)e^{−|t|/τc}` and
/// `χ↑(t) = n̄(γ/2τc)e^{−|t|/τc}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumBathModel {
    pub gamma: f64,
    pub tau_c: f64,
    pub nbar: f64,
}

fn check_rates(gamma: f64, tau_c: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Validation(format!("γ must be finite and non-negative, got {gamma}")));
    }
    if !(tau_c > 0.0) || !tau_c.is_finite() {
        return Err(Error::Validation(format!("τc must be finite and positive, got {tau_c}")));
    }
    Ok(())
}

impl ClassicalNoiseModel {
    pub fn new(gamma: f64, tau_c: f64) -> Result<Self> {
        check_rates(gamma, tau_c)?;
        Ok(Self { gamma, tau_c })
    }

    pub fn chi(&self, dt: f64) -> f64 {
        self.gamma / (2.0 * self.tau_c) * (-dt.abs() / self.tau_c).exp()
    }

    /// Stationary variance `χ(0)`.
    pub fn variance(&self) -> f64 {
        self.gamma / (2.0 * self.tau_c)
    }
}

impl QuantumBathModel {
    pub fn new(gamma: f64, tau_c: f64, nbar: f64) -> Result<Self> {
        check_rates(gamma, tau_c)?;
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::Validation(format!("n̄ must be finite and non-negative, got {nbar}")));
        }
        Ok(Self { gamma, tau_c, nbar })
    }

    pub fn zero_temperature(gamma: f64, tau_c: f64) -> Result<Self> {
        Self::new(gamma, tau_c, 0.0)
    }

    pub fn chi_down(&self, dt: f64) -> f64 {
        (self.nbar + 1.0) * self.gamma / (2.0 * self.tau_c) * (-dt.abs() / self.tau_c).exp()
    }

    pub fn chi_up(&self, dt: f64) -> f64 {
        self.nbar * self.gamma / (2.0 * self.tau_c) * (-dt.abs() / self.tau_c).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    Classical,
    Down,
    Up,
}

/// Bath operator symbols attached to system coupling operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BathSymbol {
    /// Real classical noise `ξ(t)`.
    Noise,
    /// `B(t)`
    Lower,
    /// `B†(t)`
    Raise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTerm {
    pub system: ComplexMatrix,
    pub symbol: BathSymbol,
}

/// `H_I(t) = Σ_μ S^μ ⊗ B^μ(t)`
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStructure {
    pub terms: Vec<CouplingTerm>,
}

impl CouplingStructure {
    /// `σ_+ B(t) + σ_− B†(t)`
    pub fn dissipative() -> Self {
        Self {
            terms: vec![
                CouplingTerm { system: sigma_plus(), symbol: BathSymbol::Lower },
                CouplingTerm { system: sigma_minus(), symbol: BathSymbol::Raise },
            ],
        }
    }

    /// `ξ(t) σ_z`
    pub fn dephasing() -> Self {
        Self { terms: vec![CouplingTerm { system: pauli_z(), symbol: BathSymbol::Noise }] }
    }

    /// Total coupling is Hermitian: noise terms carry Hermitian operators and
    /// `B`/`B†` terms come in adjoint pairs.
    pub fn is_hermitian(&self) -> bool {
        self.terms.iter().all(|term| match term.symbol {
            BathSymbol::Noise => crate::operator::hermiticity_defect(&term.system) < 1e-12,
            BathSymbol::Lower | BathSymbol::Raise => {
                let partner = if term.symbol == BathSymbol::Lower { BathSymbol::Raise } else { BathSymbol::Lower };
                self.terms.iter().any(|other| {
                    other.symbol == partner
                        && crate::operator::max_abs(&(&other.system - term.system.adjoint())) < 1e-12
                })
            }
        })
    }
}

/// The environment as seen by the series and the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BathModel {
    Dephasing(ClassicalNoiseModel),
    Bosonic(QuantumBathModel),
}

impl BathModel {
    pub fn gamma(&self) -> f64 {
        match self {
            BathModel::Dephasing(m) => m.gamma,
            BathModel::Bosonic(m) => m.gamma,
        }
    }

    pub fn tau_c(&self) -> f64 {
        match self {
            BathModel::Dephasing(m) => m.tau_c,
            BathModel::Bosonic(m) => m.tau_c,
        }
    }

    pub fn nbar(&self) -> f64 {
        match self {
            BathModel::Dephasing(_) => 0.0,
            BathModel::Bosonic(m) => m.nbar,
        }
    }

    /// Same model with the coupling rate replaced.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Ok(match self {
            BathModel::Dephasing(m) => BathModel::Dephasing(ClassicalNoiseModel::new(gamma, m.tau_c)?),
            BathModel::Bosonic(m) => BathModel::Bosonic(QuantumBathModel::new(gamma, m.tau_c, m.nbar)?),
        })
    }

    pub fn coupling(&self) -> CouplingStructure {
        match self {
            BathModel::Dephasing(_) => CouplingStructure::dephasing(),
            BathModel::Bosonic(_) => CouplingStructure::dissipative(),
        }
    }

    pub fn correlation(&self, kind: CorrelationKind, dt: f64) -> Result<f64> {
        correlation_eval(self, kind, dt)
    }

    /// Zero-lag value of the two-point function `⟨first(t_a) second(t_b)⟩`
    /// for symbols in product order; the lag dependence is always
    /// `e^{−|t_a − t_b|/τc}`.
    pub fn pair_amplitude(&self, first: BathSymbol, second: BathSymbol) -> Result<f64> {
        use BathSymbol::*;
        match (self, first, second) {
            (BathModel::Dephasing(m), Noise, Noise) => Ok(m.chi(0.0)),
            (BathModel::Bosonic(m), Lower, Raise) => Ok(m.chi_down(0.0)),
            (BathModel::Bosonic(m), Raise, Lower) => Ok(m.chi_up(0.0)),
            (BathModel::Bosonic(_), Lower, Lower) | (BathModel::Bosonic(_), Raise, Raise) => Ok(0.0),
            (model, a, b) => Err(Error::Model(format!(
                "no pair rule for ({a:?}, {b:?}) in the {} model",
                model.name()
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BathModel::Dephasing(_) => "dephasing",
            BathModel::Bosonic(_) => "bosonic",
        }
    }
}

pub fn correlation_eval(model: &BathModel, kind: CorrelationKind, dt: f64) -> Result<f64> {
    match (model, kind) {
        (BathModel::Dephasing(m), CorrelationKind::Classical) => Ok(m.chi(dt)),
        (BathModel::Bosonic(m), CorrelationKind::Down) => Ok(m.chi_down(dt)),
        (BathModel::Bosonic(m), CorrelationKind::Up) => Ok(m.chi_up(dt)),
        (model, kind) => Err(Error::Model(format!(
            "correlation {kind:?} is not defined for the {} model",
            model.name()
        ))),
    }
}
