use serde::{Deserialize, Serialize};

use super::interp::Table;
use super::volterra::VolterraAmplitude;
use super::{ClassicalNoiseModel, QuantumBathModel};
use crate::error::{Error, Result};
use crate::operator::{c, ComplexMatrix, SuperOperator, C64, TOLERANCES};

/// How a propagator family was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    Volterra,
    PseudomodeTabulated,
    Ansatz,
}

/// Construction used for the finite-temperature propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiniteTemperatureMethod {
    #[default]
    Pseudomode,
    Ansatz,
}

/// `exp(−2γ[s − τc(1 − e^{−s/τc})])`
pub fn dephasing_factor(gamma: f64, tau_c: f64, s: f64) -> f64 {
    let inner = s + tau_c * (-s / tau_c).exp_m1();
    (-2.0 * gamma * inner).exp()
}

/// Closed-form amplitude for the exponential kernel `(γ/2τc)e^{−s/τc}`:
/// `G(s) = e^{−s/2τc}[cosh(ds/2) + sinh(ds/2)/(dτc)]`, `d² = 1/τc² − 2γ/τc`,
/// continued to the oscillating and critical regimes.
pub fn decay_amplitude(gamma: f64, tau_c: f64, s: f64) -> f64 {
    let a = s / (2.0 * tau_c);
    let r = 1.0 / (tau_c * tau_c) - 2.0 * gamma / tau_c;
    let u = r * s * s / 4.0;
    if u.abs() < 1e-3 {
        let ch = 1.0 + u / 2.0 + u * u / 24.0 + u * u * u / 720.0 + u.powi(4) / 40320.0;
        let sh = 1.0 + u / 6.0 + u * u / 120.0 + u * u * u / 5040.0 + u.powi(4) / 362880.0;
        return (-a).exp() * (ch + a * sh);
    }
    if u > 0.0 {
        let q = u.sqrt();
        // q < a, so both exponents are non-positive
        0.5 * ((1.0 + a / q) * (q - a).exp() + (1.0 - a / q) * (-q - a).exp())
    } else {
        let q = (-u).sqrt();
        (-a).exp() * (q.cos() + a * q.sin() / q)
    }
}

/// Qubit channel with excited-population survival `keep_excited`,
/// ground-population survival `keep_ground` and coherence factor on `ρ_{+−}`.
fn qubit_channel(keep_excited: f64, keep_ground: f64, coherence: C64) -> SuperOperator {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = c(keep_excited, 0.0);
    m[(3, 0)] = c(1.0 - keep_excited, 0.0);
    m[(3, 3)] = c(keep_ground, 0.0);
    m[(0, 3)] = c(1.0 - keep_ground, 0.0);
    m[(2, 2)] = coherence;
    m[(1, 1)] = coherence.conj();
    SuperOperator::from_matrix(2, m).expect("4x4 qubit map")
}

#[derive(Debug, Clone)]
enum Family {
    Dephasing(ClassicalNoiseModel),
    Decay(QuantumBathModel),
    DecayVolterra(VolterraAmplitude),
    Tabulated(Table<ComplexMatrix>),
    Ansatz { amplitude: VolterraAmplitude, excited_fraction: f64 },
}

/// Duration-indexed reduced propagator `s ↦ Λ_s`.
#[derive(Debug, Clone)]
pub struct UnperturbedPropagator {
    family: Family,
    provenance: Provenance,
    max_duration: f64,
}

impl UnperturbedPropagator {
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Longest duration the family can be evaluated at.
    pub fn max_duration(&self) -> f64 {
        self.max_duration
    }

    pub fn at(&self, s: f64) -> Result<SuperOperator> {
        if !(s >= 0.0) || s > self.max_duration * (1.0 + 1e-12) {
            return Err(Error::Argument(format!(
                "propagator evaluated at s = {s}, valid range [0, {}]",
                self.max_duration
            )));
        }
        Ok(match &self.family {
            Family::Dephasing(m) => {
                let d = dephasing_factor(m.gamma, m.tau_c, s);
                qubit_channel(1.0, 1.0, c(d, 0.0))
            }
            Family::Decay(m) => {
                let g = decay_amplitude(m.gamma, m.tau_c, s);
                qubit_channel(g * g, 1.0, c(g, 0.0))
            }
            Family::DecayVolterra(amp) => {
                let g = amp.eval(s);
                qubit_channel(g * g, 1.0, c(g, 0.0))
            }
            Family::Tabulated(table) => {
                SuperOperator::from_matrix(2, table.eval(s)).expect("tabulated 4x4 map")
            }
            Family::Ansatz { amplitude, excited_fraction } => {
                let g = amplitude.eval(s);
                let g2 = g * g;
                qubit_channel(
                    g2 + (1.0 - g2) * excited_fraction,
                    g2 + (1.0 - g2) * (1.0 - excited_fraction),
                    c(g, 0.0),
                )
            }
        })
    }

    /// Zero-temperature family from the trapezoidal Volterra solver.
    pub fn decay_from_volterra(model: &QuantumBathModel, s_max: f64) -> Result<Self> {
        if model.nbar != 0.0 {
            return Err(Error::Model("the Volterra decay family needs n̄ = 0".into()));
        }
        let amp = volterra_amplitude(model.gamma, model.tau_c, s_max, |s| model.chi_down(s))?;
        Ok(Self { family: Family::DecayVolterra(amp), provenance: Provenance::Volterra, max_duration: s_max })
    }
}

fn volterra_amplitude(
    gamma: f64,
    tau_c: f64,
    s_max: f64,
    kernel: impl Fn(f64) -> f64 + Copy,
) -> Result<VolterraAmplitude> {
    let scale = if gamma > 0.0 { tau_c.min(1.0 / gamma) } else { tau_c };
    VolterraAmplitude::solve(kernel, s_max, scale / 20.0, 1e-7)
}

pub fn dephasing_propagator(model: &ClassicalNoiseModel) -> UnperturbedPropagator {
    UnperturbedPropagator {
        family: Family::Dephasing(*model),
        provenance: Provenance::Analytic,
        max_duration: f64::INFINITY,
    }
}

pub fn zero_t_decay_propagator(model: &QuantumBathModel) -> Result<UnperturbedPropagator> {
    if model.nbar != 0.0 {
        return Err(Error::Model(format!(
            "zero-temperature propagator requested with n̄ = {}",
            model.nbar
        )));
    }
    Ok(UnperturbedPropagator {
        family: Family::Decay(*model),
        provenance: Provenance::Analytic,
        max_duration: f64::INFINITY,
    })
}

/// Finite-temperature family valid on `[0, s_max]`.
pub fn finite_t_propagator(
    model: &QuantumBathModel,
    s_max: f64,
    method: FiniteTemperatureMethod,
) -> Result<UnperturbedPropagator> {
    if !(s_max > 0.0) {
        return Err(Error::Argument(format!("tabulation range must be positive, got {s_max}")));
    }
    match method {
        FiniteTemperatureMethod::Pseudomode => {
            let scale = if model.gamma > 0.0 { model.tau_c.min(1.0 / model.gamma) } else { model.tau_c };
            let step = (scale / 50.0).min(model.tau_c / 100.0);
            let (_, table) = crate::oracle::pseudomode_channel_table(model, s_max, step)?;
            let prop = UnperturbedPropagator {
                max_duration: table.span(),
                family: Family::Tabulated(table),
                provenance: Provenance::PseudomodeTabulated,
            };
            if let Family::Tabulated(t) = &prop.family {
                for m in t.values() {
                    check_channel(&SuperOperator::from_matrix(2, m.clone())?)?;
                }
            }
            Ok(prop)
        }
        FiniteTemperatureMethod::Ansatz => {
            let down = *model;
            let amp = volterra_amplitude(model.gamma * (2.0 * model.nbar + 1.0), model.tau_c, s_max, move |s| {
                down.chi_down(s) + down.chi_up(s)
            })?;
            Ok(UnperturbedPropagator {
                max_duration: amp.span(),
                family: Family::Ansatz {
                    amplitude: amp,
                    excited_fraction: model.nbar / (2.0 * model.nbar + 1.0),
                },
                provenance: Provenance::Ansatz,
            })
        }
    }
}

/// Trace preservation within 1e−10 and Choi positivity within 1e−8.
pub fn check_channel(map: &SuperOperator) -> Result<()> {
    let tp = map.trace_defect();
    if tp > TOLERANCES.trace_preservation {
        return Err(Error::Accuracy(format!("channel not trace preserving (defect {tp:e})")));
    }
    let min_ev = map.choi_min_eigenvalue();
    if min_ev < -TOLERANCES.complete_positivity {
        return Err(Error::Accuracy(format!("channel not completely positive (Choi eigenvalue {min_ev:e})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DensityMatrix;

    #[test]
    fn dephasing_reference_value() {
        let d = dephasing_factor(1.0, 0.1, 1.0);
        assert!((d - (-2.0 * 0.9000045399929762f64).exp()).abs() < 1e-14);
        assert!((d - 0.1653).abs() < 1e-4);
        // white-noise limit
        assert!((dephasing_factor(1.0, 1e-7, 2.0) - (-4.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn dephasing_at_zero_is_identity() {
        let p = dephasing_propagator(&ClassicalNoiseModel::new(1.0, 0.1).unwrap());
        assert!(p.at(0.0).unwrap().max_abs_diff(&SuperOperator::identity(2)) < 1e-15);
    }

    #[test]
    fn decay_amplitude_regimes() {
        assert!((decay_amplitude(1.0, 0.5, 1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert_eq!(decay_amplitude(0.0, 0.3, 2.5), 1.0);
        assert!((decay_amplitude(1.0, 1e-6, 2.0) - (-1.0f64).exp()).abs() < 1e-5);
        // continuity across the critical point
        let below = decay_amplitude(1.0, 0.5 - 1e-9, 1.3);
        let above = decay_amplitude(1.0, 0.5 + 1e-9, 1.3);
        assert!((below - above).abs() < 1e-8);
        // large s, overdamped: no overflow
        assert!(decay_amplitude(0.1, 0.05, 500.0).is_finite());
    }

    #[test]
    fn closed_form_matches_volterra() {
        for tau_c in [0.05, 0.125, 0.5] {
            let m = QuantumBathModel::zero_temperature(1.0, tau_c).unwrap();
            let v = UnperturbedPropagator::decay_from_volterra(&m, 5.0).unwrap();
            let a = zero_t_decay_propagator(&m).unwrap();
            for k in 0..=50 {
                let s = 0.1 * k as f64;
                let diff = v.at(s).unwrap().max_abs_diff(&a.at(s).unwrap());
                assert!(diff < 1e-6, "τc = {tau_c}, s = {s}, diff = {diff:e}");
            }
        }
    }

    #[test]
    fn channels_are_cp_and_tp() {
        let m = QuantumBathModel::zero_temperature(1.0, 0.05).unwrap();
        let a = zero_t_decay_propagator(&m).unwrap();
        for s in [0.0, 0.3, 2.0, 40.0] {
            check_channel(&a.at(s).unwrap()).unwrap();
        }
        let ans = finite_t_propagator(&QuantumBathModel::new(1.0, 0.25, 0.2).unwrap(), 3.0, FiniteTemperatureMethod::Ansatz).unwrap();
        for s in [0.0, 0.7, 3.0] {
            check_channel(&ans.at(s).unwrap()).unwrap();
        }
        assert!(ans.at(3.5).is_err());
    }

    #[test]
    fn finite_t_at_zero_occupation_matches_zero_t() {
        let m = QuantumBathModel::zero_temperature(1.0, 0.125).unwrap();
        let tab = finite_t_propagator(&m, 3.0, FiniteTemperatureMethod::Pseudomode).unwrap();
        let exact = zero_t_decay_propagator(&m).unwrap();
        for s in [0.0, 0.01, 0.4567, 1.0, 2.999] {
            assert!(tab.at(s).unwrap().max_abs_diff(&exact.at(s).unwrap()) < 1e-6, "s = {s}");
        }
        assert!(tab.at(0.0).unwrap().max_abs_diff(&SuperOperator::identity(2)) < 1e-15);
    }

    #[test]
    fn finite_t_relaxes_to_detailed_balance() {
        let m = QuantumBathModel::new(1.0, 0.25, 0.1).unwrap();
        let tab = finite_t_propagator(&m, 12.0, FiniteTemperatureMethod::Pseudomode).unwrap();
        let rho = DensityMatrix::qubit_superposition(1.0).unwrap();
        let late = tab.at(12.0).unwrap().apply(rho.matrix());
        assert!((late[(0, 0)].re - 0.1 / 1.2).abs() < 1e-3);
        for s in [0.0, 1.0, 5.5, 12.0] {
            check_channel(&tab.at(s).unwrap()).unwrap();
        }
    }
}
