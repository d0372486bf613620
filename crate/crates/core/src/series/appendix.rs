//! Numerical check of the formal projector solutions for the irrelevant
//! and relevant parts of a bipartite state:
//!
//! `Qρ_t = G_{t,t₀}Qρ₀ + ∫ G_{t,t′} Q L(t′) P ρ_{t′} dt′`
//! `Pρ_t = P E_{t,t₀} P ρ₀ + ∫ P E_{t,t′} P L(t′) G_{t′,t₀} Q ρ₀ dt′`
//!
//! with `E = T exp ∫L` and `G = T exp ∫QL`, every propagator built by
//! [`time_ordered_exp`] on one shared grid and the `t′` integrals done by
//! the composite trapezoid rule on its nodes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::annihilation;
use crate::operator::{
    c, identity, kron, projector_onto, sigma_minus, sigma_plus, time_ordered_exp, ComplexMatrix, DensityMatrix,
    ProjectorPair, SuperOperator, TimeGrid,
};

/// Discrepancies of both identities at one grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixReport {
    pub steps: usize,
    /// Spectral norm of `Qρ_t − rhs` for the irrelevant part.
    pub irrelevant_error: f64,
    /// Spectral norm of `Pρ_t − rhs` for the relevant part.
    pub relevant_error: f64,
    /// Spectral norm of `Qρ₀`; zero for separable initial states.
    pub initial_correlation: f64,
    /// Spectral norm of the `G_{t,t₀}Qρ₀` term.
    pub homogeneous_term: f64,
}

/// Errors at `n` and `2n` steps and their ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixConvergence {
    pub coarse: AppendixReport,
    pub fine: AppendixReport,
    pub irrelevant_ratio: f64,
    pub relevant_ratio: f64,
}

fn spectral_norm(m: &ComplexMatrix) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn appendix_identity_check(
    generator: impl Fn(f64) -> SuperOperator,
    sigma_e: &DensityMatrix,
    rho0_se: &DensityMatrix,
    system_dim: usize,
    t0: f64,
    t: f64,
    steps: usize,
) -> Result<AppendixReport> {
    let total = system_dim * sigma_e.dim();
    if rho0_se.dim() != total {
        return Err(Error::Validation(format!(
            "bipartite state has dimension {}, expected {total}",
            rho0_se.dim()
        )));
    }
    let proj = ProjectorPair::new(sigma_e, system_dim);
    let rho0 = rho0_se.matrix();
    let q_rho0 = proj.q.apply(rho0);
    if t == t0 {
        return Ok(AppendixReport {
            steps: 0,
            irrelevant_error: 0.0,
            relevant_error: 0.0,
            initial_correlation: spectral_norm(&q_rho0),
            homogeneous_term: spectral_norm(&q_rho0),
        });
    }
    let grid = TimeGrid::new(t0, t, steps)?;
    let nodes = grid.nodes();
    let h = grid.step();
    let projected = |s: f64| proj.q.compose(&generator(s));
    let full_steps = (0..steps)
        .map(|k| time_ordered_exp(&generator, nodes[k], nodes[k + 1], &grid))
        .collect::<Result<Vec<_>>>()?;
    let q_steps = (0..steps)
        .map(|k| time_ordered_exp(projected, nodes[k], nodes[k + 1], &grid))
        .collect::<Result<Vec<_>>>()?;

    let dim = full_steps[0].dim();
    // forward: ρ_{t_k}, G_{t_k,t₀}
    let mut states = vec![rho0.clone()];
    let mut g_from_start = vec![SuperOperator::identity(dim)];
    for k in 0..steps {
        states.push(full_steps[k].apply(&states[k]));
        g_from_start.push(q_steps[k].compose(&g_from_start[k]));
    }
    // backward: E_{t,t_k}, G_{t,t_k}
    let mut e_to_end = vec![SuperOperator::identity(dim); steps + 1];
    let mut g_to_end = vec![SuperOperator::identity(dim); steps + 1];
    for k in (0..steps).rev() {
        e_to_end[k] = e_to_end[k + 1].compose(&full_steps[k]);
        g_to_end[k] = g_to_end[k + 1].compose(&q_steps[k]);
    }

    let weight = |k: usize| if k == 0 || k == steps { 0.5 * h } else { h };
    let homogeneous = g_to_end[0].apply(&q_rho0);
    let mut irrelevant = homogeneous.clone();
    let mut relevant = proj.p.apply(&e_to_end[0].apply(&proj.p.apply(rho0)));
    for k in 0..=steps {
        let l = generator(nodes[k]);
        let w = c(weight(k), 0.0);
        let a = g_to_end[k].apply(&proj.q.apply(&l.apply(&proj.p.apply(&states[k]))));
        irrelevant += a * w;
        let b = proj.p.apply(&e_to_end[k].apply(&proj.p.apply(&l.apply(&g_from_start[k].apply(&q_rho0)))));
        relevant += b * w;
    }
    let final_state = &states[steps];
    Ok(AppendixReport {
        steps,
        irrelevant_error: spectral_norm(&(proj.q.apply(final_state) - irrelevant)),
        relevant_error: spectral_norm(&(proj.p.apply(final_state) - relevant)),
        initial_correlation: spectral_norm(&q_rho0),
        homogeneous_term: spectral_norm(&homogeneous),
    })
}

/// Runs the check at `steps` and `2·steps`.
pub fn appendix_convergence(
    generator: impl Fn(f64) -> SuperOperator + Copy,
    sigma_e: &DensityMatrix,
    rho0_se: &DensityMatrix,
    system_dim: usize,
    t0: f64,
    t: f64,
    steps: usize,
) -> Result<AppendixConvergence> {
    let coarse = appendix_identity_check(generator, sigma_e, rho0_se, system_dim, t0, t, steps)?;
    let fine = appendix_identity_check(generator, sigma_e, rho0_se, system_dim, t0, t, 2 * steps)?;
    Ok(AppendixConvergence {
        coarse,
        fine,
        irrelevant_ratio: coarse.irrelevant_error / fine.irrelevant_error,
        relevant_ratio: coarse.relevant_error / fine.relevant_error,
    })
}

/// Qubit coupled to one damped mode (`cutoff` quanta at most) with a
/// modulated exchange coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeModel {
    pub cutoff: usize,
    pub coupling: f64,
    pub modulation: f64,
    pub detuning: f64,
    pub damping: f64,
}

impl Default for ExchangeModel {
    fn default() -> Self {
        Self { cutoff: 3, coupling: 1.3, modulation: 2.1, detuning: 0.7, damping: 0.4 }
    }
}

impl ExchangeModel {
    pub fn generator(&self, s: f64) -> SuperOperator {
        let a = annihilation(self.cutoff);
        let id_s = identity(2);
        let g = self.coupling * (self.modulation * s).cos();
        let exchange = kron(&sigma_plus(), &a) + kron(&sigma_minus(), &a.adjoint());
        let number = a.adjoint() * &a;
        let h = exchange * c(g, 0.0) + kron(&id_s, &number) * c(self.detuning, 0.0);
        let h_sup = SuperOperator::left(&h).sub(&SuperOperator::right(&h)).scale(c(0.0, -1.0));
        let jump = kron(&id_s, &a) * c(self.damping.sqrt(), 0.0);
        h_sup.add(&SuperOperator::dissipator(&jump))
    }

    pub fn vacuum(&self) -> DensityMatrix {
        let mut v = vec![c(0.0, 0.0); self.cutoff + 1];
        v[0] = c(1.0, 0.0);
        DensityMatrix::pure(&v).expect("unit vector")
    }

    /// `(|+,0⟩ + |−,1⟩)/√2` mixed with a little white noise.
    pub fn correlated_state(&self) -> DensityMatrix {
        let modes = self.cutoff + 1;
        let d = 2 * modes;
        let mut v = vec![c(0.0, 0.0); d];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        v[0] = c(r, 0.0);
        v[modes + 1] = c(0.0, r);
        let pure = projector_onto(&v);
        let mixed = pure * c(0.9, 0.0) + identity(d) * c(0.1 / d as f64, 0.0);
        DensityMatrix::new(mixed).expect("valid mixture")
    }

    pub fn separable_state(&self) -> DensityMatrix {
        let q = DensityMatrix::qubit_superposition(0.7).expect("valid p");
        DensityMatrix::new(kron(q.matrix(), self.vacuum().matrix())).expect("product state")
    }
}
