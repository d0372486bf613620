use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::contraction::{dual_vec, ContractionTable, TermKey};
use super::quadrature::{future_weight_at, future_weights, past_weight_at, past_weights, Axis, QuadratureOptions};
use crate::bath::{
    correlation_eval, dephasing_propagator, finite_t_propagator, zero_t_decay_propagator, BathModel, BathSymbol,
    CorrelationKind, FiniteTemperatureMethod, UnperturbedPropagator,
};
use crate::error::{Error, Result};
use crate::measurement::{prob_y, rho_yx, CPFResult, JointDistribution, MeasurementScheme, PostFirstStates};
use crate::operator::{c, trace, ComplexMatrix, DensityMatrix, SuperOperator, C64, TOLERANCES};

/// Highest series order the engine evaluates.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub quadrature: QuadratureOptions,
    /// `P(y)` at or below this is treated as impossible to condition on.
    pub conditioning_epsilon: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { quadrature: QuadratureOptions::default(), conditioning_epsilon: TOLERANCES.conditioning }
    }
}

/// Perturbative joint table at one `(t, τ)` with its order breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesResult {
    pub t: f64,
    pub tau: f64,
    pub order: usize,
    pub joint: JointDistribution,
    pub markov: JointDistribution,
    /// Integral contribution of orders `1..=order`; entries are signed.
    pub per_order: Vec<JointDistribution>,
    /// Quadrature nodes on the `t′` and `τ′` axes.
    pub nodes: (usize, usize),
}

/// Perturbative evaluation of the joint distribution and the CPF.
#[derive(Debug)]
pub struct SeriesEngine {
    model: BathModel,
    propagator: UnperturbedPropagator,
    scheme: MeasurementScheme,
    states: PostFirstStates,
    options: SeriesOptions,
    tables: Vec<[OnceLock<ContractionTable>; MAX_ORDER]>,
}

/// Λ at the quadrature nodes of one `(t, τ)` point plus the integrated
/// window weights, cached by multiplicity pattern.
struct PointCache {
    t: f64,
    tau: f64,
    lam_t: SuperOperator,
    lam_tau: SuperOperator,
    past_axis: Axis,
    future_axis: Axis,
    /// `Λ_{x_a}` for `x_a ∈ [0, t]`.
    past_maps: Vec<DMatrix<C64>>,
    /// `Λ_{τ − y_a}` for `y_a ∈ [0, τ]`.
    future_maps: Vec<DMatrix<C64>>,
    past: HashMap<Vec<u32>, DMatrix<C64>>,
    future: HashMap<Vec<u32>, DMatrix<C64>>,
}

impl SeriesEngine {
    pub fn new(
        model: BathModel,
        propagator: UnperturbedPropagator,
        scheme: MeasurementScheme,
        rho0: &DensityMatrix,
        options: SeriesOptions,
    ) -> Result<Self> {
        options.quadrature.validate()?;
        if scheme.dim() != 2 {
            return Err(Error::Validation("the series couples a single qubit".into()));
        }
        let states = PostFirstStates::build(rho0, &scheme.first)?;
        let ny = scheme.middle.len();
        let tables = (0..ny).map(|_| std::array::from_fn(|_| OnceLock::new())).collect();
        Ok(Self { model, propagator, scheme, states, options, tables })
    }

    /// Builds the matching unperturbed family: analytic for dephasing and
    /// zero temperature, tabulated on `[0, s_max]` otherwise.
    pub fn for_model(
        model: BathModel,
        scheme: MeasurementScheme,
        rho0: &DensityMatrix,
        s_max: f64,
        method: FiniteTemperatureMethod,
        options: SeriesOptions,
    ) -> Result<Self> {
        let propagator = default_propagator(&model, s_max, method)?;
        Self::new(model, propagator, scheme, rho0, options)
    }

    pub fn model(&self) -> &BathModel {
        &self.model
    }

    pub fn scheme(&self) -> &MeasurementScheme {
        &self.scheme
    }

    pub fn propagator(&self) -> &UnperturbedPropagator {
        &self.propagator
    }

    pub fn options(&self) -> &SeriesOptions {
        &self.options
    }

    pub fn states(&self) -> &PostFirstStates {
        &self.states
    }

    /// Coefficient table of one order for middle outcome `y`.
    pub fn table(&self, y: usize, order: usize) -> Result<&ContractionTable> {
        check_order(order)?;
        if order == 0 {
            return Err(Error::Argument("series orders start at 1".into()));
        }
        let slot = &self.tables[y][order - 1];
        if let Some(t) = slot.get() {
            return Ok(t);
        }
        let e_y = self.scheme.middle.effect(y);
        let built = ContractionTable::build(&self.model, &self.model.coupling(), e_y, self.scheme.rho_y(y), order)?;
        Ok(slot.get_or_init(|| built))
    }

    fn lambda(&self, s: f64) -> Result<SuperOperator> {
        self.propagator.at(s.max(0.0))
    }

    fn check_times(&self, t: f64, tau: f64) -> Result<()> {
        if !(t >= 0.0 && tau >= 0.0) || !t.is_finite() || !tau.is_finite() {
            return Err(Error::Argument(format!("times must be finite and ≥ 0 (t = {t}, τ = {tau})")));
        }
        let need = t.max(tau);
        if need > self.propagator.max_duration() * (1.0 + 1e-12) {
            return Err(Error::Argument(format!(
                "propagator covers durations up to {}, point needs {need}",
                self.propagator.max_duration()
            )));
        }
        Ok(())
    }

    /// `Tr(E_z Λ_τ[ρ_y]) Tr(E_y Λ_t[ρ̃_x])`
    pub fn markov_term(&self, t: f64, tau: f64) -> Result<JointDistribution> {
        self.check_times(t, tau)?;
        let lam_t = self.lambda(t)?;
        let lam_tau = self.lambda(tau)?;
        Ok(self.markov_with(&lam_t, &lam_tau))
    }

    fn markov_with(&self, lam_t: &SuperOperator, lam_tau: &SuperOperator) -> JointDistribution {
        let s = &self.scheme;
        JointDistribution::from_fn(s, |z, y, x| {
            let future = trace(&(s.last.effect(z) * lam_tau.apply(s.rho_y(y)))).re;
            let past = trace(&(s.middle.effect(y) * lam_t.apply(&self.states.per_outcome[x]))).re;
            future * past
        })
    }

    fn point_cache(&self, t: f64, tau: f64, quadrature: &QuadratureOptions) -> Result<PointCache> {
        let tc = self.model.tau_c();
        let past_axis = Axis::new(t, quadrature.intervals(t, tc));
        let future_axis = Axis::new(tau, quadrature.intervals(tau, tc));
        let past_maps = past_axis
            .nodes()
            .iter()
            .map(|&x| self.lambda(x).map(|m| m.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        let future_maps = future_axis
            .nodes()
            .iter()
            .map(|&y| self.lambda(tau - y).map(|m| m.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PointCache {
            t,
            tau,
            lam_t: self.lambda(t)?,
            lam_tau: self.lambda(tau)?,
            past_axis,
            future_axis,
            past_maps,
            future_maps,
            past: HashMap::new(),
            future: HashMap::new(),
        })
    }

    /// Order-`n` integral for slot operator `slot`, middle outcome `y` and
    /// every last outcome `z`.
    fn order_integral(&self, cache: &mut PointCache, order: usize, y: usize, slot: &ComplexMatrix) -> Result<Vec<C64>> {
        let nz = self.scheme.last.len();
        let mut out = vec![c(0.0, 0.0); nz];
        if cache.t == 0.0 || cache.tau == 0.0 {
            return Ok(out);
        }
        let table = self.table(y, order)?;
        let tc = self.model.tau_c();
        let s = DVector::from_column_slice(slot.as_slice());
        let readouts: Vec<DVector<C64>> =
            (0..nz).map(|z| DVector::from_vec(dual_vec(self.scheme.last.effect(z)))).collect();
        for (key, coeff) in &table.entries {
            let pm = key.past_multiplicities();
            let fm = key.future_multiplicities();
            if !cache.past.contains_key(&pm) {
                let w = past_weights(&pm, &cache.past_axis, tc);
                let m = integrate_maps(&w, &cache.past_axis, &cache.past_maps);
                cache.past.insert(pm.clone(), m);
            }
            if !cache.future.contains_key(&fm) {
                let w = future_weights(&fm, &cache.future_axis, tc);
                let m = integrate_maps(&w, &cache.future_axis, &cache.future_maps);
                cache.future.insert(fm.clone(), m);
            }
            let u = &cache.past[&pm] * &s;
            let tu = coeff.transpose() * u;
            let fut = &cache.future[&fm];
            for (z, e) in readouts.iter().enumerate() {
                let v = fut.transpose() * e;
                out[z] += tu.dot(&v);
            }
        }
        Ok(out)
    }

    fn evaluate(&self, t: f64, tau: f64, order: usize, quadrature: &QuadratureOptions) -> Result<SeriesResult> {
        check_order(order)?;
        self.check_times(t, tau)?;
        let mut cache = self.point_cache(t, tau, quadrature)?;
        let markov = self.markov_with(&cache.lam_t, &cache.lam_tau);
        let (nz, ny, nx) = self.scheme.shape();
        let mut per_order = Vec::with_capacity(order);
        for n in 1..=order {
            let mut vals = vec![0.0; nz * ny * nx];
            for y in 0..ny {
                for x in 0..nx {
                    let slot = self.states.per_outcome[x].clone();
                    let col = self.order_integral(&mut cache, n, y, &slot)?;
                    for z in 0..nz {
                        vals[(z * ny + y) * nx + x] = real_part(col[z], "joint probability")?;
                    }
                }
            }
            per_order.push(JointDistribution::from_fn(&self.scheme, |z, y, x| vals[(z * ny + y) * nx + x]));
        }
        let joint = JointDistribution::from_fn(&self.scheme, |z, y, x| {
            markov.get(z, y, x) + per_order.iter().map(|p| p.get(z, y, x)).sum::<f64>()
        });
        Ok(SeriesResult {
            t,
            tau,
            order,
            joint,
            markov,
            per_order,
            nodes: (cache.past_axis.intervals + 1, cache.future_axis.intervals + 1),
        })
    }

    /// Joint distribution truncated after `order` correlation functions.
    pub fn joint_prob_perturbative(&self, t: f64, tau: f64, order: usize) -> Result<SeriesResult> {
        self.evaluate(t, tau, order, &self.options.quadrature)
    }

    /// Same with explicit quadrature settings.
    pub fn joint_prob_with(
        &self,
        t: f64,
        tau: f64,
        order: usize,
        quadrature: &QuadratureOptions,
    ) -> Result<SeriesResult> {
        quadrature.validate()?;
        self.evaluate(t, tau, order, quadrature)
    }

    /// CPF for middle outcome `y` from the slot `ρ̃_yx`.
    pub fn cpf_perturbative(&self, t: f64, tau: f64, y: usize, order: usize) -> Result<CPFResult> {
        self.cpf_with(t, tau, y, order, &self.options.quadrature)
    }

    pub fn cpf_with(
        &self,
        t: f64,
        tau: f64,
        y: usize,
        order: usize,
        quadrature: &QuadratureOptions,
    ) -> Result<CPFResult> {
        check_order(order)?;
        quadrature.validate()?;
        self.check_times(t, tau)?;
        if y >= self.scheme.middle.len() {
            return Err(Error::Argument(format!("middle outcome index {y} out of range")));
        }
        let mut cache = self.point_cache(t, tau, quadrature)?;
        let e_y = self.scheme.middle.effect(y);
        let py = prob_y(&self.states, &cache.lam_t, e_y);
        let label = self.scheme.middle.outcome(y);
        if py <= self.options.conditioning_epsilon {
            return Err(Error::ConditioningImpossible { label, probability: py });
        }
        let slots = (0..self.scheme.first.len())
            .map(|x| rho_yx(&self.states, &cache.lam_t, e_y, x))
            .collect::<Result<Vec<_>>>()?;
        let mut per_order = Vec::with_capacity(order);
        for n in 1..=order {
            let mut acc = c(0.0, 0.0);
            for (x, slot) in slots.iter().enumerate() {
                if slot.degenerate {
                    continue;
                }
                let col = self.order_integral(&mut cache, n, y, &slot.matrix)?;
                let ox = self.scheme.first.outcome(x);
                for (z, v) in col.iter().enumerate() {
                    acc += v * (ox * self.scheme.last.outcome(z));
                }
            }
            per_order.push(real_part(acc, "CPF")? / (py * py));
        }
        Ok(CPFResult { y_label: label, t, tau, value: per_order.iter().sum(), per_order })
    }

    /// Order-1 integrand at fixed `(t′, τ′)` from the closed two-insertion
    /// formula, independent of the contraction tables.
    #[allow(clippy::too_many_arguments)]
    pub fn xi_order1(
        &self,
        y: usize,
        z: usize,
        slot: &ComplexMatrix,
        t: f64,
        tau: f64,
        t_prime: f64,
        tau_prime: f64,
    ) -> Result<C64> {
        check_window(t, tau, t_prime, tau_prime)?;
        let coupling = self.model.coupling();
        let m0 = self.lambda(t_prime)?.apply(slot);
        let lam_f = self.lambda(tau - tau_prime)?;
        let e_y = self.scheme.middle.effect(y);
        let e_z = self.scheme.last.effect(z);
        let rho_y = self.scheme.rho_y(y);
        let lag = t + tau_prime - t_prime;
        let mut acc = c(0.0, 0.0);
        for mu in &coupling.terms {
            let future = trace(&(e_z * lam_f.apply(&(&mu.system * rho_y))))
                - trace(&(e_z * lam_f.apply(&(rho_y * &mu.system))));
            for nu in &coupling.terms {
                let forward = two_point(&self.model, mu.symbol, nu.symbol, lag)?;
                let backward = two_point(&self.model, nu.symbol, mu.symbol, lag)?;
                let past = trace(&(e_y * &nu.system * &m0)) * forward - trace(&(e_y * &m0 * &nu.system)) * backward;
                acc -= future * past;
            }
        }
        Ok(acc)
    }

    /// Order-`n` integrand at fixed `(t′, τ′)` with the inner simplices
    /// integrated on `inner_intervals` steps per window.
    #[allow(clippy::too_many_arguments)]
    pub fn xi_integrand(
        &self,
        order: usize,
        y: usize,
        z: usize,
        slot: &ComplexMatrix,
        t: f64,
        tau: f64,
        t_prime: f64,
        tau_prime: f64,
        inner_intervals: usize,
    ) -> Result<C64> {
        check_window(t, tau, t_prime, tau_prime)?;
        let tc = self.model.tau_c();
        self.contract(order, y, z, slot, tau, t_prime, tau_prime, None, |key| {
            past_weight_at(&key.past_multiplicities(), t - t_prime, inner_intervals, tc)
                * future_weight_at(&key.future_multiplicities(), tau_prime, inner_intervals, tc)
        })
    }

    /// Order-`n` integrand density with every insertion time fixed:
    /// `past` inside `(t′, t)` and `future` inside `(t, t+τ′)`, both
    /// ascending absolute times.
    #[allow(clippy::too_many_arguments)]
    pub fn xi_density(
        &self,
        order: usize,
        y: usize,
        z: usize,
        slot: &ComplexMatrix,
        t: f64,
        tau: f64,
        t_prime: f64,
        tau_prime: f64,
        past: &[f64],
        future: &[f64],
    ) -> Result<C64> {
        check_window(t, tau, t_prime, tau_prime)?;
        if past.len() + future.len() + 2 != 2 * order {
            return Err(Error::Argument(format!(
                "order {order} needs {} extra insertion times, got {}",
                2 * order - 2,
                past.len() + future.len()
            )));
        }
        let mut times = vec![t_prime];
        times.extend_from_slice(past);
        times.extend_from_slice(future);
        times.push(t + tau_prime);
        let ordered = times.windows(2).all(|w| w[0] <= w[1])
            && past.iter().all(|&p| p <= t)
            && future.iter().all(|&f| f >= t);
        if !ordered {
            return Err(Error::Argument("insertion times must be chronological and inside their windows".into()));
        }
        let tc = self.model.tau_c();
        self.contract(order, y, z, slot, tau, t_prime, tau_prime, Some(past.len()), |key| {
            let m = key.multiplicities();
            let exponent: f64 = times.windows(2).zip(&m).map(|(w, &k)| k as f64 * (w[1] - w[0])).sum();
            (-exponent / tc).exp()
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn contract(
        &self,
        order: usize,
        y: usize,
        z: usize,
        slot: &ComplexMatrix,
        tau: f64,
        t_prime: f64,
        tau_prime: f64,
        past_only: Option<usize>,
        weight: impl Fn(&TermKey) -> f64,
    ) -> Result<C64> {
        let table = self.table(y, order)?;
        let m0 = self.lambda(t_prime)?.apply(slot);
        let u = DVector::from_column_slice(m0.as_slice());
        let dual = self.lambda(tau - tau_prime)?.dual_apply(self.scheme.last.effect(z));
        // Tr(E_z Λ[N]) = Tr(F N) = vec(Fᵀ)·vec(N)
        let v = DVector::from_vec(dual_vec(&dual));
        let mut acc = c(0.0, 0.0);
        for (key, coeff) in &table.entries {
            if past_only.is_some_and(|k| k != key.past) {
                continue;
            }
            let w = weight(key);
            if w == 0.0 {
                continue;
            }
            acc += (coeff.transpose() * &u).dot(&v) * w;
        }
        Ok(acc)
    }
}

fn integrate_maps(weights: &[f64], axis: &Axis, maps: &[DMatrix<C64>]) -> DMatrix<C64> {
    let tw = axis.trapezoid_weights();
    let (r, cols) = maps[0].shape();
    let mut out = DMatrix::zeros(r, cols);
    for ((m, &w), &q) in maps.iter().zip(weights).zip(&tw) {
        let f = w * q;
        if f != 0.0 {
            out += m * c(f, 0.0);
        }
    }
    out
}

fn real_part(v: C64, what: &str) -> Result<f64> {
    if v.im.abs() > TOLERANCES.imaginary_residue {
        return Err(Error::Consistency(format!("{what} has imaginary residue {:e}", v.im)));
    }
    Ok(v.re)
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder { requested: order, maximum: MAX_ORDER });
    }
    Ok(())
}

fn check_window(t: f64, tau: f64, t_prime: f64, tau_prime: f64) -> Result<()> {
    if !(0.0..=t).contains(&t_prime) || !(0.0..=tau).contains(&tau_prime) {
        return Err(Error::Argument(format!(
            "need 0 ≤ t′ ≤ t and 0 ≤ τ′ ≤ τ (t′ = {t_prime}, t = {t}, τ′ = {tau_prime}, τ = {tau})"
        )));
    }
    Ok(())
}

/// `⟨first(a) second(b)⟩` at lag `|a − b|` through the named correlation
/// functions.
fn two_point(model: &BathModel, first: BathSymbol, second: BathSymbol, lag: f64) -> Result<f64> {
    use BathSymbol::*;
    let kind = match (first, second) {
        (Noise, Noise) => CorrelationKind::Classical,
        (Lower, Raise) => CorrelationKind::Down,
        (Raise, Lower) => CorrelationKind::Up,
        (Lower, Lower) | (Raise, Raise) => return Ok(0.0),
        (a, b) => return Err(Error::Model(format!("no two-point function for ({a:?}, {b:?})"))),
    };
    correlation_eval(model, kind, lag.abs())
}

pub fn default_propagator(
    model: &BathModel,
    s_max: f64,
    method: FiniteTemperatureMethod,
) -> Result<UnperturbedPropagator> {
    match model {
        BathModel::Dephasing(m) => Ok(dephasing_propagator(m)),
        BathModel::Bosonic(m) if m.nbar == 0.0 => zero_t_decay_propagator(m),
        BathModel::Bosonic(m) => finite_t_propagator(m, s_max, method),
    }
}
