//! Nested time integrals over the ordered insertion simplices.
//!
//! With the chronological order fixed, the integrand of a term is
//! `f(t′) g(τ′) exp(−Σ_g m_g ℓ_g / τc)` where `ℓ_g` are the gaps between
//! consecutive insertions. The simplex integrals reduce to one-dimensional
//! recursions of the form `H(u) = ∫ e^{−m|v−u|/τc} H'(v) dv`, each evaluated
//! for all nodes at once with a running exponentially-weighted sum on the
//! same trapezoid grid as the outer integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    /// Minimum node count along each of the `t′` and `τ′` axes.
    pub nodes_per_axis: usize,
    /// Axes are refined until each `τc` holds at least this many steps; 0
    /// keeps exactly `nodes_per_axis`.
    pub min_nodes_per_tau_c: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { nodes_per_axis: 41, min_nodes_per_tau_c: 20.0 }
    }
}

impl QuadratureOptions {
    pub fn fixed(nodes_per_axis: usize) -> Self {
        Self { nodes_per_axis, min_nodes_per_tau_c: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 2 {
            return Err(Error::Argument(format!(
                "quadrature needs at least 2 nodes per axis (got {})",
                self.nodes_per_axis
            )));
        }
        if !(self.min_nodes_per_tau_c >= 0.0) || !self.min_nodes_per_tau_c.is_finite() {
            return Err(Error::Argument("min_nodes_per_tau_c must be finite and ≥ 0".into()));
        }
        Ok(())
    }

    /// Number of intervals used on an axis of length `len`.
    pub fn intervals(&self, len: f64, tau_c: f64) -> usize {
        let base = self.nodes_per_axis - 1;
        let needed = (self.min_nodes_per_tau_c * len / tau_c).ceil();
        if needed.is_finite() && needed > base as f64 {
            needed as usize
        } else {
            base
        }
    }

    /// Same options with every axis step halved.
    pub fn halved(&self) -> Self {
        Self {
            nodes_per_axis: 2 * (self.nodes_per_axis - 1) + 1,
            min_nodes_per_tau_c: 2.0 * self.min_nodes_per_tau_c,
        }
    }
}

/// Uniform axis `[0, len]` with `n` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub len: f64,
    pub intervals: usize,
}

impl Axis {
    pub fn new(len: f64, intervals: usize) -> Self {
        Self { len, intervals: intervals.max(1) }
    }

    pub fn step(&self) -> f64 {
        self.len / self.intervals as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.len
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.node(k)).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.intervals + 1];
        w[0] = 0.5 * h;
        w[self.intervals] = 0.5 * h;
        w
    }
}

/// Weight of the past window as a function of the first insertion time:
/// `W(t′) = ∫_{t′<p₁<…<p_k<t} exp(−[m₀(p₁−t′) + … + m_k(t−p_k)]/τc)`
/// on the nodes of `axis = [0, t]`. `mults` holds `m₀ … m_k`.
pub fn past_weights(mults: &[u32], axis: &Axis, tau_c: f64) -> Vec<f64> {
    let n = axis.intervals;
    let h = axis.step();
    let t = axis.len;
    let last = *mults.last().expect("at least the crossing gap") as f64;
    let mut w: Vec<f64> = axis.nodes().iter().map(|&x| (-last * (t - x) / tau_c).exp()).collect();
    for &m in mults[..mults.len() - 1].iter().rev() {
        let m = m as f64;
        let decay = (-m * h / tau_c).exp();
        let mut next = vec![0.0; n + 1];
        let mut run = 0.0;
        for a in (0..=n).rev() {
            run = w[a] + decay * run;
            let tail = (-m * (t - axis.node(a)) / tau_c).exp();
            next[a] = h * (run - 0.5 * w[a] - 0.5 * tail * w[n]);
        }
        w = next;
    }
    w
}

/// Weight of the future window as a function of `τ′`:
/// `W(τ′) = ∫_{0<f₁<…<f_k<τ′} exp(−[r₀f₁ + r₁(f₂−f₁) + … + r_k(τ′−f_k)]/τc)`
/// on the nodes of `axis = [0, τ]`. `rates` holds `r₀ … r_k`.
pub fn future_weights(rates: &[u32], axis: &Axis, tau_c: f64) -> Vec<f64> {
    let n = axis.intervals;
    let h = axis.step();
    let first = rates[0] as f64;
    let mut w: Vec<f64> = axis.nodes().iter().map(|&y| (-first * y / tau_c).exp()).collect();
    for &r in &rates[1..] {
        let r = r as f64;
        let decay = (-r * h / tau_c).exp();
        let mut next = vec![0.0; n + 1];
        let mut run = 0.0;
        for a in 0..=n {
            run = w[a] + decay * run;
            let head = (-r * axis.node(a) / tau_c).exp();
            next[a] = h * (run - 0.5 * w[a] - 0.5 * head * w[0]);
        }
        w = next;
    }
    w
}

/// The same simplex weights for explicit end points, used when the outer
/// times are held fixed.
pub fn past_weight_at(mults: &[u32], span: f64, intervals: usize, tau_c: f64) -> f64 {
    if span <= 0.0 {
        return if mults.len() == 1 { 1.0 } else { 0.0 };
    }
    past_weights(mults, &Axis::new(span, intervals), tau_c)[0]
}

pub fn future_weight_at(rates: &[u32], span: f64, intervals: usize, tau_c: f64) -> f64 {
    if span <= 0.0 {
        return if rates.len() == 1 { 1.0 } else { 0.0 };
    }
    let axis = Axis::new(span, intervals);
    future_weights(rates, &axis, tau_c)[axis.intervals]
}
