use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bath::ClassicalNoiseModel;

/// Stationary Ornstein-Uhlenbeck noise with `⟨ξ(t)ξ(s)⟩ = (γ/2τc)e^{−|t−s|/τc}`,
/// advanced with the exact one-step transition.
#[derive(Debug, Clone)]
pub struct OUPathSampler {
    tau_c: f64,
    variance: f64,
    rng: ChaCha8Rng,
    xi: f64,
}

impl OUPathSampler {
    /// Starts from the stationary distribution. `stream` selects an
    /// independent ChaCha stream under the same seed, one per trajectory.
    pub fn new(model: &ClassicalNoiseModel, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let variance = model.variance();
        let nu: f64 = rng.sample(StandardNormal);
        Self { tau_c: model.tau_c, variance, rng, xi: variance.sqrt() * nu }
    }

    pub fn value(&self) -> f64 {
        self.xi
    }

    /// `ξ ← ξ e^{−h/τc} + √(σ²(1 − e^{−2h/τc})) ν`
    pub fn advance(&mut self, h: f64) -> f64 {
        let decay = (-h / self.tau_c).exp();
        let spread = (self.variance * (1.0 - decay * decay)).sqrt();
        self.step_with(decay, spread)
    }

    /// Same update with precomputed coefficients.
    #[inline]
    pub fn step_with(&mut self, decay: f64, spread: f64) -> f64 {
        let nu: f64 = self.rng.sample(StandardNormal);
        self.xi = self.xi * decay + spread * nu;
        self.xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_variance_and_lag_correlation() {
        let model = ClassicalNoiseModel::new(1.0, 0.1).unwrap();
        let n = 200_000;
        let (mut s0, mut s2, mut lag) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let mut p = OUPathSampler::new(&model, 17, k as u64);
            let a = p.value();
            let b = p.advance(0.1);
            s0 += a;
            s2 += a * a;
            lag += a * b;
        }
        let nf = n as f64;
        let var = s2 / nf - (s0 / nf).powi(2);
        let sigma2 = model.variance();
        // sample variance of a Gaussian has relative std √(2/n)
        assert!((var - sigma2).abs() < 3.0 * sigma2 * (2.0 / nf).sqrt());
        let expected = sigma2 * (-1.0f64).exp();
        assert!((lag / nf - expected).abs() < 3.0 * sigma2 * (2.0 / nf).sqrt());
    }

    #[test]
    fn streams_are_reproducible() {
        let model = ClassicalNoiseModel::new(1.0, 0.05).unwrap();
        let mut a = OUPathSampler::new(&model, 3, 9);
        let mut b = OUPathSampler::new(&model, 3, 9);
        let mut c = OUPathSampler::new(&model, 3, 10);
        let xa: Vec<f64> = (0..10).map(|_| a.advance(0.01)).collect();
        let xb: Vec<f64> = (0..10).map(|_| b.advance(0.01)).collect();
        let xc: Vec<f64> = (0..10).map(|_| c.advance(0.01)).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
