use nalgebra::DMatrix;

use crate::operator::C64;

/// Four-point Lagrange weights for evaluating at `s` from nodes `k·h`,
/// `k = 0..n`. Returns the first node index of the stencil.
pub fn lagrange_weights(s: f64, h: f64, n: usize) -> (usize, [f64; 4]) {
    debug_assert!(n >= 4);
    let x = s / h;
    let k = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let u = x - k as f64;
    let mut w = [0.0; 4];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut prod = 1.0;
        for j in 0..4 {
            if j != i {
                prod *= (u - j as f64) / (i as f64 - j as f64);
            }
        }
        *wi = prod;
    }
    (k, w)
}

/// Values that can be mixed linearly for interpolation.
pub trait Blend: Clone {
    fn blend(items: [&Self; 4], weights: [f64; 4]) -> Self;
}

impl Blend for f64 {
    fn blend(items: [&Self; 4], weights: [f64; 4]) -> Self {
        items.iter().zip(weights).map(|(v, w)| **v * w).sum()
    }
}

impl Blend for DMatrix<C64> {
    fn blend(items: [&Self; 4], weights: [f64; 4]) -> Self {
        let mut out = items[0] * C64::new(weights[0], 0.0);
        for i in 1..4 {
            out += items[i] * C64::new(weights[i], 0.0);
        }
        out
    }
}

/// Uniformly tabulated function of a duration `s ∈ [0, (n−1)h]`.
#[derive(Debug, Clone)]
pub struct Table<T> {
    step: f64,
    values: Vec<T>,
}

impl<T: Blend> Table<T> {
    pub fn new(step: f64, values: Vec<T>) -> Self {
        assert!(values.len() >= 4, "interpolation table needs at least four nodes");
        Self { step, values }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn span(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Exact at nodes, cubic in between.
    pub fn eval(&self, s: f64) -> T {
        let x = s / self.step;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < self.values.len() {
            return self.values[nearest as usize].clone();
        }
        let (k, w) = lagrange_weights(s, self.step, self.values.len());
        T::blend(
            [&self.values[k], &self.values[k + 1], &self.values[k + 2], &self.values[k + 3]],
            w,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduced_exactly() {
        let f = |s: f64| 1.0 - 2.0 * s + 0.5 * s * s - 0.3 * s * s * s;
        let h = 0.1;
        let table = Table::new(h, (0..20).map(|k| f(k as f64 * h)).collect());
        for s in [0.0, 0.013, 0.55, 1.234, 1.85, 1.9] {
            assert!((table.eval(s) - f(s)).abs() < 1e-13, "s = {s}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for s in [0.0, 0.7, 3.3, 9.9] {
            let (_, w) = lagrange_weights(s, 0.5, 21);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
