use super::interp::Table;
use crate::error::{Error, Result};

/// Trapezoidal solution of `G'(s) = −∫₀ˢ K(s−u) G(u) du`, `G(0) = 1`, on
/// nodes `k·h`, `k = 0..=n`.
pub fn solve_volterra(kernel: impl Fn(f64) -> f64, h: f64, n: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..=n).map(|j| kernel(j as f64 * h)).collect();
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    let mut conv_prev = 0.0;
    for m in 1..=n {
        // ∫₀^{s_m} K(s_m−u)G(u)du without the G_m endpoint term
        let mut partial = 0.5 * k[m] * g[0];
        for j in 1..m {
            partial += k[m - j] * g[j];
        }
        partial *= h;
        let diag = 0.5 * h * k[0];
        let gm = (g[m - 1] - 0.5 * h * (conv_prev + partial)) / (1.0 + 0.5 * h * diag);
        conv_prev = partial + diag * gm;
        g.push(gm);
    }
    g
}

/// Volterra amplitude with Richardson extrapolation over successive step
/// halvings, refined until two extrapolated levels agree.
#[derive(Debug, Clone)]
pub struct VolterraAmplitude {
    table: Table<f64>,
    self_convergence: f64,
}

impl VolterraAmplitude {
    pub fn solve(kernel: impl Fn(f64) -> f64 + Copy, s_max: f64, h0: f64, tol: f64) -> Result<Self> {
        if !(s_max > 0.0) || !(h0 > 0.0) {
            return Err(Error::Argument(format!("Volterra solve needs s_max > 0 and h > 0 (got {s_max}, {h0})")));
        }
        let n0 = ((s_max / h0).ceil() as usize).max(4);
        let h0 = s_max / n0 as f64;
        let richardson = |level: u32| -> Vec<f64> {
            let scale = 1usize << level;
            let coarse = solve_volterra(kernel, h0 / scale as f64, n0 * scale);
            let fine = solve_volterra(kernel, h0 / (2 * scale) as f64, 2 * n0 * scale);
            (0..=n0 * scale)
                .map(|j| (4.0 * fine[2 * j] - coarse[j]) / 3.0)
                .collect()
        };
        let mut previous = richardson(0);
        for level in 1..7 {
            let current = richardson(level);
            let stride = 1usize << level;
            let diff = (0..=n0)
                .map(|j| (current[j * stride] - previous[j * (stride / 2)]).abs())
                .fold(0.0, f64::max);
            if diff <= tol {
                let h = h0 / stride as f64;
                return Ok(Self { table: Table::new(h, current), self_convergence: diff });
            }
            previous = current;
        }
        Err(Error::Accuracy(format!(
            "Volterra amplitude did not self-converge to {tol:e} on [0, {s_max}]"
        )))
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.table.eval(s)
    }

    pub fn span(&self) -> f64 {
        self.table.span()
    }

    pub fn step(&self) -> f64 {
        self.table.step()
    }

    pub fn self_convergence(&self) -> f64 {
        self.self_convergence
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_gives_cosine() {
        // K ≡ ω² gives G'' = −ω² G
        let omega: f64 = 1.7;
        let amp = VolterraAmplitude::solve(|_| omega * omega, 3.0, 0.05, 1e-9).unwrap();
        for s in [0.0, 0.4, 1.3, 2.9] {
            assert!((amp.eval(s) - (omega * s).cos()).abs() < 1e-7, "s = {s}");
        }
    }

    #[test]
    fn zero_kernel_is_constant() {
        let g = solve_volterra(|_| 0.0, 0.1, 10);
        assert!(g.iter().all(|&v| v == 1.0));
    }
}
