//! Stochastic-Liouville Monte Carlo for the dephasing model.
//!
//! One Ornstein-Uhlenbeck path per trajectory runs continuously through the
//! middle measurement; the phase accumulated on each leg is the trapezoid of
//! the sampled path. Trajectories are grouped into fixed chunks whose sums
//! are reduced in chunk order, so the result does not depend on how many
//! threads ran the chunks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ou::OUPathSampler;
use super::{OracleMeta, OracleResult};
use crate::bath::ClassicalNoiseModel;
use crate::error::{Error, Result};
use crate::measurement::{JointDistribution, MeasurementScheme, PostFirstStates};
use crate::operator::{ComplexMatrix, DensityMatrix, C64};

/// Trajectories per reduction chunk.
pub const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_traj: usize,
    pub seed: u64,
    /// Path step as a fraction of `τc`.
    pub step_fraction: f64,
    /// Run chunks on the rayon pool; the output is identical either way.
    pub parallel: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { n_traj: 100_000, seed: 0, step_fraction: 1.0 / 50.0, parallel: true }
    }
}

fn fourier(e: &ComplexMatrix, rho: &ComplexMatrix) -> [C64; 3] {
    [
        e[(1, 0)] * rho[(0, 1)],
        e[(0, 0)] * rho[(0, 0)] + e[(1, 1)] * rho[(1, 1)],
        e[(0, 1)] * rho[(1, 0)],
    ]
}

fn eval(coeffs: &[C64; 3], phase: f64) -> f64 {
    let (s, c) = phase.sin_cos();
    let e = C64::new(c, s);
    (coeffs[0] * e.conj() + coeffs[1] + coeffs[2] * e).re
}

struct Leg {
    steps: usize,
    h: f64,
    decay: f64,
    spread: f64,
}

impl Leg {
    fn new(model: &ClassicalNoiseModel, duration: f64, h_max: f64) -> Self {
        let steps = (duration / h_max).ceil() as usize;
        let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
        let decay = (-h / model.tau_c).exp();
        let spread = (model.variance() * (1.0 - decay * decay)).sqrt();
        Self { steps, h, decay, spread }
    }

    /// `2∫ξ` over the leg by the trapezoid rule.
    fn phase(&self, path: &mut OUPathSampler) -> f64 {
        let mut acc = 0.0;
        let mut prev = path.value();
        for _ in 0..self.steps {
            let next = path.step_with(self.decay, self.spread);
            acc += 0.5 * (prev + next);
            prev = next;
        }
        2.0 * acc * self.h
    }
}

pub fn mc_joint_prob(
    model: &ClassicalNoiseModel,
    scheme: &MeasurementScheme,
    rho0: &DensityMatrix,
    t: f64,
    tau: f64,
    opts: &McOptions,
) -> Result<OracleResult> {
    if opts.n_traj < 1000 {
        return Err(Error::Argument(format!("Monte Carlo needs at least 1000 trajectories, got {}", opts.n_traj)));
    }
    if t < 0.0 || tau < 0.0 {
        return Err(Error::Argument(format!("times must be non-negative (t = {t}, τ = {tau})")));
    }
    if scheme.dim() != 2 {
        return Err(Error::Model("Monte Carlo oracle handles qubit schemes only".into()));
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction <= 1.0 / 50.0) {
        return Err(Error::Argument(format!("path step must be at most τc/50, got τc·{}", opts.step_fraction)));
    }
    let states = PostFirstStates::build(rho0, &scheme.first)?;
    let (nz, ny, nx) = scheme.shape();
    let n = nz * ny * nx;
    let first: Vec<Vec<[C64; 3]>> = (0..ny)
        .map(|y| (0..nx).map(|x| fourier(scheme.middle.effect(y), &states.per_outcome[x])).collect())
        .collect();
    let second: Vec<Vec<[C64; 3]>> = (0..nz)
        .map(|z| (0..ny).map(|y| fourier(scheme.last.effect(z), scheme.rho_y(y))).collect())
        .collect();
    let h_max = model.tau_c * opts.step_fraction;
    let leg1 = Leg::new(model, t, h_max);
    let leg2 = Leg::new(model, tau, h_max);

    let chunk_sums = |chunk: usize| -> (Vec<f64>, Vec<f64>) {
        let mut sum = vec![0.0; n];
        let mut outer = vec![0.0; n * n];
        let mut sample = vec![0.0; n];
        let lo = chunk * MC_CHUNK;
        let hi = (lo + MC_CHUNK).min(opts.n_traj);
        for traj in lo..hi {
            let mut path = OUPathSampler::new(model, opts.seed, traj as u64);
            let phi1 = leg1.phase(&mut path);
            let phi2 = leg2.phase(&mut path);
            for z in 0..nz {
                for y in 0..ny {
                    let f2 = eval(&second[z][y], phi2);
                    for x in 0..nx {
                        sample[(z * ny + y) * nx + x] = eval(&first[y][x], phi1) * f2;
                    }
                }
            }
            for i in 0..n {
                sum[i] += sample[i];
                for j in 0..n {
                    outer[i * n + j] += sample[i] * sample[j];
                }
            }
        }
        (sum, outer)
    };

    let n_chunks = opts.n_traj.div_ceil(MC_CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = if opts.parallel {
        (0..n_chunks).into_par_iter().map(chunk_sums).collect()
    } else {
        (0..n_chunks).map(chunk_sums).collect()
    };
    let mut sum = vec![0.0; n];
    let mut outer = vec![0.0; n * n];
    for (s, o) in &partials {
        for i in 0..n {
            sum[i] += s[i];
        }
        for k in 0..n * n {
            outer[k] += o[k];
        }
    }
    let nf = opts.n_traj as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let covariance: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (outer[k] / nf - mean[i] * mean[j]) * nf / (nf - 1.0) / nf
        })
        .collect();
    let stderr: Vec<f64> = (0..n).map(|i| covariance[i * n + i].max(0.0).sqrt()).collect();
    let joint = JointDistribution::from_fn(scheme, |z, y, x| mean[(z * ny + y) * nx + x]);
    Ok(OracleResult {
        joint,
        stderr: Some(stderr),
        meta: OracleMeta {
            kind: "monte-carlo".into(),
            n_traj: Some(opts.n_traj),
            seed: Some(opts.seed),
            fock_cutoff: None,
        },
        covariance: Some(covariance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::cpf_from_joint;

    fn opts(n: usize, seed: u64) -> McOptions {
        McOptions { n_traj: n, seed, ..McOptions::default() }
    }

    #[test]
    fn noiseless_paths_have_zero_variance() {
        let model = ClassicalNoiseModel::new(0.0, 0.1).unwrap();
        let rho = DensityMatrix::qubit_superposition(0.6).unwrap();
        let r = mc_joint_prob(&model, &MeasurementScheme::xzx(), &rho, 1.0, 0.5, &opts(2000, 1)).unwrap();
        assert!(r.stderr.unwrap().iter().all(|&s| s < 1e-12));
        let y_plus = cpf_from_joint(&r.joint, 0, 1e-12).unwrap();
        assert!(y_plus.abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_bits_across_schedules() {
        let model = ClassicalNoiseModel::new(1.0, 0.1).unwrap();
        let rho = DensityMatrix::qubit_superposition(1.0).unwrap();
        let scheme = MeasurementScheme::xxx();
        let a = mc_joint_prob(&model, &scheme, &rho, 0.5, 0.5, &opts(10_000, 7)).unwrap();
        let b = mc_joint_prob(&model, &scheme, &rho, 0.5, 0.5, &McOptions { parallel: false, ..opts(10_000, 7) }).unwrap();
        assert_eq!(a, b);
        let c = mc_joint_prob(&model, &scheme, &rho, 0.5, 0.5, &opts(10_000, 8)).unwrap();
        assert_ne!(a.joint, c.joint);
    }

    #[test]
    fn too_few_trajectories_rejected() {
        let model = ClassicalNoiseModel::new(1.0, 0.1).unwrap();
        let rho = DensityMatrix::qubit_superposition(1.0).unwrap();
        assert!(mc_joint_prob(&model, &MeasurementScheme::xxx(), &rho, 1.0, 1.0, &opts(10, 0)).is_err());
    }
}
