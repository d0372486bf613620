//! Exact references for the series: Gaussian dephasing statistics, Monte
//! Carlo over Ornstein-Uhlenbeck paths and the pseudomode embedding.

mod gaussian;
mod montecarlo;
mod ou;
mod pseudomode;

pub use gaussian::{gaussian_dephasing_exact, phase_covariance, PhaseCovariance};
pub use montecarlo::{mc_joint_prob, McOptions, MC_CHUNK};
pub use ou::OUPathSampler;
pub use pseudomode::{
    annihilation, converge_cutoff, mode_correlation_check, pseudomode_channel_table,
    pseudomode_joint_prob, ModeCorrelationReport, PseudomodeModel, CUTOFF_TOLERANCE,
};

use serde::Serialize;

use crate::error::Result;
use crate::measurement::{cpf_from_joint, JointDistribution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleMeta {
    pub kind: String,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub fock_cutoff: Option<usize>,
}

/// Joint distribution from an exact reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub joint: JointDistribution,
    /// Per-entry standard errors, same layout as the joint table (Monte
    /// Carlo only).
    pub stderr: Option<Vec<f64>>,
    pub meta: OracleMeta,
    /// Covariance of the per-trajectory entry estimates divided by the
    /// trajectory count, row-major over table entries (Monte Carlo only).
    #[serde(skip)]
    pub covariance: Option<Vec<f64>>,
}

impl OracleResult {
    pub fn cpf(&self, y: usize) -> Result<f64> {
        cpf_from_joint(&self.joint, y, 1e-12)
    }

    /// Delta-method standard error of the CPF for outcome `y`; `None` for
    /// deterministic oracles.
    pub fn cpf_stderr(&self, y: usize) -> Option<f64> {
        let cov = self.covariance.as_ref()?;
        let n = self.joint.values().len();
        let base = self.cpf(y).ok()?;
        let mut grad = vec![0.0; n];
        for (i, g) in grad.iter_mut().enumerate() {
            let h = 1e-6;
            let mut bumped = self.joint.clone();
            let (_, ny, nx) = bumped.shape();
            let (z, rest) = (i / (ny * nx), i % (ny * nx));
            let (yy, x) = (rest / nx, rest % nx);
            bumped.set(z, yy, x, self.joint.get(z, yy, x) + h);
            *g = (cpf_from_joint(&bumped, y, 1e-12).ok()? - base) / h;
        }
        let mut var = 0.0;
        for i in 0..n {
            for j in 0..n {
                var += grad[i] * cov[i * n + j] * grad[j];
            }
        }
        Some(var.max(0.0).sqrt())
    }
}
