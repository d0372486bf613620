//! Dense complex operator and superoperator algebra.
//!
//! Operators are `nalgebra` dense matrices of [`C64`]. Superoperators act on
//! column-stacked operators: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, so left
//! multiplication by `A` is `I ⊗ A` and right multiplication by `B` is
//! `Bᵀ ⊗ I`. Bipartite operators are ordered system ⊗ environment.
//!
//! Qubit basis convention: index 0 is the excited state `|+⟩` (σ_z = +1),
//! index 1 the ground state `|−⟩`.

mod superop;
mod timeorder;

pub use superop::{
    commutator_superop, partial_trace, projector_p, projector_q, ProjectorPair, Subsystem,
    SuperOperator,
};
pub use timeorder::{time_ordered_exp, StepPropagator, TimeGrid};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Square dense complex matrix.
pub type ComplexMatrix = DMatrix<C64>;

/// Fixed numerical tolerances used by validation throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub eigenvalue_floor: f64,
    pub trace_preservation: f64,
    pub complete_positivity: f64,
    pub projector_algebra: f64,
    pub measurement_completeness: f64,
    pub imaginary_residue: f64,
    pub conditioning: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    hermiticity: 1e-12,
    trace: 1e-12,
    eigenvalue_floor: -1e-10,
    trace_preservation: 1e-10,
    complete_positivity: 1e-8,
    projector_algebra: 1e-12,
    measurement_completeness: 1e-12,
    imaginary_residue: 1e-10,
    conditioning: 1e-12,
};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(dim, dim)
}

/// Builds a matrix from row-major real-imaginary pairs.
pub fn from_rows(dim: usize, entries: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(dim, dim, entries)
}

pub fn pauli_x() -> ComplexMatrix {
    from_rows(2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> ComplexMatrix {
    from_rows(2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> ComplexMatrix {
    from_rows(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// `σ_+ = |+⟩⟨−|`
pub fn sigma_plus() -> ComplexMatrix {
    from_rows(2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// `σ_− = |−⟩⟨+|`
pub fn sigma_minus() -> ComplexMatrix {
    from_rows(2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
}

/// `|ψ⟩⟨ψ|` for a (not necessarily normalized) column vector.
pub fn projector_onto(psi: &[C64]) -> ComplexMatrix {
    let n = psi.len();
    ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.trace()
}

/// Largest entry modulus of `M − M†`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral norm bound used for operator-norm comparisons (Frobenius norm,
/// which dominates the spectral norm).
pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn validate_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Validation(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::Validation(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub fn validate_hermitian(m: &ComplexMatrix, what: &str) -> Result<()> {
    validate_square(m, what)?;
    let defect = hermiticity_defect(m);
    if defect > TOLERANCES.hermiticity {
        return Err(Error::Validation(format!(
            "{what} is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        validate_hermitian(&m, "density matrix")?;
        let tr = trace(&m);
        if (tr - C64::new(1.0, 0.0)).norm() > TOLERANCES.trace {
            return Err(Error::Validation(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min_ev = hermitian_eigenvalues(&m)[0];
        if min_ev < TOLERANCES.eigenvalue_floor {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(Self(m))
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalized first.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Validation("state vector has zero norm".into()));
        }
        let normalized: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(projector_onto(&normalized))
    }

    /// `√p|+⟩ + √(1−p)|−⟩`.
    pub fn qubit_superposition(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("p = {p} outside [0, 1]")));
        }
        Self::pure(&[c(p.sqrt(), 0.0), c((1.0 - p).sqrt(), 0.0)])
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim) / c(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}
