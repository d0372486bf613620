use nalgebra::{DMatrix, DVector};

use super::{c, identity, validate_hermitian, ComplexMatrix, DensityMatrix, C64, TOLERANCES};
use crate::error::{Error, Result};

/// Linear map on `dim × dim` operators, stored as its `dim² × dim²` action on
/// column-stacked operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Argument(format!(
                "superoperator on dim {dim} needs a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { dim, matrix })
    }

    /// Builds the matrix column by column from the action on the basis
    /// `|i⟩⟨j|`.
    pub fn from_fn(dim: usize, action: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n = dim * dim;
        let mut matrix = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut basis = ComplexMatrix::zeros(dim, dim);
            basis[(col % dim, col / dim)] = c(1.0, 0.0);
            let image = action(&basis);
            for (row, value) in image.as_slice().iter().enumerate() {
                matrix[(row, col)] = *value;
            }
        }
        Self { dim, matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: DMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, matrix: DMatrix::zeros(dim * dim, dim * dim) }
    }

    /// `X ↦ A X`
    pub fn left(a: &ComplexMatrix) -> Self {
        let d = a.nrows();
        Self { dim: d, matrix: identity(d).kronecker(a) }
    }

    /// `X ↦ X B`
    pub fn right(b: &ComplexMatrix) -> Self {
        let d = b.nrows();
        Self { dim: d, matrix: b.transpose().kronecker(&identity(d)) }
    }

    /// `X ↦ A X B`
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        Self { dim: a.nrows(), matrix: b.transpose().kronecker(a) }
    }

    /// Lindblad dissipator `D[L]X = L X L† − ½{L†L, X}`.
    pub fn dissipator(l: &ComplexMatrix) -> Self {
        let ldl = l.adjoint() * l;
        let half = c(0.5, 0.0);
        let mut out = Self::sandwich(l, &l.adjoint());
        out.matrix -= Self::left(&ldl).matrix * half;
        out.matrix -= Self::right(&ldl).matrix * half;
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(x.nrows(), self.dim);
        let v = DVector::from_column_slice(x.as_slice());
        let out = &self.matrix * v;
        ComplexMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> ComplexMatrix {
        self.apply(rho.matrix())
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        Self { dim: self.dim, matrix: &self.matrix * &other.matrix }
    }

    pub fn add(&self, other: &SuperOperator) -> SuperOperator {
        Self { dim: self.dim, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &SuperOperator) -> SuperOperator {
        Self { dim: self.dim, matrix: &self.matrix - &other.matrix }
    }

    pub fn scale(&self, factor: C64) -> SuperOperator {
        Self { dim: self.dim, matrix: &self.matrix * factor }
    }

    pub fn exp(&self) -> SuperOperator {
        Self { dim: self.dim, matrix: self.matrix.exp() }
    }

    /// Heisenberg-picture image `F` with `Tr(E Λ[X]) = Tr(F X)` for all `X`.
    pub fn dual_apply(&self, e: &ComplexMatrix) -> ComplexMatrix {
        let et = DVector::from_column_slice(e.transpose().as_slice());
        let ft = self.matrix.transpose() * et;
        ComplexMatrix::from_column_slice(self.dim, self.dim, ft.as_slice()).transpose()
    }

    /// Largest deviation of `Tr Λ[X]` from `Tr X` over the matrix-unit basis.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let mut sum = C64::new(0.0, 0.0);
            for k in 0..d {
                sum += self.matrix[(k + k * d, col)];
            }
            let expected = if col % d == col / d { 1.0 } else { 0.0 };
            worst = worst.max((sum - C64::new(expected, 0.0)).norm());
        }
        worst
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_defect() <= TOLERANCES.trace_preservation
    }

    /// Largest `|Tr Λ[X]|` over the basis; zero for trace-annihilating maps.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| {
                (0..d)
                    .map(|k| self.matrix[(k + k * d, col)])
                    .sum::<C64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut unit = ComplexMatrix::zeros(d, d);
                unit[(i, j)] = c(1.0, 0.0);
                let image = self.apply(&unit);
                for a in 0..d {
                    for b in 0..d {
                        out[(i * d + a, j * d + b)] = image[(a, b)];
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the Choi matrix; nonnegative for completely
    /// positive maps.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        super::hermitian_eigenvalues(&self.choi())[0]
    }

    pub fn max_abs_diff(&self, other: &SuperOperator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Induced 2-norm bound via the Frobenius norm of the representation.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `L[ρ] = −i(Hρ − ρH)` for Hermitian `H`.
pub fn commutator_superop(h: &ComplexMatrix) -> Result<SuperOperator> {
    validate_hermitian(h, "Hamiltonian")?;
    Ok(commutator_unchecked(h))
}

pub(crate) fn commutator_unchecked(h: &ComplexMatrix) -> SuperOperator {
    let minus_i = c(0.0, -1.0);
    let l = SuperOperator::left(h);
    let r = SuperOperator::right(h);
    l.sub(&r).scale(minus_i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Environment,
}

/// Partial trace of a bipartite operator on `d_s · d_e`, keeping `keep`.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix> {
    let (ds, de) = dims;
    if m.nrows() != ds * de || m.ncols() != ds * de {
        return Err(Error::Argument(format!(
            "partial trace over dims ({ds}, {de}) needs a {0}x{0} matrix, got {1}x{2}",
            ds * de,
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(match keep {
        Subsystem::System => ComplexMatrix::from_fn(ds, ds, |i, j| {
            (0..de).map(|k| m[(i * de + k, j * de + k)]).sum()
        }),
        Subsystem::Environment => ComplexMatrix::from_fn(de, de, |a, b| {
            (0..ds).map(|k| m[(k * de + a, k * de + b)]).sum()
        }),
    })
}

/// `P[ρ] = Tr_e(ρ) ⊗ σ_e` on the bipartite space `d_s ⊗ dim(σ_e)`.
pub fn projector_p(sigma_e: &DensityMatrix, system_dim: usize) -> SuperOperator {
    let de = sigma_e.dim();
    SuperOperator::from_fn(system_dim * de, |x| {
        let reduced = partial_trace(x, (system_dim, de), Subsystem::System)
            .expect("dimensions fixed by construction");
        reduced.kronecker(sigma_e.matrix())
    })
}

/// `Q = I − P`.
pub fn projector_q(sigma_e: &DensityMatrix, system_dim: usize) -> SuperOperator {
    let p = projector_p(sigma_e, system_dim);
    SuperOperator::identity(p.dim()).sub(&p)
}

/// Both projectors for a reference environment state.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub p: SuperOperator,
    pub q: SuperOperator,
}

impl ProjectorPair {
    pub fn new(sigma_e: &DensityMatrix, system_dim: usize) -> Self {
        let p = projector_p(sigma_e, system_dim);
        let q = SuperOperator::identity(p.dim()).sub(&p);
        Self { p, q }
    }

    /// Largest violation among `P² = P`, `Q² = Q`, `PQ = QP = 0`, `P + Q = I`.
    pub fn algebra_defect(&self) -> f64 {
        let zero = SuperOperator::zero(self.p.dim());
        let id = SuperOperator::identity(self.p.dim());
        [
            self.p.compose(&self.p).max_abs_diff(&self.p),
            self.q.compose(&self.q).max_abs_diff(&self.q),
            self.p.compose(&self.q).max_abs_diff(&zero),
            self.q.compose(&self.p).max_abs_diff(&zero),
            self.p.add(&self.q).max_abs_diff(&id),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{kron, max_abs, trace, pauli_x, pauli_y, pauli_z, projector_onto};

    #[test]
    fn commutator_of_pauli_z_on_x() {
        let l = commutator_superop(&pauli_z()).unwrap();
        let out = l.apply(&pauli_x());
        assert!(max_abs(&(out - pauli_y() * c(2.0, 0.0))) < 1e-14);
    }

    #[test]
    fn identity_hamiltonian_generates_nothing() {
        let l = commutator_superop(&identity(2)).unwrap();
        let rho = DensityMatrix::qubit_superposition(0.3).unwrap();
        assert!(max_abs(&l.apply(rho.matrix())) < 1e-15);
    }

    #[test]
    fn commutator_on_plus_state_is_traceless_and_antihermitian_flow() {
        let plus = projector_onto(&[c(0.5f64.sqrt(), 0.), c(0.5f64.sqrt(), 0.)]);
        let l = commutator_superop(&pauli_x()).unwrap();
        let out = l.apply(&plus);
        let direct = (pauli_x() * &plus - &plus * pauli_x()) * c(0.0, -1.0);
        assert!(max_abs(&(&out - direct)) < 1e-15);
        assert!(trace(&out).norm() < 1e-15);
        // −i[H, ρ] is Hermitian for Hermitian H and ρ
        assert!(super::super::hermiticity_defect(&out) < 1e-15);
        assert!(l.trace_annihilation_defect() < 1e-15);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        assert!(commutator_superop(&crate::operator::sigma_plus()).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_bell_state() {
        let rho = DensityMatrix::qubit_superposition(0.7).unwrap();
        let sigma = crate::operator::from_rows(2, &[c(0.25, 0.), c(0.1, 0.05), c(0.1, -0.05), c(0.75, 0.)]);
        let m = kron(rho.matrix(), &sigma);
        let red = partial_trace(&m, (2, 2), Subsystem::System).unwrap();
        assert!(max_abs(&(red - rho.matrix())) < 1e-15);

        let s = 0.5f64.sqrt();
        let bell = projector_onto(&[c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        let red = partial_trace(&bell, (2, 2), Subsystem::System).unwrap();
        assert!(max_abs(&(red - identity(2) * c(0.5, 0.))) < 1e-15);
        assert!(partial_trace(&bell, (2, 3), Subsystem::System).is_err());
    }

    #[test]
    fn projectors_fix_and_annihilate_products() {
        let sigma = DensityMatrix::qubit_superposition(0.2).unwrap();
        let rho = DensityMatrix::qubit_superposition(0.6).unwrap();
        let pair = ProjectorPair::new(&sigma, 2);
        let prod = kron(rho.matrix(), sigma.matrix());
        assert!(max_abs(&(pair.p.apply(&prod) - &prod)) < 1e-15);
        assert!(max_abs(&pair.q.apply(&prod)) < 1e-15);
        assert!(pair.algebra_defect() < 1e-12);
    }

    #[test]
    fn dual_apply_matches_expectation() {
        let l = commutator_superop(&pauli_x()).unwrap().scale(c(0.3, 0.0)).exp();
        let rho = DensityMatrix::qubit_superposition(0.9).unwrap();
        let e = projector_onto(&[c(1., 0.), c(0., 0.)]);
        let direct = trace(&(&e * l.apply(rho.matrix())));
        let dual = trace(&(l.dual_apply(&e) * rho.matrix()));
        assert!((direct - dual).norm() < 1e-15);
    }
}
