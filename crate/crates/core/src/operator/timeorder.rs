use nalgebra::{DMatrix, DVector};

use super::{ComplexMatrix, SuperOperator, C64};
use crate::error::{Error, Result};

/// Uniform grid on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Argument(format!(
                "time grid needs t_end > t_start and n_steps > 0 (got [{t_start}, {t_end}], {n_steps})"
            )));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    /// Grid starting at `t_start` whose step does not exceed `h_max`.
    pub fn with_max_step(t_start: f64, t_end: f64, h_max: f64) -> Result<Self> {
        if !(h_max > 0.0) {
            return Err(Error::Argument(format!("step bound must be positive, got {h_max}")));
        }
        let n = ((t_end - t_start) / h_max).ceil().max(1.0) as usize;
        Self::new(t_start, t_end, n)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Same interval, step halved.
    pub fn refined(&self) -> Self {
        Self { n_steps: 2 * self.n_steps, ..*self }
    }

    /// Sub-intervals of `[a, b]` cut at grid nodes.
    fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let h = self.step();
        let tol = 1e-12 * h;
        let mut cuts = vec![a];
        let first = ((a - self.t_start) / h + 1e-9).floor() as isize + 1;
        let mut k = first.max(0) as usize;
        while k <= self.n_steps {
            let node = self.node(k);
            if node >= b - tol {
                break;
            }
            if node > a + tol {
                cuts.push(node);
            }
            k += 1;
        }
        cuts.push(b);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Time-ordered exponential of `generator` from `t_a` to `t_b`, built from
/// midpoint exponentials on the pieces of `[t_a, t_b]` cut by the grid nodes.
/// Later times act to the left.
pub fn time_ordered_exp(
    generator: impl Fn(f64) -> SuperOperator,
    t_a: f64,
    t_b: f64,
    grid: &TimeGrid,
) -> Result<SuperOperator> {
    if t_b < t_a {
        return Err(Error::Argument(format!("time-ordered exponential needs t_b >= t_a, got [{t_a}, {t_b}]")));
    }
    let tol = 1e-12 * grid.step();
    if t_a < grid.t_start - tol || t_b > grid.t_end + tol {
        return Err(Error::Argument(format!(
            "interval [{t_a}, {t_b}] not covered by grid [{}, {}]",
            grid.t_start, grid.t_end
        )));
    }
    let probe = generator(t_a);
    let mut out = SuperOperator::identity(probe.dim());
    if t_b == t_a {
        return Ok(out);
    }
    for (s0, s1) in grid.segments(t_a, t_b) {
        let mid = 0.5 * (s0 + s1);
        let step = generator(mid).scale((s1 - s0).into()).exp();
        out = step.compose(&out);
    }
    Ok(out)
}

/// Repeated application of `exp(hL)` for a constant generator `L`.
///
/// The generator may be split into invariant blocks of vectorized indices;
/// each block is exponentiated and applied on its own.
#[derive(Debug, Clone)]
pub struct StepPropagator {
    dim: usize,
    step: f64,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    generator: DMatrix<C64>,
    step_map: DMatrix<C64>,
}

impl Block {
    fn apply(&self, map: &DMatrix<C64>, input: &[C64], out: &mut [C64]) {
        let v = DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| input[i]));
        let w = map * v;
        for (k, &i) in self.indices.iter().enumerate() {
            out[i] = w[k];
        }
    }
}

impl StepPropagator {
    pub fn new(generator: SuperOperator, step: f64) -> Result<Self> {
        let n = generator.dim() * generator.dim();
        Self::with_blocks(generator, step, vec![(0..n).collect()])
    }

    /// `blocks` must partition the vectorized indices into subspaces the
    /// generator leaves invariant; coupling between blocks is an error.
    pub fn with_blocks(generator: SuperOperator, step: f64, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Argument(format!("propagation step must be positive, got {step}")));
        }
        let n = generator.dim() * generator.dim();
        let mut owner = vec![usize::MAX; n];
        for (b, idx) in blocks.iter().enumerate() {
            for &i in idx {
                if i >= n || owner[i] != usize::MAX {
                    return Err(Error::Argument("generator blocks must partition the index set".into()));
                }
                owner[i] = b;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::Argument("generator blocks must cover every index".into()));
        }
        let m = generator.matrix();
        let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(1.0);
        for col in 0..n {
            for row in 0..n {
                if owner[row] != owner[col] && m[(row, col)].norm() > 1e-13 * scale {
                    return Err(Error::Argument(format!(
                        "generator couples blocks {} and {}",
                        owner[row], owner[col]
                    )));
                }
            }
        }
        let blocks = blocks
            .into_iter()
            .filter(|idx| !idx.is_empty())
            .map(|indices| {
                let generator = DMatrix::from_fn(indices.len(), indices.len(), |r, c| m[(indices[r], indices[c])]);
                let step_map = (&generator * C64::new(step, 0.0)).exp();
                Block { indices, generator, step_map }
            })
            .collect();
        Ok(Self { dim: generator.dim(), step, blocks })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn apply_maps(&self, x: &ComplexMatrix, pick: impl Fn(&Block) -> DMatrix<C64>) -> ComplexMatrix {
        let mut out = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for b in &self.blocks {
            b.apply(&pick(b), x.as_slice(), &mut out);
        }
        ComplexMatrix::from_column_slice(self.dim, self.dim, &out)
    }

    fn apply_step(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for b in &self.blocks {
            b.apply(&b.step_map, x.as_slice(), &mut out);
        }
        ComplexMatrix::from_column_slice(self.dim, self.dim, &out)
    }

    /// Applies the step map `n` times.
    pub fn advance(&self, x: &ComplexMatrix, n: usize) -> ComplexMatrix {
        let mut state = x.clone();
        for _ in 0..n {
            state = self.apply_step(&state);
        }
        state
    }

    /// Evolves `x` for `duration`: whole steps followed by one exact
    /// remainder step.
    pub fn evolve(&self, x: &ComplexMatrix, duration: f64) -> ComplexMatrix {
        let ratio = duration / self.step;
        let mut n = ratio.floor() as usize;
        let mut rem = duration - n as f64 * self.step;
        if rem > self.step * (1.0 - 1e-10) {
            n += 1;
            rem = 0.0;
        }
        let state = self.advance(x, n);
        if rem > 1e-12 * self.step {
            self.apply_maps(&state, |b| (&b.generator * C64::new(rem, 0.0)).exp())
        } else {
            state
        }
    }

    /// States at `0, h, 2h, …, n h`.
    pub fn trajectory(&self, x: &ComplexMatrix, n: usize) -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x.clone());
        for k in 0..n {
            let next = self.apply_step(&out[k]);
            out.push(next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, commutator_superop, pauli_x, pauli_z, DensityMatrix};

    fn lindblad_z(rate: f64) -> SuperOperator {
        SuperOperator::dissipator(&pauli_z()).scale(c(rate, 0.0))
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        let g = TimeGrid::new(0.0, 2.0, 8).unwrap();
        assert_eq!(g.nodes().len(), 9);
        assert!((g.step() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_generator_matches_expm() {
        let l = commutator_superop(&pauli_x()).unwrap().add(&lindblad_z(0.3));
        let grid = TimeGrid::new(0.0, 1.0, 37).unwrap();
        let u = time_ordered_exp(|_| l.clone(), 0.1, 0.85, &grid).unwrap();
        let exact = l.scale(c(0.75, 0.0)).exp();
        assert!(u.max_abs_diff(&exact) < 1e-10);
    }

    #[test]
    fn commuting_family_matches_integral() {
        let l0 = commutator_superop(&pauli_z()).unwrap();
        let f = |t: f64| 1.0 + t * t;
        let grid = TimeGrid::new(0.0, 1.0, 20000).unwrap();
        let u = time_ordered_exp(|t| l0.scale(c(f(t), 0.0)), 0.0, 1.0, &grid).unwrap();
        let exact = l0.scale(c(4.0 / 3.0, 0.0)).exp();
        assert!(u.max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn reversed_interval_is_an_error() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let l = lindblad_z(1.0);
        assert!(time_ordered_exp(|_| l.clone(), 0.5, 0.2, &grid).is_err());
    }

    #[test]
    fn second_order_self_convergence() {
        let a = commutator_superop(&pauli_x()).unwrap();
        let b = commutator_superop(&pauli_z()).unwrap().add(&lindblad_z(0.2));
        // two pieces, each with a generator that does not commute with itself at
        // different times
        let family = |t: f64| {
            if t < 0.5 {
                a.scale(c((2.0 * t).cos(), 0.0)).add(&b.scale(c(t, 0.0)))
            } else {
                b.scale(c(1.0 - t, 0.0)).add(&a.scale(c(t * t, 0.0)))
            }
        };
        let run = |n: usize| {
            let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
            time_ordered_exp(family, 0.0, 1.0, &grid).unwrap()
        };
        let reference = run(2560);
        let e1 = run(20).max_abs_diff(&reference);
        let e2 = run(40).max_abs_diff(&reference);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn composition_on_shared_grid_is_exact() {
        let a = commutator_superop(&pauli_x()).unwrap();
        let family = |t: f64| a.scale(c(t.sin(), 0.0)).add(&lindblad_z(t));
        let grid = TimeGrid::new(0.0, 2.0, 16).unwrap();
        let full = time_ordered_exp(family, 0.0, 1.5, &grid).unwrap();
        let first = time_ordered_exp(family, 0.0, 0.75, &grid).unwrap();
        let second = time_ordered_exp(family, 0.75, 1.5, &grid).unwrap();
        assert!(full.max_abs_diff(&second.compose(&first)) < 1e-14);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let a = commutator_superop(&pauli_x()).unwrap();
        let family = |t: f64| a.scale(c((3.0 * t).cos(), 0.0)).add(&lindblad_z(0.5));
        let grid = TimeGrid::with_max_step(0.0, 3.0, 1e-2).unwrap();
        let u = time_ordered_exp(family, 0.0, 3.0, &grid).unwrap();
        assert!(u.is_trace_preserving());
        let rho = DensityMatrix::qubit_superposition(0.3).unwrap();
        let out = u.apply(rho.matrix());
        assert!(crate::operator::hermiticity_defect(&out) < 1e-10);
    }

    #[test]
    fn step_propagator_evolve_matches_expm() {
        let l = commutator_superop(&pauli_x()).unwrap().add(&lindblad_z(0.4));
        let prop = StepPropagator::new(l.clone(), 0.01).unwrap();
        let rho = DensityMatrix::qubit_superposition(0.9).unwrap();
        let out = prop.evolve(rho.matrix(), 1.2345);
        let exact = l.scale(c(1.2345, 0.0)).exp().apply(rho.matrix());
        assert!(crate::operator::max_abs(&(out - exact)) < 1e-12);
        let traj = prop.trajectory(rho.matrix(), 3);
        assert_eq!(traj.len(), 4);
    }

    #[test]
    fn block_split_matches_full_propagation() {
        // pure dephasing leaves populations and each coherence invariant
        let l = commutator_superop(&pauli_z()).unwrap().add(&lindblad_z(0.4));
        let full = StepPropagator::new(l.clone(), 0.02).unwrap();
        let split = StepPropagator::with_blocks(l.clone(), 0.02, vec![vec![0, 3], vec![1], vec![2]]).unwrap();
        let rho = DensityMatrix::qubit_superposition(0.4).unwrap();
        let a = full.evolve(rho.matrix(), 0.737);
        let b = split.evolve(rho.matrix(), 0.737);
        assert!(crate::operator::max_abs(&(a - b)) < 1e-14);
        let mixing = commutator_superop(&pauli_x()).unwrap();
        assert!(StepPropagator::with_blocks(mixing, 0.02, vec![vec![0, 3], vec![1], vec![2]]).is_err());
        assert!(StepPropagator::with_blocks(l, 0.02, vec![vec![0, 3], vec![1]]).is_err());
    }
}
