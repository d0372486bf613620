//! Branch-ordered Wick enumeration of the series terms.
//!
//! An order-`n` term carries `2n` coupling insertions in chronological
//! order: the mandatory one at `t′`, `k_p` extra ones inside `(t′, t)`,
//! `k_f = 2n − 2 − k_p` inside `(t, t+τ′)` and the mandatory one at `t+τ′`.
//! Every insertion but the last is followed by a `Q = 1 − P`; choosing `−P`
//! closes the bath trace accumulated so far, so the bath factor is a product
//! over contiguous chronological segments. Inside a segment the operator
//! string is brought around the reference state by cyclicity: right-branch
//! operators in chronological order followed by left-branch operators in
//! reverse chronological order, and Wick pairs are scored in that order.
//!
//! All pair functions decay as `e^{−|Δ|/τc}`, so once the chronological
//! order is fixed the time dependence of a pairing only depends on which
//! insertions open an arc. Terms are therefore accumulated per
//! `(order, k_p, opener mask)` into a `d² × d²` coefficient matrix that
//! contracts the vectorized past slot against the future read-out.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::bath::{BathModel, BathSymbol, CouplingStructure};
use crate::error::{Error, Result};
use crate::operator::{c, identity, max_abs, ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Window {
    Past,
    Future,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// `−i (S⊗B) X`
    Left,
    /// `+i X (S⊗B)`
    Right,
}

/// One coupling insertion of a series term (times are implicit in its
/// chronological position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insertion {
    pub window: Window,
    pub branch: Branch,
    pub coupling: usize,
}

impl Insertion {
    /// `−i` for the left branch, `+i` for the right.
    pub fn phase(&self) -> C64 {
        match self.branch {
            Branch::Left => c(0.0, -1.0),
            Branch::Right => c(0.0, 1.0),
        }
    }
}

/// A perfect matching of a bath string with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTerm {
    /// Pairs of chronological positions, earlier position first.
    pub pairing: Vec<(usize, usize)>,
    /// Product of zero-lag pair amplitudes, in linearized product order.
    pub weight: f64,
    /// Number of `−P` cuts.
    pub cuts: u32,
}

/// Identifies the time structure shared by a group of terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub order: usize,
    /// Extra insertions in the past window.
    pub past: usize,
    /// Bit `i` set when chronological position `i` opens an arc.
    pub openers: u32,
}

impl TermKey {
    pub fn insertions(&self) -> usize {
        2 * self.order
    }

    /// Number of open arcs on each of the `2n − 1` chronological gaps.
    pub fn multiplicities(&self) -> Vec<u32> {
        let n = self.insertions();
        let mut open: i32 = 0;
        let mut out = Vec::with_capacity(n - 1);
        for pos in 0..n - 1 {
            open += if self.openers & (1 << pos) != 0 { 1 } else { -1 };
            debug_assert!(open >= 0);
            out.push(open as u32);
        }
        out
    }

    /// Gap multiplicities touching the past window, ending with the gap that
    /// spans the middle measurement.
    pub fn past_multiplicities(&self) -> Vec<u32> {
        self.multiplicities()[..=self.past].to_vec()
    }

    /// Gap multiplicities of the future window, starting with the gap that
    /// spans the middle measurement.
    pub fn future_multiplicities(&self) -> Vec<u32> {
        self.multiplicities()[self.past..].to_vec()
    }
}

/// Enumerates Wick pairings of `symbols` (in product order); `visit`
/// receives the index pairs and the amplitude product. Zero-amplitude
/// branches are pruned.
pub fn wick_pairings(
    model: &BathModel,
    symbols: &[BathSymbol],
    visit: &mut dyn FnMut(&[(usize, usize)], f64),
) -> Result<()> {
    if symbols.len() % 2 == 1 {
        return Ok(());
    }
    let mut used = vec![false; symbols.len()];
    let mut pairs = Vec::with_capacity(symbols.len() / 2);
    recurse(model, symbols, &mut used, &mut pairs, 1.0, visit)
}

fn recurse(
    model: &BathModel,
    symbols: &[BathSymbol],
    used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    weight: f64,
    visit: &mut dyn FnMut(&[(usize, usize)], f64),
) -> Result<()> {
    let Some(first) = used.iter().position(|u| !u) else {
        visit(pairs, weight);
        return Ok(());
    };
    used[first] = true;
    for second in first + 1..symbols.len() {
        if used[second] {
            continue;
        }
        let amp = model.pair_amplitude(symbols[first], symbols[second])?;
        if amp == 0.0 {
            continue;
        }
        used[second] = true;
        pairs.push((first, second));
        recurse(model, symbols, used, pairs, weight * amp, visit)?;
        pairs.pop();
        used[second] = false;
    }
    used[first] = false;
    Ok(())
}

/// Bath factor of one insertion string for every admissible cut pattern,
/// grouped by opener mask.
fn bath_factors(
    model: &BathModel,
    insertions: &[Insertion],
    symbols: &[BathSymbol],
) -> Result<BTreeMap<u32, f64>> {
    let n = insertions.len();
    let mut out: BTreeMap<u32, f64> = BTreeMap::new();
    // bit i of `cuts`: −P after chronological position i (i < n − 1)
    for cuts in 0u32..(1 << (n - 1)) {
        let mut bounds = Vec::new();
        let mut start = 0;
        for pos in 0..n {
            if pos == n - 1 || cuts & (1 << pos) != 0 {
                bounds.push((start, pos + 1));
                start = pos + 1;
            }
        }
        if bounds.iter().any(|(a, b)| (b - a) % 2 == 1) {
            continue;
        }
        let sign = if cuts.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        // per segment: opener mask → summed amplitude
        let mut acc: BTreeMap<u32, f64> = BTreeMap::from([(0, sign)]);
        for &(a, b) in &bounds {
            let mut order: Vec<usize> = (a..b).filter(|&p| insertions[p].branch == Branch::Right).collect();
            order.extend((a..b).rev().filter(|&p| insertions[p].branch == Branch::Left));
            let syms: Vec<BathSymbol> = order.iter().map(|&p| symbols[p]).collect();
            let mut seg: BTreeMap<u32, f64> = BTreeMap::new();
            wick_pairings(model, &syms, &mut |pairs, w| {
                let mask = pairs
                    .iter()
                    .fold(0u32, |m, &(i, j)| m | 1 << order[i].min(order[j]));
                *seg.entry(mask).or_insert(0.0) += w;
            })?;
            let mut next = BTreeMap::new();
            for (m1, w1) in &acc {
                for (m2, w2) in &seg {
                    *next.entry(m1 | m2).or_insert(0.0) += w1 * w2;
                }
            }
            acc = next;
            if acc.is_empty() {
                break;
            }
        }
        for (mask, w) in acc {
            *out.entry(mask).or_insert(0.0) += w;
        }
    }
    out.retain(|_, w| *w != 0.0);
    Ok(out)
}

/// `vec(Mᵀ)`, so that `Tr(M X) = vec(Mᵀ)·vec(X)`.
pub fn dual_vec(m: &ComplexMatrix) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

/// Coefficient matrices of all terms of one order for one middle outcome.
#[derive(Debug, Clone)]
pub struct ContractionTable {
    pub order: usize,
    pub dim: usize,
    /// `T[key]_{ij}`: `i` indexes the vectorized past slot
    /// `Λ_{t′}[slot]`, `j` the vectorized future operator fed into
    /// `Tr(E_z Λ_{τ−τ′}[·])`.
    pub entries: BTreeMap<TermKey, DMatrix<C64>>,
}

impl ContractionTable {
    /// Builds the table for `order` with collapsed state `rho_y` and middle
    /// effect `e_y`.
    pub fn build(
        model: &BathModel,
        coupling: &CouplingStructure,
        e_y: &ComplexMatrix,
        rho_y: &ComplexMatrix,
        order: usize,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::Argument("series orders start at 1".into()));
        }
        if order > 6 {
            return Err(Error::UnsupportedOrder { requested: order, maximum: 6 });
        }
        let d = e_y.nrows();
        let n = 2 * order;
        let terms = coupling.terms.len();
        let choices = 2 * terms;
        let mut entries: BTreeMap<TermKey, DMatrix<C64>> = BTreeMap::new();
        let id = identity(d);
        for past in 0..=n - 2 {
            let mut digits = vec![0usize; n];
            loop {
                let insertions: Vec<Insertion> = digits
                    .iter()
                    .enumerate()
                    .map(|(pos, &dgt)| Insertion {
                        window: if pos <= past { Window::Past } else { Window::Future },
                        branch: if dgt % 2 == 0 { Branch::Left } else { Branch::Right },
                        coupling: dgt / 2,
                    })
                    .collect();
                if let Some((a_dual, n_vec, phase)) =
                    system_factors(coupling, &insertions, past, e_y, rho_y, &id)
                {
                    let symbols: Vec<BathSymbol> =
                        insertions.iter().map(|ins| coupling.terms[ins.coupling].symbol).collect();
                    for (openers, w) in bath_factors(model, &insertions, &symbols)? {
                        let key = TermKey { order, past, openers };
                        let factor = phase * w;
                        let t = entries.entry(key).or_insert_with(|| DMatrix::zeros(d * d, d * d));
                        for i in 0..d * d {
                            if a_dual[i] == c(0.0, 0.0) {
                                continue;
                            }
                            let ai = a_dual[i] * factor;
                            for j in 0..d * d {
                                t[(i, j)] += ai * n_vec[j];
                            }
                        }
                    }
                }
                // next assignment
                let mut k = 0;
                while k < n {
                    digits[k] += 1;
                    if digits[k] < choices {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
        }
        entries.retain(|_, m| m.iter().any(|z| z.norm() > 0.0));
        Ok(Self { order, dim: d, entries })
    }

    /// Contraction terms of a single insertion string, for inspection.
    pub fn contractions(
        model: &BathModel,
        coupling: &CouplingStructure,
        insertions: &[Insertion],
    ) -> Result<Vec<ContractionTerm>> {
        let symbols: Vec<BathSymbol> =
            insertions.iter().map(|ins| coupling.terms[ins.coupling].symbol).collect();
        let n = insertions.len();
        let mut out = Vec::new();
        for cuts in 0u32..(1 << (n - 1)) {
            let mut bounds = Vec::new();
            let mut start = 0;
            for pos in 0..n {
                if pos == n - 1 || cuts & (1 << pos) != 0 {
                    bounds.push((start, pos + 1));
                    start = pos + 1;
                }
            }
            if bounds.iter().any(|(a, b)| (b - a) % 2 == 1) {
                continue;
            }
            let mut partial: Vec<(Vec<(usize, usize)>, f64)> = vec![(Vec::new(), 1.0)];
            for &(a, b) in &bounds {
                let mut order: Vec<usize> = (a..b).filter(|&p| insertions[p].branch == Branch::Right).collect();
                order.extend((a..b).rev().filter(|&p| insertions[p].branch == Branch::Left));
                let syms: Vec<BathSymbol> = order.iter().map(|&p| symbols[p]).collect();
                let mut seg = Vec::new();
                wick_pairings(model, &syms, &mut |pairs, w| {
                    let chrono: Vec<(usize, usize)> = pairs
                        .iter()
                        .map(|&(i, j)| (order[i].min(order[j]), order[i].max(order[j])))
                        .collect();
                    seg.push((chrono, w));
                })?;
                let mut next = Vec::new();
                for (p1, w1) in &partial {
                    for (p2, w2) in &seg {
                        let mut p = p1.clone();
                        p.extend(p2);
                        next.push((p, w1 * w2));
                    }
                }
                partial = next;
            }
            for (mut pairing, weight) in partial {
                pairing.sort();
                out.push(ContractionTerm { pairing, weight, cuts: cuts.count_ones() });
            }
        }
        Ok(out)
    }
}

/// `(vec(Aᵀ), vec(N), phase)` with `A = R_past E_y L_past` and
/// `N = L_future ρ_y R_future`; `None` when either vanishes.
fn system_factors(
    coupling: &CouplingStructure,
    insertions: &[Insertion],
    past: usize,
    e_y: &ComplexMatrix,
    rho_y: &ComplexMatrix,
    id: &ComplexMatrix,
) -> Option<(Vec<C64>, Vec<C64>, C64)> {
    let mut left = id.clone();
    let mut right = id.clone();
    let mut phase = c(1.0, 0.0);
    for ins in &insertions[..=past] {
        let s = &coupling.terms[ins.coupling].system;
        match ins.branch {
            Branch::Left => left = s * left,
            Branch::Right => right *= s,
        }
        phase *= ins.phase();
    }
    let a = right * e_y * left;
    if max_abs(&a) == 0.0 {
        return None;
    }
    let mut left = id.clone();
    let mut right = id.clone();
    for ins in &insertions[past + 1..] {
        let s = &coupling.terms[ins.coupling].system;
        match ins.branch {
            Branch::Left => left = s * left,
            Branch::Right => right *= s,
        }
        phase *= ins.phase();
    }
    let nmat = left * rho_y * right;
    if max_abs(&nmat) == 0.0 {
        return None;
    }
    Some((dual_vec(&a), nmat.as_slice().to_vec(), phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{ClassicalNoiseModel, QuantumBathModel};

    #[test]
    fn zero_temperature_string_has_single_pairing() {
        use BathSymbol::*;
        let m = BathModel::Bosonic(QuantumBathModel::zero_temperature(1.0, 0.2).unwrap());
        let mut found = Vec::new();
        wick_pairings(&m, &[Lower, Raise, Lower, Raise], &mut |p, w| found.push((p.to_vec(), w))).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].0, vec![(0, 1), (2, 3)]);
        assert!((found[0].1 - 2.5f64.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn classical_four_point_has_three_pairings() {
        let m = BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.1).unwrap());
        let mut count = 0;
        wick_pairings(&m, &[BathSymbol::Noise; 4], &mut |_, _| count += 1).unwrap();
        assert_eq!(count, 3);
        let mut count = 0;
        wick_pairings(&m, &[BathSymbol::Noise; 6], &mut |_, _| count += 1).unwrap();
        assert_eq!(count, 15);
    }

    #[test]
    fn multiplicities_follow_arcs() {
        // arcs (0,3) and (1,2): gaps carry 1, 2, 1
        let key = TermKey { order: 2, past: 1, openers: 0b0011 };
        assert_eq!(key.multiplicities(), vec![1, 2, 1]);
        assert_eq!(key.past_multiplicities(), vec![1, 2]);
        assert_eq!(key.future_multiplicities(), vec![2, 1]);
    }

    #[test]
    fn cut_strings_factorize() {
        let m = BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.1).unwrap());
        let cs = CouplingStructure::dephasing();
        let ins = vec![
            Insertion { window: Window::Past, branch: Branch::Left, coupling: 0 };
            4
        ];
        let terms = ContractionTable::contractions(&m, &cs, &ins).unwrap();
        // no cut: 3 pairings; cut after position 1: only (0,1)(2,3)
        assert_eq!(terms.iter().filter(|t| t.cuts == 0).count(), 3);
        let cut: Vec<_> = terms.iter().filter(|t| t.cuts == 1).collect();
        assert_eq!(cut.len(), 1);
        assert_eq!(cut[0].pairing, vec![(0, 1), (2, 3)]);
    }
}
