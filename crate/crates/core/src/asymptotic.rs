//! Countable atom families given by closed-form generators, with partial sums,
//! certified tail bounds and a log-log decay fit.
//!
//! The built-in [`PaperExample`] is counting measure on `ℕ` with the
//! sub-σ-algebra generated by the odd singletons `{2k−1}` and the even blocks
//! `A_n = {2k_n, 2(k_n+1), …, 2(k_n+n−1)}`, `k_n = n(n−1)/2 + 1`, and weights
//! `u(n) = n`, `w(n) = n^{−3}`.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::{CompactnessCase, Tail};
use crate::measure::{abs_pow, AtomicSpace, Cell, CellId, SubAlgebra, Weight};
use crate::sum::NeumaierSum;
use crate::wce::{AtomMoments, AtomStats, Exponents, Regime};
use crate::{Error, Result};

/// A countable family of A-atoms described atom by atom.
pub trait AtomFamily: Sync {
    fn name(&self) -> String;

    /// Moments of the atom at position `index` (0-based).
    fn moments(&self, index: usize, exps: &Exponents) -> Result<AtomMoments>;

    /// Statement about `Σ_{i ≥ n} term_i` once the first `n` atoms are summed.
    fn tail_bound(&self, _n: usize, _exps: &Exponents) -> Option<Tail> {
        None
    }

    /// Statement about the compactness quantity beyond the first `n` atoms.
    fn compactness_tail(&self, _case: CompactnessCase, _n: usize, _exps: &Exponents) -> Option<Tail> {
        None
    }
}

/// One row of a partial-sum table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumRow {
    pub index: usize,
    pub term: f64,
    pub partial: f64,
}

/// Statistics of the first `n` atoms, generated in parallel and kept in order.
pub fn family_stats<F: AtomFamily + ?Sized>(family: &F, exps: &Exponents, n: usize) -> Result<Vec<AtomStats>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let m = family.moments(i, exps)?;
            m.validate(i)?;
            Ok(AtomStats::from_moments(i, &m, exps))
        })
        .collect()
}

pub fn partial_sums<F: AtomFamily + ?Sized>(family: &F, exps: &Exponents, n: usize) -> Result<Vec<SumRow>> {
    if exps.regime == Regime::Equal {
        return Err(Error::RegimeUnsupported("partial sums need p != q".into()));
    }
    if n == 0 {
        return Err(Error::InsufficientData("need at least one term".into()));
    }
    let stats = family_stats(family, exps, n)?;
    let mut acc = NeumaierSum::new();
    Ok(stats
        .iter()
        .map(|s| {
            acc.add(s.term);
            SumRow {
                index: s.block_index,
                term: s.term,
                partial: acc.value(),
            }
        })
        .collect())
}

/// Least-squares slope of `ln(term)` against `ln(x)` over the points with
/// `x` in `window`. Heuristic evidence only.
pub fn decay_fit(points: &[(f64, f64)], window: RangeInclusive<f64>) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| window.contains(x) && *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 8 positive terms in the window, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).collect::<NeumaierSum>().value() / n;
    let my = logs.iter().map(|p| p.1).collect::<NeumaierSum>().value() / n;
    let sxy = logs.iter().map(|(x, y)| (x - mx) * (y - my)).collect::<NeumaierSum>().value();
    let sxx = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).collect::<NeumaierSum>().value();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("window holds a single abscissa".into()));
    }
    Ok(sxy / sxx)
}

/// First element index of the even block `A_n` is `2 k_n`.
pub fn k_n(n: u64) -> u64 {
    n * (n - 1) / 2 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExamplePart {
    Odd,
    Even,
    /// All atoms, ordered by their least element.
    Merged,
}

/// An atom of the worked example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleAtom {
    /// The singleton `{2k−1}`, `k ≥ 1`.
    Odd(u64),
    /// The block `A_n`, `n ≥ 1`.
    Even(u64),
}

impl ExampleAtom {
    pub fn cells(self) -> Vec<u64> {
        match self {
            ExampleAtom::Odd(k) => vec![2 * k - 1],
            ExampleAtom::Even(n) => {
                let k = k_n(n);
                (0..n).map(|j| 2 * (k + j)).collect()
            }
        }
    }

    pub fn mass(self) -> f64 {
        match self {
            ExampleAtom::Odd(_) => 1.0,
            ExampleAtom::Even(n) => n as f64,
        }
    }
}

fn u_at(x: u64) -> f64 {
    x as f64
}

fn w_at(x: u64) -> f64 {
    1.0 / (x as f64).powi(3)
}

/// Largest `m` with `m(m+1)/2 <= i`.
fn triangular_root(i: u64) -> u64 {
    let mut m = (((8.0 * i as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while (m + 1) * (m + 2) / 2 <= i {
        m += 1;
    }
    while m > 0 && m * (m + 1) / 2 > i {
        m -= 1;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaperExample {
    pub part: ExamplePart,
}

impl PaperExample {
    pub fn new(part: ExamplePart) -> Self {
        Self { part }
    }

    /// The atom at position `index` (0-based).
    ///
    /// In merged order the block `A_n` sits at position `n(n+1)/2`: it is
    /// preceded by the `k_n` odd singletons below `2k_n` and by `A_1..A_{n−1}`.
    pub fn atom(&self, index: usize) -> ExampleAtom {
        let i = index as u64;
        match self.part {
            ExamplePart::Odd => ExampleAtom::Odd(i + 1),
            ExamplePart::Even => ExampleAtom::Even(i + 1),
            ExamplePart::Merged => {
                let m = triangular_root(i);
                if m >= 1 && m * (m + 1) / 2 == i {
                    ExampleAtom::Even(m)
                } else {
                    ExampleAtom::Odd(i - m + 1)
                }
            }
        }
    }

    /// Number of (odd, even) atoms among the first `n`.
    pub fn split_count(&self, n: usize) -> (usize, usize) {
        match self.part {
            ExamplePart::Odd => (n, 0),
            ExamplePart::Even => (0, n),
            ExamplePart::Merged => {
                if n == 0 {
                    (0, 0)
                } else {
                    // Even blocks occupy positions m(m+1)/2 <= n − 1.
                    let evens = triangular_root(n as u64 - 1) as usize;
                    (n - evens, evens)
                }
            }
        }
    }

    /// Explicit finite space holding the first `count` atoms, with `u` and `w`
    /// as closed-form expressions.
    pub fn materialize(&self, count: usize) -> Result<(AtomicSpace, SubAlgebra, Weight, Weight)> {
        let atoms: Vec<Vec<u64>> = (0..count).map(|i| self.atom(i).cells()).collect();
        let cells = atoms.iter().flatten().map(|&x| Cell::new(x, 1.0)).collect();
        let space = AtomicSpace::new(cells)?;
        let blocks = atoms
            .into_iter()
            .map(|ids| ids.into_iter().map(CellId).collect())
            .collect();
        let alg = SubAlgebra::new(&space, blocks, Vec::new())?;
        Ok((space, alg, Weight::expr("n")?, Weight::expr("1/n^3")?))
    }
}

fn mean_pow(cells: &[u64], f: fn(u64) -> f64, e: f64) -> f64 {
    cells.iter().map(|&x| abs_pow(f(x), e)).collect::<NeumaierSum>().value() / cells.len() as f64
}

impl AtomFamily for PaperExample {
    fn name(&self) -> String {
        let part = match self.part {
            ExamplePart::Odd => "odd",
            ExamplePart::Even => "even",
            ExamplePart::Merged => "merged",
        };
        format!("paper example ({part} atoms)")
    }

    fn moments(&self, index: usize, exps: &Exponents) -> Result<AtomMoments> {
        let atom = self.atom(index);
        let cells = atom.cells();
        let eu = if exps.p == 1.0 {
            cells.iter().fold(0.0, |m: f64, &x| m.max(u_at(x)))
        } else {
            mean_pow(&cells, u_at, exps.p_conj)
        };
        Ok(AtomMoments {
            mass: atom.mass(),
            eu,
            ew: mean_pow(&cells, w_at, exps.q),
            eu_p: mean_pow(&cells, u_at, exps.p),
            eu_qconj: (exps.q > 1.0).then(|| mean_pow(&cells, u_at, exps.q_conj)),
            min_cell_mass: 1.0,
        })
    }

    fn tail_bound(&self, n: usize, exps: &Exponents) -> Option<Tail> {
        if exps.regime == Regime::Equal {
            return None;
        }
        Some(Tail::SumBound(example_tail_bound(self.part, n, exps)))
    }

    fn compactness_tail(&self, case: CompactnessCase, n: usize, exps: &Exponents) -> Option<Tail> {
        let (odd, even) = self.split_count(n);
        let (odd_exp, even_bound) = example_compact_bounds(case, exps);
        match case {
            CompactnessCase::SeriesSmaller | CompactnessCase::IntoL1 => {
                let odd_tail = odd_power_tail(odd, odd_exp)?;
                let even_tail = even_power_tail(even, even_bound)?;
                Some(Tail::SumBound(match self.part {
                    ExamplePart::Odd => odd_tail,
                    ExamplePart::Even => even_tail,
                    ExamplePart::Merged => odd_tail + even_tail,
                }))
            }
            CompactnessCase::LimitLarger | CompactnessCase::FromL1 => {
                (odd_exp < 0.0 && even_bound.exponent < 0.0).then_some(Tail::Vanishing)
            }
        }
    }
}

/// Power-law majorant `coeff · n^exponent` for the even blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerBound {
    coeff: f64,
    exponent: f64,
}

/// `Σ_{k > K} (2k−1)^e` by the integral test, `e < −1`.
fn odd_power_tail(k: usize, e: f64) -> Option<f64> {
    if e >= -1.0 {
        return None;
    }
    let from_one = 1.0 / (2.0 * (-e - 1.0));
    Some(if k == 0 {
        1.0 + from_one
    } else {
        (2.0 * k as f64 - 1.0).powf(e + 1.0) / (2.0 * (-e - 1.0))
    })
}

/// `Σ_{n > M} coeff · n^exponent` by the integral test, `exponent < −1`.
fn even_power_tail(m: usize, b: PowerBound) -> Option<f64> {
    if b.exponent >= -1.0 {
        return None;
    }
    let g = -b.exponent - 1.0;
    Some(if m == 0 {
        b.coeff * (1.0 + 1.0 / g)
    } else {
        b.coeff * (m as f64).powf(-g) / g
    })
}

/// Turns `C · k_n^e · n^c` with `e < 0` into a power of `n` through
/// `k_n ≥ n²/4`.
fn through_k(coeff: f64, e: f64, c: f64) -> PowerBound {
    debug_assert!(e < 0.0);
    PowerBound {
        coeff: coeff * 4f64.powf(-e),
        exponent: 2.0 * e + c,
    }
}

/// Odd-atom exponent (the quantity equals `(2k−1)^e` exactly on `{2k−1}`)
/// and a majorant on the even blocks, from `2k_n ≤ x < 4k_n` on `A_n`.
fn example_compact_bounds(case: CompactnessCase, exps: &Exponents) -> (f64, PowerBound) {
    let (p, q, pc, qc) = (exps.p, exps.q, exps.p_conj, exps.q_conj);
    // quantity ≤ (4k)^a (2k)^{−b} n^c = 2^{2a−b} k^{a−b} n^c
    let (a, b, c) = match case {
        CompactnessCase::SeriesSmaller => {
            let span = qc - pc;
            (p * qc / span, 3.0 * q * pc * qc / span, 1.0)
        }
        CompactnessCase::LimitLarger => (pc, 3.0 * pc, -(pc - qc) / qc),
        CompactnessCase::IntoL1 => (pc, 3.0 * pc, 1.0),
        // Σ-atoms have unit mass; the A-atom quantity is smaller by 1/n.
        CompactnessCase::FromL1 => (qc, 3.0 * qc, 0.0),
    };
    let e = a - b;
    let even = if e < 0.0 {
        through_k(2f64.powf(2.0 * a - b), e, c)
    } else {
        PowerBound {
            coeff: f64::INFINITY,
            exponent: f64::INFINITY,
        }
    };
    (e, even)
}

/// `Σ_{k > N} (2k−1)^{−2} ≤ 1/(2(2N−1))`.
pub fn odd_tail_bound(n: usize) -> f64 {
    odd_power_tail(n, -2.0).expect("exponent −2 is summable")
}

/// Tail of the even sub-series after `A_1..A_N`.
///
/// Per block `c_n ≤ (4k_n)(2k_n)^{−3} n^{s/r} = n^{s/r} / (2k_n²)` and
/// `k_n ≥ n²/4`, so `c_n ≤ 8 n^{−4 + s/r}`; the integral test sums it.
pub fn even_tail_bound(n: usize, exps: &Exponents) -> f64 {
    let s_over_r = exps.mass_sign() / exps.r;
    even_power_tail(
        n,
        PowerBound {
            coeff: 8.0,
            exponent: -4.0 + s_over_r,
        },
    )
    .expect("1/r < 1 keeps the exponent below −3")
}

/// Upper bound on the nuclearity series beyond the first `n` atoms of `part`.
pub fn example_tail_bound(part: ExamplePart, n: usize, exps: &Exponents) -> f64 {
    let (odd, even) = PaperExample::new(part).split_count(n);
    match part {
        ExamplePart::Odd => odd_tail_bound(odd),
        ExamplePart::Even => even_tail_bound(even, exps),
        ExamplePart::Merged => odd_tail_bound(odd) + even_tail_bound(even, exps),
    }
}

/// The explicit per-block bound `n^{s/r} / (2k_n²)` on the even terms.
pub fn even_term_bound(n: u64, exps: &Exponents) -> f64 {
    let k = k_n(n) as f64;
    (n as f64).powf(exps.mass_sign() / exps.r) / (2.0 * k * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wce::atom_stats;

    struct Silent;
    impl AtomFamily for Silent {
        fn name(&self) -> String {
            "zero".into()
        }
        fn moments(&self, index: usize, _: &Exponents) -> Result<AtomMoments> {
            Ok(AtomMoments {
                mass: 1.0 + index as f64,
                eu: 0.0,
                ew: 1.0,
                eu_p: 0.0,
                eu_qconj: Some(0.0),
                min_cell_mass: 1.0,
            })
        }
    }

    struct Broken;
    impl AtomFamily for Broken {
        fn name(&self) -> String {
            "broken".into()
        }
        fn moments(&self, _: usize, _: &Exponents) -> Result<AtomMoments> {
            Ok(AtomMoments {
                mass: -1.0,
                eu: 0.0,
                ew: 0.0,
                eu_p: 0.0,
                eu_qconj: None,
                min_cell_mass: 1.0,
            })
        }
    }

    #[test]
    fn zero_family_sums_to_zero() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let rows = partial_sums(&Silent, &exps, 50).unwrap();
        assert!(rows.iter().all(|r| r.term == 0.0 && r.partial == 0.0));
    }

    #[test]
    fn partial_sums_errors() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        assert!(matches!(partial_sums(&Broken, &exps, 3), Err(Error::Generator { index: 0, .. })));
        let eq = Exponents::new(2.0, 2.0).unwrap();
        assert!(matches!(partial_sums(&Silent, &eq, 3), Err(Error::RegimeUnsupported(_))));
    }

    #[test]
    fn example_block_layout() {
        assert_eq!(ExampleAtom::Even(1).cells(), vec![2]);
        assert_eq!(ExampleAtom::Even(2).cells(), vec![4, 6]);
        assert_eq!(ExampleAtom::Even(3).cells(), vec![8, 10, 12]);
        assert_eq!(ExampleAtom::Even(4).cells(), vec![14, 16, 18, 20]);
        for n in 1..=10_000u64 {
            assert!(k_n(n) >= n);
            let cells = ExampleAtom::Even(n).cells();
            assert_eq!(cells.len() as u64, n);
            assert_eq!(cells[0], 2 * k_n(n));
            // consecutive blocks tile the even numbers
            assert_eq!(2 * k_n(n + 1), cells[cells.len() - 1] + 2);
        }
    }

    #[test]
    fn merged_order_follows_least_element() {
        let ex = PaperExample::new(ExamplePart::Merged);
        let mut prev = 0;
        let mut seen = Vec::new();
        for i in 0..5_000 {
            let first = ex.atom(i).cells()[0];
            assert!(first > prev, "atom {i} out of order");
            prev = first;
            seen.extend(ex.atom(i).cells());
        }
        seen.sort_unstable();
        // a prefix of the merged order covers an initial segment of ℕ up to
        // the gaps left by the last partial block
        assert_eq!(&seen[..100], &(1..=100).collect::<Vec<u64>>()[..]);
        for n in [1, 2, 3, 10, 200, 4471] {
            let (odd, even) = ex.split_count(n);
            let counted = (0..n).filter(|&i| matches!(ex.atom(i), ExampleAtom::Even(_))).count();
            assert_eq!(even, counted);
            assert_eq!(odd + even, n);
        }
    }

    #[test]
    fn even_block_a2_for_p2_q3() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let ex = PaperExample::new(ExamplePart::Even);
        let m = ex.moments(1, &exps).unwrap();
        assert_eq!(m.mass, 2.0);
        assert_eq!(m.eu, 26.0);
        let ew = (4f64.powi(-9) + 6f64.powi(-9)) / 2.0;
        assert!((m.ew - ew).abs() <= 1e-15 * ew);
        let st = AtomStats::from_moments(1, &m, &exps);
        let expected = 26f64.sqrt() * ew.powf(1.0 / 3.0) * 2f64.powf(-1.0 / 6.0);
        assert!((st.term - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn generator_matches_materialized_space() {
        for (p, q) in [(2.0, 3.0), (3.0, 2.0), (1.0, 2.5), (4.0, 1.0)] {
            let exps = Exponents::new(p, q).unwrap();
            for part in [ExamplePart::Odd, ExamplePart::Even, ExamplePart::Merged] {
                let ex = PaperExample::new(part);
                let (space, alg, u, w) = ex.materialize(50).unwrap();
                let explicit = atom_stats(&u, &w, &alg, &exps, &space).unwrap();
                let generated = family_stats(&ex, &exps, 50).unwrap();
                for (a, b) in explicit.iter().zip(&generated) {
                    for (x, y) in [(a.eu, b.eu), (a.ew, b.ew), (a.term, b.term), (a.mass, b.mass)] {
                        assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), "{part:?} ({p},{q})");
                    }
                }
            }
        }
    }

    #[test]
    fn decay_fit_on_exact_power_laws() {
        let pts: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, (i as f64).powi(-3))).collect();
        assert!((decay_fit(&pts, 1.0..=100.0).unwrap() + 3.0).abs() < 1e-9);
        for c in [1e-6, 1.0, 42.0] {
            let pts: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, c * (i as f64).powi(-4))).collect();
            assert!((decay_fit(&pts, 10.0..=90.0).unwrap() + 4.0).abs() < 1e-9);
        }
        assert!(matches!(decay_fit(&pts, 1.0..=7.0), Err(Error::InsufficientData(_))));
        let zeros: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64, 0.0)).collect();
        assert!(decay_fit(&zeros, 1.0..=100.0).is_err());
    }

    #[test]
    fn odd_tail_matches_closed_form_at_one() {
        let true_tail = std::f64::consts::PI.powi(2) / 8.0 - 1.0;
        assert_eq!(odd_tail_bound(1), 0.5);
        assert!(odd_tail_bound(1) >= true_tail);
    }

    #[test]
    fn tail_bounds_vanish() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1, 10, 100, 1_000, 100_000, 10_000_000] {
            let b = example_tail_bound(ExamplePart::Merged, n, &exps);
            assert!(b < prev && b > 0.0);
            prev = b;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn example_compactness_is_certified() {
        for (p, q) in [(2.0, 3.0), (3.0, 2.0), (2.0, 1.0), (1.0, 2.0)] {
            let exps = Exponents::new(p, q).unwrap();
            let case = CompactnessCase::for_exponents(&exps).unwrap();
            let ex = PaperExample::new(ExamplePart::Merged);
            assert!(ex.compactness_tail(case, 100, &exps).is_some(), "({p},{q})");
        }
    }

    #[test]
    fn compactness_series_tail_dominates_terms() {
        let exps = Exponents::new(3.0, 2.0).unwrap();
        let case = CompactnessCase::SeriesSmaller;
        for part in [ExamplePart::Odd, ExamplePart::Even] {
            let ex = PaperExample::new(part);
            let stats = family_stats(&ex, &exps, 60).unwrap();
            let q: Vec<f64> = stats.iter().map(|s| case.quantity(s, &exps)).collect();
            for n in [1, 5, 20] {
                let Some(Tail::SumBound(b)) = ex.compactness_tail(case, n, &exps) else {
                    panic!("expected a sum bound")
                };
                let rest: f64 = q[n..].iter().sum();
                assert!(b >= rest, "{part:?} n = {n}: {b} < {rest}");
            }
        }
    }
}
