//! The weighted conditional expectation operator `T f = w · E(u f)` and its
//! decomposition into rank-one pieces, one per A-atom.
//!
//! On a purely atomic sub-σ-algebra
//!
//! ```text
//! T = Σ_i φ_i ⊗ g_i,   φ_i(f) = ∫ u χ_{A_i} f dμ,   g_i = w χ_{A_i} / μ(A_i)
//! ```
//!
//! and the nuclearity series has terms
//! `c_i = E(|u|^{p'})(A_i)^{1/p'} · E(|w|^q)(A_i)^{1/q} · μ(A_i)^{±1/r}`,
//! which coincide with `‖φ_i‖ ‖g_i‖`, i.e. the norm of the restriction of `T`
//! to `A_i`.
//!
//! The often quoted closed form `‖φ_i‖ = E(|u|^{p'})(A_i)^{1/p'}` omits the
//! factor `μ(A_i)^{1/p'}`; [`RankOneFactor::phi_norm`] includes it.

use serde::Serialize;

use crate::condexp::cond_exp;
use crate::measure::{abs_pow, AtomicSpace, SubAlgebra, Weight};
use crate::sum::{compensated_sum, NeumaierSum};
use crate::{Error, Result};

/// Relative position of the source and target exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `q < p`: mass factor `μ^{+1/r}`.
    Smaller,
    /// `p < q`: mass factor `μ^{-1/r}`.
    Larger,
    Equal,
}

/// Source exponent `p`, target exponent `q`, their conjugates and the
/// bridging exponent `r` with `1/r = |1/p − 1/q|` (always positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    #[serde(serialize_with = "ser_extended")]
    pub p_conj: f64,
    #[serde(serialize_with = "ser_extended")]
    pub q_conj: f64,
    #[serde(serialize_with = "ser_extended")]
    pub r: f64,
    pub regime: Regime,
}

/// JSON has no infinity; write it as the string `"inf"`.
pub(crate) fn ser_extended<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

/// `x'` with `1/x + 1/x' = 1`, `1' = ∞`.
pub fn conjugate(x: f64) -> f64 {
    if x == 1.0 {
        f64::INFINITY
    } else {
        x / (x - 1.0)
    }
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !v.is_finite() || v < 1.0 {
                return Err(Error::InvalidExponent(format!(
                    "{name} = {v}; need a finite value >= 1"
                )));
            }
        }
        let regime = if q < p {
            Regime::Smaller
        } else if p < q {
            Regime::Larger
        } else {
            Regime::Equal
        };
        let r = if regime == Regime::Equal {
            f64::INFINITY
        } else {
            p * q / (p - q).abs()
        };
        Ok(Self {
            p,
            q,
            p_conj: conjugate(p),
            q_conj: conjugate(q),
            r,
            regime,
        })
    }

    /// Sign `s` of the mass exponent `s/r`.
    pub fn mass_sign(&self) -> f64 {
        match self.regime {
            Regime::Smaller => 1.0,
            Regime::Larger => -1.0,
            Regime::Equal => 0.0,
        }
    }

    /// `μ^{s/r}`; `1` in the equal regime.
    pub fn mass_factor(&self, mass: f64) -> f64 {
        match self.regime {
            Regime::Equal => 1.0,
            _ => mass.powf(self.mass_sign() / self.r),
        }
    }

    /// `x^{1/p'}` with the `p = 1` convention that the argument already is the
    /// essential supremum of `|u|`.
    pub(crate) fn u_root(&self, eu: f64) -> f64 {
        if self.p == 1.0 {
            eu
        } else {
            eu.powf(1.0 / self.p_conj)
        }
    }

    pub(crate) fn w_root(&self, ew: f64) -> f64 {
        ew.powf(1.0 / self.q)
    }
}

/// Raw per-atom averages from which every series in the crate is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomMoments {
    pub mass: f64,
    /// `E(|u|^{p'})(A_i)`, or `max_{A_i} |u|` when `p = 1`.
    pub eu: f64,
    /// `E(|w|^q)(A_i)`.
    pub ew: f64,
    /// `E(|u|^p)(A_i)`.
    pub eu_p: f64,
    /// `E(|u|^{q'})(A_i)`; absent when `q = 1`.
    pub eu_qconj: Option<f64>,
    /// Smallest Σ-atom mass inside the block.
    pub min_cell_mass: f64,
}

impl AtomMoments {
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::Generator {
            index,
            reason: reason.to_string(),
        };
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(bad("mass must be positive and finite"));
        }
        if !(self.min_cell_mass > 0.0 && self.min_cell_mass <= self.mass) {
            return Err(bad("minimum cell mass must lie in (0, mass]"));
        }
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.eu) || !nonneg(self.ew) || !nonneg(self.eu_p) || !self.eu_qconj.is_none_or(nonneg) {
            return Err(bad("moments must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Per-atom statistics of the nuclearity series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomStats {
    pub block_index: usize,
    pub mass: f64,
    pub eu: f64,
    pub ew: f64,
    /// `eu^{1/p'} · ew^{1/q}`.
    pub d: f64,
    /// `d · μ^{s/r}`.
    pub term: f64,
    pub eu_p: f64,
    pub eu_qconj: Option<f64>,
    pub min_cell_mass: f64,
}

impl AtomStats {
    pub fn from_moments(block_index: usize, m: &AtomMoments, exps: &Exponents) -> Self {
        let d = exps.u_root(m.eu) * exps.w_root(m.ew);
        Self {
            block_index,
            mass: m.mass,
            eu: m.eu,
            ew: m.ew,
            d,
            term: d * exps.mass_factor(m.mass),
            eu_p: m.eu_p,
            eu_qconj: m.eu_qconj,
            min_cell_mass: m.min_cell_mass,
        }
    }

    pub fn moments(&self) -> AtomMoments {
        AtomMoments {
            mass: self.mass,
            eu: self.eu,
            ew: self.ew,
            eu_p: self.eu_p,
            eu_qconj: self.eu_qconj,
            min_cell_mass: self.min_cell_mass,
        }
    }
}

/// Norms of the two factors of the rank-one piece `φ_i ⊗ g_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankOneFactor {
    pub block_index: usize,
    /// `‖u χ_{A_i}‖_{p'} = E(|u|^{p'})(A_i)^{1/p'} μ(A_i)^{1/p'}`.
    pub phi_norm: f64,
    /// `‖w χ_{A_i} / μ(A_i)‖_q = E(|w|^q)(A_i)^{1/q} μ(A_i)^{1/q − 1}`.
    pub g_norm: f64,
    pub product: f64,
}

impl RankOneFactor {
    pub fn from_moments(block_index: usize, m: &AtomMoments, exps: &Exponents) -> Self {
        let phi_norm = exps.u_root(m.eu) * m.mass.powf(1.0 / exps.p_conj);
        let g_norm = exps.w_root(m.ew) * m.mass.powf(1.0 / exps.q - 1.0);
        Self {
            block_index,
            phi_norm,
            g_norm,
            product: phi_norm * g_norm,
        }
    }
}

fn block_mean_pow(values: &[f64], positions: &[usize], masses: &[f64], e: f64, mass: f64) -> f64 {
    positions
        .iter()
        .map(|&p| abs_pow(values[p], e) * masses[p])
        .collect::<NeumaierSum>()
        .value()
        / mass
}

/// Per-block moments of `u` and `w` for the given exponents.
pub fn atom_moments(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
) -> Result<Vec<AtomMoments>> {
    let uv = u.values(space)?;
    let wv = w.values(space)?;
    let masses = space.masses();
    Ok(alg
        .blocks()
        .iter()
        .map(|b| {
            let pos = b.positions();
            let eu = if exps.p == 1.0 {
                pos.iter().fold(0.0, |m: f64, &p| m.max(uv[p].abs()))
            } else {
                block_mean_pow(&uv, pos, &masses, exps.p_conj, b.mass())
            };
            AtomMoments {
                mass: b.mass(),
                eu,
                ew: block_mean_pow(&wv, pos, &masses, exps.q, b.mass()),
                eu_p: block_mean_pow(&uv, pos, &masses, exps.p, b.mass()),
                eu_qconj: (exps.q > 1.0)
                    .then(|| block_mean_pow(&uv, pos, &masses, exps.q_conj, b.mass())),
                min_cell_mass: pos.iter().fold(f64::INFINITY, |m, &p| m.min(masses[p])),
            }
        })
        .collect())
}

/// `T f = w · E(u f)`.
pub fn apply(u: &Weight, w: &Weight, alg: &SubAlgebra, f: &Weight, space: &AtomicSpace) -> Result<Weight> {
    let uf = u.product(f, space)?;
    cond_exp(&uf, alg, space)?.product(w, space)
}

pub fn atom_stats(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
) -> Result<Vec<AtomStats>> {
    Ok(atom_moments(u, w, alg, exps, space)?
        .iter()
        .enumerate()
        .map(|(i, m)| AtomStats::from_moments(i, m, exps))
        .collect())
}

pub fn factor_norms(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
) -> Result<Vec<RankOneFactor>> {
    Ok(atom_moments(u, w, alg, exps, space)?
        .iter()
        .enumerate()
        .map(|(i, m)| RankOneFactor::from_moments(i, m, exps))
        .collect())
}

/// `Σ_i ‖φ_i‖ ‖g_i‖`, an upper bound for the nuclear norm of `T`.
pub fn nuclear_bound(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
) -> Result<f64> {
    Ok(compensated_sum(
        factor_norms(u, w, alg, exps, space)?.iter().map(|f| f.product),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{lp_norm, Cell, CellId};

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    #[test]
    fn exponents_conjugates_and_bridge() {
        let e = Exponents::new(2.0, 3.0).unwrap();
        assert_eq!(e.regime, Regime::Larger);
        assert_eq!(e.p_conj, 2.0);
        assert!((e.q_conj - 1.5).abs() < 1e-15);
        assert!((e.r - 6.0).abs() < 1e-12);

        let e = Exponents::new(3.0, 2.0).unwrap();
        assert_eq!(e.regime, Regime::Smaller);
        assert!((e.r - 6.0).abs() < 1e-12);
        assert!((1.0 / e.p + 1.0 / e.p_conj - 1.0).abs() < 1e-12);

        let e = Exponents::new(1.0, 2.0).unwrap();
        assert!(e.p_conj.is_infinite());
        assert!((1.0 / e.p + 1.0 / e.p_conj - 1.0).abs() < 1e-12);
        assert!((e.r - 2.0).abs() < 1e-12);

        let e = Exponents::new(2.0, 2.0).unwrap();
        assert_eq!(e.regime, Regime::Equal);
        assert!(e.r.is_infinite());

        assert!(Exponents::new(0.5, 2.0).is_err());
        assert!(Exponents::new(2.0, 0.99).is_err());
        assert!(Exponents::new(f64::INFINITY, 2.0).is_err());
        assert!(Exponents::new(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let s = AtomicSpace::counting(2).unwrap();
        let alg = SubAlgebra::single_block(&s);
        let f = Weight::from_pairs([(1, 1.0), (2, 3.0)]);
        let one = Weight::constant(&s, 1.0);
        let zero = Weight::zero(&s);
        assert_eq!(apply(&zero, &one, &alg, &f, &s).unwrap(), zero);
        assert_eq!(apply(&one, &zero, &alg, &f, &s).unwrap(), zero);

        let triv = SubAlgebra::trivial(&s);
        assert_eq!(apply(&one, &one, &triv, &f, &s).unwrap(), f);

        let w = Weight::constant(&s, 2.0);
        let tf = apply(&one, &w, &alg, &f, &s).unwrap();
        assert_eq!(tf.values(&s).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn factor_norm_examples() {
        let s = AtomicSpace::counting(2).unwrap();
        let alg = SubAlgebra::single_block(&s);
        let exps = Exponents::new(3.0, 2.0).unwrap();
        let zero = Weight::zero(&s);
        let one = Weight::constant(&s, 1.0);
        let f = factor_norms(&zero, &one, &alg, &exps, &s).unwrap();
        assert_eq!(f[0].phi_norm, 0.0);
        assert_eq!(f[0].product, 0.0);

        // ‖(1/2)χ‖_2 on two unit cells is √2/2.
        assert!((f[0].g_norm - 0.5f64.sqrt()).abs() < 1e-15);

        // Block {4, 6} with u(n) = n and p = 2: ‖u χ‖_2 = √52.
        let cells = AtomicSpace::new(vec![Cell::new(4, 1.0), Cell::new(6, 1.0)]).unwrap();
        let block = SubAlgebra::single_block(&cells);
        let u = Weight::expr("n").unwrap();
        let w = Weight::expr("1/n^3").unwrap();
        let e = Exponents::new(2.0, 3.0).unwrap();
        let m = atom_moments(&u, &w, &block, &e, &cells).unwrap();
        assert_eq!(m[0].eu, 26.0);
        let fac = factor_norms(&u, &w, &block, &e, &cells).unwrap();
        assert!(rel(fac[0].phi_norm, 52f64.sqrt()) < 1e-15);
    }

    #[test]
    fn nuclear_bound_single_block_is_one_product() {
        let s = AtomicSpace::new(vec![Cell::new(1, 0.5), Cell::new(2, 1.5)]).unwrap();
        let alg = SubAlgebra::single_block(&s);
        let u = Weight::from_pairs([(1, 2.0), (2, -1.0)]);
        let w = Weight::from_pairs([(1, 0.25), (2, 3.0)]);
        let exps = Exponents::new(2.5, 1.5).unwrap();
        let fac = factor_norms(&u, &w, &alg, &exps, &s).unwrap();
        assert_eq!(nuclear_bound(&u, &w, &alg, &exps, &s).unwrap(), fac[0].product);
        assert_eq!(nuclear_bound(&Weight::zero(&s), &w, &alg, &exps, &s).unwrap(), 0.0);
    }

    #[test]
    fn atom_stats_examples() {
        let s = AtomicSpace::counting(3).unwrap();
        let alg = SubAlgebra::trivial(&s);
        let one = Weight::constant(&s, 1.0);
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let st = atom_stats(&one, &Weight::zero(&s), &alg, &exps, &s).unwrap();
        assert!(st.iter().all(|a| a.term == 0.0));

        // Odd singleton {2k−1} of the worked example: term (2k−1)^{−2}.
        for k in [1u64, 2, 5, 40] {
            let n = 2 * k - 1;
            let cell = AtomicSpace::new(vec![Cell::new(n, 1.0)]).unwrap();
            let a = SubAlgebra::trivial(&cell);
            let st = atom_stats(
                &Weight::expr("n").unwrap(),
                &Weight::expr("1/n^3").unwrap(),
                &a,
                &exps,
                &cell,
            )
            .unwrap();
            assert!(rel(st[0].term, (n as f64).powi(-2)) < 1e-14);
        }

        // Unit-mass singleton: |a|·|b| in every regime.
        let cell = AtomicSpace::new(vec![Cell::new(7, 1.0)]).unwrap();
        let a = SubAlgebra::trivial(&cell);
        let u = Weight::from_pairs([(7, -1.5)]);
        let w = Weight::from_pairs([(7, 4.0)]);
        for (p, q) in [(2.0, 3.0), (3.0, 2.0), (1.0, 4.0), (2.0, 1.0), (2.0, 2.0)] {
            let e = Exponents::new(p, q).unwrap();
            let st = atom_stats(&u, &w, &a, &e, &cell).unwrap();
            assert!(rel(st[0].term, 6.0) < 1e-14, "({p},{q}) -> {}", st[0].term);
        }
    }

    #[test]
    fn p_one_uses_sup_of_u() {
        let s = AtomicSpace::new(vec![Cell::new(1, 1.0), Cell::new(2, 3.0)]).unwrap();
        let alg = SubAlgebra::single_block(&s);
        let u = Weight::from_pairs([(1, -5.0), (2, 2.0)]);
        let w = Weight::from_pairs([(1, 1.0), (2, 1.0)]);
        let exps = Exponents::new(1.0, 2.0).unwrap();
        let st = atom_stats(&u, &w, &alg, &exps, &s).unwrap();
        assert_eq!(st[0].eu, 5.0);
        let fac = factor_norms(&u, &w, &alg, &exps, &s).unwrap();
        assert_eq!(fac[0].phi_norm, lp_norm(&u, f64::INFINITY, &s).unwrap());
        assert!(rel(fac[0].product, st[0].term) < 1e-14);
    }

    #[test]
    fn apply_is_local_to_blocks() {
        let s = AtomicSpace::counting(4).unwrap();
        let alg = SubAlgebra::new(
            &s,
            vec![vec![CellId(1), CellId(2)], vec![CellId(3), CellId(4)]],
            vec![],
        )
        .unwrap();
        let u = Weight::from_values(&s, vec![1.0, 2.0, 3.0, 4.0]);
        let w = Weight::from_values(&s, vec![0.5, -1.0, 2.0, 1.0]);
        let f = Weight::from_values(&s, vec![0.0, 0.0, 1.0, -0.5]);
        let tf = apply(&u, &w, &alg, &f, &s).unwrap().values(&s).unwrap();
        assert_eq!(&tf[..2], &[0.0, 0.0]);
        assert!(tf[2] != 0.0 && tf[3] != 0.0);
    }
}
