//! Independent checks of the closed forms in [`crate::wce`].
//!
//! Nothing here reads [`AtomStats`](crate::wce::AtomStats): block norms are
//! computed from `lp_norm` of restricted weights, operator norms are bracketed
//! by a numerical ascent, and the Hilbert-space trace norm comes from a
//! singular value decomposition of the materialized matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::measure::{abs_pow, lp_norm, AtomicSpace, Block, SubAlgebra, Weight};
use crate::sum::{compensated_sum, NeumaierSum};
use crate::wce::{apply, atom_stats, Exponents, Regime};
use crate::{Error, Result};

/// Random restarts used by the norm ascent, on top of one start per block.
pub const ASCENT_RESTARTS: usize = 6;
const ASCENT_SEED: u64 = 0x005e_ed0f_a5ce;
const MAX_SWEEPS: usize = 400;

/// Norm of the rank-one restriction `T_A : L^p(A) → L^q(A)`,
/// `‖u χ_A‖_{p'} ‖w χ_A‖_q / μ(A)` (Hölder is sharp for rank one).
pub fn block_norm(u: &Weight, w: &Weight, block: &Block, exps: &Exponents, space: &AtomicSpace) -> Result<f64> {
    let ids = block.cell_ids();
    let un = lp_norm(&u.restrict(ids, space)?, exps.p_conj, space)?;
    let wn = lp_norm(&w.restrict(ids, space)?, exps.q, space)?;
    Ok(un * wn / block.mass())
}

pub fn block_norms(u: &Weight, w: &Weight, alg: &SubAlgebra, exps: &Exponents, space: &AtomicSpace) -> Result<Vec<f64>> {
    alg.blocks()
        .iter()
        .map(|b| block_norm(u, w, b, exps, space))
        .collect()
}

/// Upper bound from the direct-sum formula and lower bound from ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBracket {
    pub formula_value: f64,
    pub ascent_value: f64,
}

impl NormBracket {
    /// `(formula − ascent) / formula`, zero for the zero operator.
    pub fn relative_gap(&self) -> f64 {
        if self.formula_value == 0.0 {
            0.0
        } else {
            (self.formula_value - self.ascent_value) / self.formula_value
        }
    }
}

/// Norm of a direct sum of blocks: `sup_i ‖T_i‖` when `p ≤ q`,
/// `(Σ_i ‖T_i‖^r)^{1/r}` when `q < p`.
pub fn aggregate_norm(block_norms: &[f64], exps: &Exponents) -> f64 {
    match exps.regime {
        Regime::Smaller => {
            let top = block_norms.iter().fold(0.0, |m: f64, &b| m.max(b));
            if top == 0.0 || !top.is_finite() {
                return top;
            }
            let s = compensated_sum(block_norms.iter().map(|b| (b / top).powf(exps.r)));
            top * s.powf(1.0 / exps.r)
        }
        Regime::Larger | Regime::Equal => block_norms.iter().fold(0.0, |m, &b| m.max(b)),
    }
}

/// Brackets `‖T‖_{p→q}` on the atomic part of the space; panels are ignored.
pub fn operator_norm(u: &Weight, w: &Weight, alg: &SubAlgebra, exps: &Exponents, space: &AtomicSpace) -> Result<NormBracket> {
    let uv = u.values(space)?;
    let wv = w.values(space)?;
    if uv.iter().chain(&wv).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteData("weights must be finite".into()));
    }
    let formula_value = aggregate_norm(&block_norms(u, w, alg, exps, space)?, exps);
    let problem = AscentProblem::new(&uv, &wv, alg, space, exps);
    let best = problem.maximize();
    let ascent_value = match best {
        Some(f) => {
            let f = Weight::from_values(space, problem.scatter(&f, space.len()));
            let fnorm = lp_norm(&f, exps.p, space)?;
            if fnorm == 0.0 {
                0.0
            } else {
                lp_norm(&apply(u, w, alg, &f, space)?, exps.q, space)? / fnorm
            }
        }
        None => 0.0,
    };
    Ok(NormBracket {
        formula_value,
        ascent_value,
    })
}

struct AscentBlock {
    positions: Vec<usize>,
    u: Vec<f64>,
    masses: Vec<f64>,
    block_mass: f64,
    /// `∫_A |w|^q dμ`: `‖T f‖_q^q = Σ_i |a_i|^q W_i` with `a_i` the block
    /// average of `u f`.
    w_weight: f64,
}

struct AscentProblem {
    blocks: Vec<AscentBlock>,
    p: f64,
    q: f64,
}

struct AscentState {
    f: Vec<Vec<f64>>,
    avg: Vec<f64>,
    numer: f64,
    denom: f64,
}

impl AscentProblem {
    fn new(uv: &[f64], wv: &[f64], alg: &SubAlgebra, space: &AtomicSpace, exps: &Exponents) -> Self {
        let cells = space.cells();
        let blocks = alg
            .blocks()
            .iter()
            .map(|b| {
                let pos = b.positions().to_vec();
                AscentBlock {
                    u: pos.iter().map(|&p| uv[p]).collect(),
                    masses: pos.iter().map(|&p| cells[p].mass).collect(),
                    block_mass: b.mass(),
                    w_weight: compensated_sum(pos.iter().map(|&p| abs_pow(wv[p], exps.q) * cells[p].mass)),
                    positions: pos,
                }
            })
            .collect();
        Self {
            blocks,
            p: exps.p,
            q: exps.q,
        }
    }

    fn scatter(&self, f: &[Vec<f64>], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (b, fb) in self.blocks.iter().zip(f) {
            for (&p, &v) in b.positions.iter().zip(fb) {
                out[p] = v;
            }
        }
        out
    }

    fn state(&self, f: Vec<Vec<f64>>) -> AscentState {
        let avg: Vec<f64> = self
            .blocks
            .iter()
            .zip(&f)
            .map(|(b, fb)| {
                compensated_sum(b.u.iter().zip(&b.masses).zip(fb).map(|((u, m), x)| u * m * x)) / b.block_mass
            })
            .collect();
        let numer = compensated_sum(self.blocks.iter().zip(&avg).map(|(b, a)| abs_pow(*a, self.q) * b.w_weight));
        let denom = f
            .iter()
            .zip(&self.blocks)
            .flat_map(|(fb, b)| fb.iter().zip(&b.masses).map(|(x, m)| abs_pow(*x, self.p) * m))
            .collect::<NeumaierSum>()
            .value();
        AscentState { f, avg, numer, denom }
    }

    fn log_objective(&self, numer: f64, denom: f64) -> f64 {
        let v = numer.ln() / self.q - denom.ln() / self.p;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// One pass of coordinate updates, over block `only` or over all blocks;
    /// returns the new log objective.
    fn sweep(&self, st: &mut AscentState, only: Option<usize>) -> f64 {
        for (bi, b) in self.blocks.iter().enumerate() {
            if only.is_some_and(|o| o != bi) {
                continue;
            }
            for j in 0..b.u.len() {
                let fj = st.f[bi][j];
                let beta = b.u[j] * b.masses[j] / b.block_mass;
                let own_num = abs_pow(st.avg[bi], self.q) * b.w_weight;
                let rest_num = residue(st.numer, own_num);
                let rest_den = residue(st.denom, abs_pow(fj, self.p) * b.masses[j]);
                let c = st.avg[bi] - beta * fj;
                let h = |t: f64| {
                    self.log_objective(
                        rest_num + b.w_weight * abs_pow(c + beta * t, self.q),
                        rest_den + b.masses[j] * abs_pow(t, self.p),
                    )
                };
                let current = h(fj);
                let t = if beta == 0.0 || b.w_weight == 0.0 {
                    if rest_den > 0.0 {
                        0.0
                    } else {
                        fj
                    }
                } else {
                    let scale = (st.denom.max(f64::MIN_POSITIVE)).powf(1.0 / self.p) / b.masses[j].powf(1.0 / self.p);
                    line_search(&h, fj, current, 2.0 * scale.max(fj.abs()))
                };
                if t != fj && h(t) > current {
                    st.f[bi][j] = t;
                    st.avg[bi] = c + beta * t;
                    st.numer = rest_num + b.w_weight * abs_pow(st.avg[bi], self.q);
                    st.denom = rest_den + b.masses[j] * abs_pow(t, self.p);
                }
            }
        }
        // rescale to the unit sphere and refresh the running sums
        let dn = st.denom.powf(1.0 / self.p);
        if dn > 0.0 && dn.is_finite() {
            for fb in &mut st.f {
                for x in fb.iter_mut() {
                    *x /= dn;
                }
            }
        }
        let f = std::mem::take(&mut st.f);
        *st = self.state(f);
        self.log_objective(st.numer, st.denom)
    }

    /// Best point visited. A start localized on one block is first optimized
    /// on that block alone.
    fn run(&self, f0: Vec<Vec<f64>>, localized: Option<usize>) -> (f64, Vec<Vec<f64>>) {
        let mut st = self.state(f0);
        let mut best = (self.log_objective(st.numer, st.denom), st.f.clone());
        let phases = localized.map(Some).into_iter().chain([None]);
        for only in phases {
            let mut value = self.log_objective(st.numer, st.denom);
            for _ in 0..MAX_SWEEPS {
                let next = self.sweep(&mut st, only);
                if next > best.0 {
                    best = (next, st.f.clone());
                }
                let done = next - value <= 1e-10;
                value = value.max(next);
                if done {
                    break;
                }
            }
        }
        best
    }

    fn start(&self, restart: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(ASCENT_SEED ^ (restart as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let localized = restart.checked_sub(ASCENT_RESTARTS);
        self.blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                b.u.iter()
                    .map(|_| match localized {
                        Some(target) if target != bi => 0.0,
                        _ => rng.random_range(-1.0..1.0),
                    })
                    .collect()
            })
            .collect()
    }

    /// Best unit-ball point over all restarts, `None` when `T f = 0` throughout.
    fn maximize(&self) -> Option<Vec<Vec<f64>>> {
        let restarts = ASCENT_RESTARTS + self.blocks.len();
        let results: Vec<(f64, Vec<Vec<f64>>)> = (0..restarts)
            .into_par_iter()
            .map(|k| self.run(self.start(k), k.checked_sub(ASCENT_RESTARTS)))
            .collect();

        results
            .into_iter()
            .filter(|(v, _)| v.is_finite())
            .fold(None, |best: Option<(f64, Vec<Vec<f64>>)>, cand| match best {
                Some(b) if b.0 >= cand.0 => Some(b),
                _ => Some(cand),
            })
            .map(|(_, f)| f)
    }
}

/// `total − part`, with cancellation noise below `1e-12 · total` flushed to zero.
fn residue(total: f64, part: f64) -> f64 {
    let rest = total - part;
    if rest <= 1e-12 * total {
        0.0
    } else {
        rest
    }
}

/// Maximizes a one-dimensional function: coarse grid on `[x0 − span, x0 + span]`
/// then golden-section refinement around the best grid point.
fn line_search(h: &impl Fn(f64) -> f64, x0: f64, h0: f64, span: f64) -> f64 {
    const GRID: usize = 24;
    let mut span = span.max(f64::MIN_POSITIVE);
    let (mut best_x, mut best_h) = (x0, h0);
    for _ in 0..4 {
        let step = 2.0 * span / GRID as f64;
        let mut edge = false;
        for k in 0..=GRID {
            let x = x0 - span + step * k as f64;
            let v = h(x);
            if v > best_h {
                best_h = v;
                best_x = x;
                edge = k == 0 || k == GRID;
            }
        }
        let (mut lo, mut hi) = (best_x - step, best_x + step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let (mut ha, mut hb) = (h(a), h(b));
        for _ in 0..60 {
            if ha > hb {
                hi = b;
                b = a;
                hb = ha;
                a = hi - phi * (hi - lo);
                ha = h(a);
            } else {
                lo = a;
                a = b;
                ha = hb;
                b = lo + phi * (hi - lo);
                hb = h(b);
            }
            if hi - lo <= 1e-10 * (best_x.abs() + 1e-300) {
                break;
            }
        }
        for (x, v) in [(a, ha), (b, hb)] {
            if v > best_h {
                best_h = v;
                best_x = x;
            }
        }
        if !edge {
            break;
        }
        span *= 4.0;
    }
    best_x
}

/// Sum of singular values of `T` on `L²(μ)` (`p = q = 2`).
///
/// In the orthonormal basis `χ_x / √μ(x)` the kernel of `T` becomes
/// `√μ(x) w(x) u(y) √μ(y) / μ(A)` for `x, y` in the same block `A`.
pub fn trace_norm_hilbert(u: &Weight, w: &Weight, alg: &SubAlgebra, space: &AtomicSpace) -> Result<f64> {
    let uv = u.values(space)?;
    let wv = w.values(space)?;
    let n = space.len();
    let cells = space.cells();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for block in alg.blocks() {
        for &x in block.positions() {
            for &y in block.positions() {
                m[(x, y)] = cells[x].mass.sqrt() * wv[x] * uv[y] * cells[y].mass.sqrt() / block.mass();
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteData("matrix of T has non-finite entries".into()));
    }
    let sv = m.singular_values();
    Ok(compensated_sum(sv.iter().copied()))
}

/// A test function concentrated on one A-atom, normalized so that `‖f_i‖_p ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PietschTestFunction {
    pub block_index: usize,
    pub values: Weight,
}

/// Builds `f_i = ū|u|^{p'−2} (E|w|^q)^{(p'−1)/q} / (‖T‖^{p'/p} μ(A_i)^e) χ_{A_i}`,
/// `e = (r − p')/(pr)` for `q < p` and `e = (p' + r)/(pr)` for `p < q`.
pub fn pietsch_test_functions(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
    operator_norm: f64,
) -> Result<Vec<PietschTestFunction>> {
    let (p, q, pc, r) = (exps.p, exps.q, exps.p_conj, exps.r);
    let e = match exps.regime {
        Regime::Smaller => (r - pc) / (p * r),
        Regime::Larger => (pc + r) / (p * r),
        Regime::Equal => return Err(Error::RegimeUnsupported("test functions need p != q".into())),
    };
    if p == 1.0 {
        return Err(Error::RegimeUnsupported("test functions need p > 1".into()));
    }
    let uv = u.values(space)?;
    let wv = w.values(space)?;
    let cells = space.cells();
    let norm_factor = operator_norm.powf(pc / p);
    alg.blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let ew = compensated_sum(b.positions().iter().map(|&x| abs_pow(wv[x], q) * cells[x].mass)) / b.mass();
            let scale = ew.powf((pc - 1.0) / q) / (norm_factor * b.mass().powf(e));
            let mut values = vec![0.0; space.len()];
            for &x in b.positions() {
                let ux = uv[x];
                values[x] = if ux == 0.0 {
                    0.0
                } else {
                    ux.signum() * ux.abs().powf(pc - 1.0) * scale
                };
            }
            Ok(PietschTestFunction {
                block_index: i,
                values: Weight::from_values(space, values),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PietschCheck {
    /// Largest relative gap between `‖T f_i‖_q` computed directly and its
    /// closed form `‖T‖^{−p'/p} c_i^{p'}`.
    pub max_residual: f64,
    /// Largest `‖f_i‖_p`; at most one.
    pub max_test_norm: f64,
    pub blocks_checked: usize,
}

/// Compares `‖T f_i‖_q` for the test functions against the closed form.
/// `‖T‖` is taken from the direct-sum formula. Blocks where `T` vanishes
/// are skipped.
pub fn pietsch_identity_check(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
) -> Result<PietschCheck> {
    let norm = aggregate_norm(&block_norms(u, w, alg, exps, space)?, exps);
    if norm == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let tests = pietsch_test_functions(u, w, alg, exps, space, norm)?;
    let stats = atom_stats(u, w, alg, exps, space)?;
    let mut check = PietschCheck {
        max_residual: 0.0,
        max_test_norm: 0.0,
        blocks_checked: 0,
    };
    for (t, s) in tests.iter().zip(&stats) {
        if s.term == 0.0 {
            continue;
        }
        let direct = lp_norm(&apply(u, w, alg, &t.values, space)?, exps.q, space)?;
        let closed = s.term.powf(exps.p_conj) / norm.powf(exps.p_conj / exps.p);
        let residual = (direct - closed).abs() / closed;
        check.max_residual = check.max_residual.max(residual);
        check.max_test_norm = check.max_test_norm.max(lp_norm(&t.values, exps.p, space)?);
        check.blocks_checked += 1;
    }
    Ok(check)
}
