//! Random finite atomic spaces shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wce_nuclear::measure::{AtomicSpace, Cell, CellId, NonAtomicPanel, SubAlgebra, Weight};
use wce_nuclear::wce::{Exponents, Regime};

pub const MAX_BLOCKS: usize = 20;
pub const MAX_CELLS: usize = 8;

#[derive(Debug, Clone)]
pub struct Instance {
    pub space: AtomicSpace,
    pub alg: SubAlgebra,
    pub u: Weight,
    pub w: Weight,
    pub exps: Exponents,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exponent in `(1, 6]`.
pub fn exponent(rng: &mut impl Rng) -> f64 {
    6.0 - 5.0 * rng.random::<f64>()
}

/// `(p, q)` in `(1, 6]²` in the requested regime, at least `0.05` apart so
/// that `r` stays moderate.
pub fn exponents(rng: &mut impl Rng, regime: Option<Regime>) -> Exponents {
    loop {
        let (a, b) = (exponent(rng), exponent(rng));
        if (a - b).abs() < 0.05 {
            continue;
        }
        let (p, q) = match regime {
            Some(Regime::Smaller) => (a.max(b), a.min(b)),
            Some(Regime::Larger) => (a.min(b), a.max(b)),
            _ => (a, b),
        };
        return Exponents::new(p, q).unwrap();
    }
}

/// Values in `±[0.05, 4]`, with an occasional zero.
pub fn value(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.1) {
        return 0.0;
    }
    let magnitude = 0.05 + 3.95 * rng.random::<f64>();
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// A partition with up to `MAX_BLOCKS` blocks of up to `MAX_CELLS` cells,
/// masses in `[0.05, 5]`, and shuffled, non-contiguous cell ids.
pub fn space(rng: &mut impl Rng) -> (AtomicSpace, SubAlgebra) {
    let blocks = rng.random_range(1..=MAX_BLOCKS);
    let sizes: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=MAX_CELLS)).collect();
    let total: usize = sizes.iter().sum();
    let base = rng.random_range(0..1000u64);
    let mut ids: Vec<u64> = (0..total as u64).map(|i| base + 3 * i + rng.random_range(0..3)).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let cells: Vec<Cell> = ids
        .iter()
        .map(|&id| Cell::new(id, 0.05 + 4.95 * rng.random::<f64>()))
        .collect();
    let space = AtomicSpace::new(cells).unwrap();
    let mut next = 0;
    let parts = sizes
        .iter()
        .map(|&k| {
            let part = ids[next..next + k].iter().map(|&id| CellId(id)).collect();
            next += k;
            part
        })
        .collect();
    let alg = SubAlgebra::new(&space, parts, Vec::new()).unwrap();
    (space, alg)
}

pub fn function(rng: &mut impl Rng, space: &AtomicSpace) -> Weight {
    Weight::from_values(space, (0..space.len()).map(|_| value(rng)).collect())
}

pub fn instance(seed: u64, regime: Option<Regime>) -> Instance {
    let mut rng = rng(seed);
    let (space, alg) = space(&mut rng);
    let u = function(&mut rng, &space);
    let w = function(&mut rng, &space);
    let exps = exponents(&mut rng, regime);
    Instance { space, alg, u, w, exps }
}

/// Same instance with `p, q` replaced.
pub fn with_exponents(mut inst: Instance, p: f64, q: f64) -> Instance {
    inst.exps = Exponents::new(p, q).unwrap();
    inst
}

/// Adds a non-atomic panel on which `u` and `w` are both supported.
pub fn with_joint_panel(mut inst: Instance, rng: &mut impl Rng) -> Instance {
    let mut panels = vec![NonAtomicPanel::new("B", true, true)];
    if rng.random_bool(0.5) {
        panels.insert(0, NonAtomicPanel::new("B'", rng.random_bool(0.5), false));
    }
    inst.alg = inst.alg.clone().with_panels(panels);
    inst
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Relative tolerance of the conditional expectation axiom suite.
pub const AXIOM_TOL: f64 = 1e-12;

/// Checks the conditional expectation axioms on a random instance; returns
/// the names of the ones that fail.
pub fn cond_exp_axiom_failures(seed: u64) -> Vec<&'static str> {
    use wce_nuclear::condexp::{cond_exp, support_cover};
    use wce_nuclear::measure::integrate;

    let mut rng = rng(seed);
    let (space, alg) = space(&mut rng);
    let mut fv: Vec<f64> = (0..space.len()).map(|_| value(&mut rng)).collect();
    for b in alg.blocks() {
        if rng.random_bool(0.3) {
            for &p in b.positions() {
                fv[p] = 0.0;
            }
        }
    }
    let f = Weight::from_values(&space, fv.clone());
    let g = function(&mut rng, &space);
    // keeps both p and p' in [1.2, 6]
    let p = 1.2 + 4.8 * rng.random::<f64>();
    let pc = p / (p - 1.0);
    let e = |x: &Weight| cond_exp(x, &alg, &space).unwrap().values(&space).unwrap();
    let vals = |x: &Weight| x.values(&space).unwrap();
    let abs = |x: &Weight| x.map(&space, f64::abs).unwrap();
    let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= AXIOM_TOL * scale.max(a.abs()).max(b.abs());
    let below = |a: f64, b: f64| a <= b * (1.0 + AXIOM_TOL) + f64::MIN_POSITIVE;
    let mut failures = Vec::new();

    let ef = cond_exp(&f, &alg, &space).unwrap();
    let abs_f = abs(&f);
    if !alg.blocks().iter().all(|b| {
        let ids = b.cell_ids();
        close(
            integrate(&ef, ids, &space).unwrap(),
            integrate(&f, ids, &space).unwrap(),
            integrate(&abs_f, ids, &space).unwrap(),
        )
    }) {
        failures.push("averaging identity");
    }
    if !e(&ef).iter().zip(vals(&ef)).all(|(a, b)| close(*a, b, 0.0)) {
        failures.push("idempotence");
    }
    let h = cond_exp(&g, &alg, &space).unwrap();
    let lhs = e(&h.product(&f, &space).unwrap());
    let rhs = vals(&h.product(&ef, &space).unwrap());
    let scale: Vec<f64> = vals(&h.product(&cond_exp(&abs_f, &alg, &space).unwrap(), &space).unwrap());
    if !lhs.iter().zip(&rhs).zip(&scale).all(|((a, b), s)| close(*a, *b, s.abs())) {
        failures.push("module property");
    }
    let jensen_rhs = e(&f.map(&space, |x| x.abs().powf(p)).unwrap());
    if !vals(&ef).iter().zip(&jensen_rhs).all(|(a, b)| below(a.abs().powf(p), *b)) {
        failures.push("conditional Jensen");
    }
    if !e(&abs_f).iter().all(|&x| x >= 0.0) {
        failures.push("positivity");
    }
    let fg = e(&abs(&f.product(&g, &space).unwrap()));
    let fp = e(&f.map(&space, |x| x.abs().powf(p)).unwrap());
    let gq = e(&g.map(&space, |x| x.abs().powf(pc)).unwrap());
    if !(0..space.len()).all(|i| below(fg[i], fp[i].powf(1.0 / p) * gq[i].powf(1.0 / pc))) {
        failures.push("conditional Hölder");
    }
    let cover = support_cover(&f, &alg, &space).unwrap();
    let e_abs = e(&abs_f);
    let from_expectation: std::collections::BTreeSet<usize> = alg
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.positions().iter().any(|&x| e_abs[x] != 0.0))
        .map(|(i, _)| i)
        .collect();
    let covers_support = (0..space.len()).all(|x| fv[x] == 0.0 || cover.contains(&alg.block_of_position(x)));
    if cover != from_expectation || !covers_support {
        failures.push("support cover");
    }
    failures
}
