//! Orchestration behind the `wce` binary: `analyze` and `condexp`.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::json;

pub use config::Config;
pub use report::{CondexpReport, Format, Report};

use crate::asymptotic::{
    decay_fit, even_tail_bound, family_stats, odd_tail_bound, AtomFamily, ExampleAtom, ExamplePart, PaperExample,
};
use crate::condexp::{cond_exp, cond_exp_block_values};
use crate::criteria::{
    compactness_verdict, consistency_check, nonatomic_condition, nuclearity_verdict, CompactnessCase, Tail,
};
use crate::measure::{integrate, AtomicSpace, SubAlgebra, Weight};
use crate::oracle::{block_norms, operator_norm, pietsch_identity_check, trace_norm_hilbert};
use crate::wce::{atom_stats, nuclear_bound, AtomStats, Exponents, RankOneFactor, Regime};
use crate::{Error, Result};
use report::{
    CompactnessReport, CondexpRow, DecayReport, ExampleReport, FactorSummary, NormCheck, OracleReport, SubSeries,
    TraceCheck,
};

/// Atoms of the built-in example analysed when `--terms` is not given.
pub const DEFAULT_EXAMPLE_TERMS: usize = 100_000;
/// Atoms of the built-in example materialized for the oracles.
pub const EXAMPLE_ORACLE_ATOMS: usize = 40;
/// Largest space (in cells) the ascent and SVD oracles are run on.
pub const ORACLE_CELL_LIMIT: usize = 1500;
/// Window of `n` for the heuristic decay fit of the even blocks.
pub const DECAY_WINDOW: (f64, f64) = (20.0, 200.0);

const PHI_REMARK: &str = "‖φ_i‖_{p'} is evaluated as E(|u|^{p'})^{1/p'} μ(A_i)^{1/p'}, \
                          so that ‖φ_i‖ ‖g_i‖ equals the series term";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    /// Odd singletons and even blocks `A_n`, `u = x`, `w = x^{−3}`.
    Paper,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeArgs {
    pub config: Option<PathBuf>,
    pub example: Option<Example>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub terms: Option<usize>,
    pub oracle: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Exit codes above the verdict range: 3 for config errors, 4 for
/// unsupported regimes, 5 otherwise.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io(_) => 3,
        Error::RegimeUnsupported(_) | Error::InvalidExponent(_) => 4,
        _ => 5,
    }
}

pub fn run_analyze(args: &AnalyzeArgs) -> Result<Outcome> {
    let report = match (&args.config, args.example) {
        (Some(_), Some(_)) => return Err(Error::config("--example", "conflicts with --config")),
        (None, None) => return Err(Error::config("--config", "give a config file or --example")),
        (Some(path), None) => analyze_config(Config::load(path)?, path.display().to_string(), args)?,
        (None, Some(Example::Paper)) => analyze_example(args)?,
    };
    let exit_code = report.headline.exit_code();
    Ok(Outcome { report, exit_code })
}

pub fn run_condexp(path: &std::path::Path) -> Result<CondexpReport> {
    let cfg = Config::load(path)?;
    let f = cfg
        .f
        .as_ref()
        .ok_or_else(|| Error::config("weights.f", "condexp needs a function f"))?;
    condexp_report(f, &cfg.alg, &cfg.space, path.display().to_string())
}

pub fn condexp_report(f: &Weight, alg: &SubAlgebra, space: &AtomicSpace, source: String) -> Result<CondexpReport> {
    let values = cond_exp_block_values(f, alg, space)?;
    let ef = cond_exp(f, alg, space)?;
    let rows = alg
        .blocks()
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (b, value))| {
            let ids = b.cell_ids();
            let residual = (integrate(f, ids, space)? - integrate(&ef, ids, space)?).abs();
            Ok(CondexpRow {
                block_index: i,
                cells: b.len(),
                mass: b.mass(),
                value,
                residual,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CondexpReport { source, rows })
}

fn exponents(args: &AnalyzeArgs, cfg_p: Option<f64>, cfg_q: Option<f64>) -> Result<Exponents> {
    let p = args
        .p
        .or(cfg_p)
        .ok_or_else(|| Error::config("analysis.p", "missing; set it in the config or pass --p"))?;
    let q = args
        .q
        .or(cfg_q)
        .ok_or_else(|| Error::config("analysis.q", "missing; set it in the config or pass --q"))?;
    Exponents::new(p, q)
}

fn factor_summary(stats: &[AtomStats], exps: &Exponents) -> FactorSummary {
    let factors: Vec<RankOneFactor> = stats
        .iter()
        .map(|s| RankOneFactor::from_moments(s.block_index, &s.moments(), exps))
        .collect();
    let mismatch = factors
        .iter()
        .zip(stats)
        .map(|(f, s)| relative_gap(f.product, s.term))
        .fold(0.0, f64::max);
    FactorSummary {
        nuclear_bound: crate::sum::compensated_sum(factors.iter().map(|f| f.product)),
        max_term_mismatch: mismatch,
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

struct Verdicts {
    nuclearity: crate::criteria::Verdict,
    compactness: CompactnessReport,
    consistent: bool,
}

fn verdicts(
    stats: &[AtomStats],
    exps: &Exponents,
    nonatomic_ok: bool,
    tail: Option<Tail>,
    compact_tail: Option<Tail>,
) -> Result<Verdicts> {
    let nuclearity = nuclearity_verdict(stats, exps, nonatomic_ok, tail)?;
    let case = CompactnessCase::for_exponents(exps)?;
    let verdict = compactness_verdict(stats, exps, nonatomic_ok, case, compact_tail)?;
    let consistent = consistency_check(&nuclearity, &verdict);
    Ok(Verdicts {
        nuclearity,
        compactness: CompactnessReport { case, verdict },
        consistent,
    })
}

fn analyze_config(cfg: Config, source: String, args: &AnalyzeArgs) -> Result<Report> {
    let mut overrides = BTreeMap::new();
    for (name, flag, value) in [("p", args.p, cfg.analysis.p), ("q", args.q, cfg.analysis.q)] {
        if let Some(v) = flag {
            overrides.insert(name.to_string(), json!({"flag": v, "config": value}));
        }
    }
    if let Some(t) = args.terms {
        overrides.insert("terms".into(), json!({"flag": t, "config": cfg.analysis.terms}));
    }
    if args.oracle && cfg.analysis.oracle != Some(true) {
        overrides.insert("oracle".into(), json!({"flag": true, "config": cfg.analysis.oracle}));
    }
    let exps = exponents(args, cfg.analysis.p, cfg.analysis.q)?;
    let terms = args.terms.or(cfg.analysis.terms);
    if terms == Some(0) {
        return Err(Error::config("--terms", "must be at least 1"));
    }
    let blocks = cfg.alg.blocks().len();
    let truncated = terms.is_some_and(|t| t < blocks);
    let (space, alg) = match terms {
        Some(t) if truncated => cfg.alg.truncate(&cfg.space, t)?,
        _ => (cfg.space.clone(), cfg.alg.clone()),
    };
    let stated = config::tail_statement(cfg.analysis.tail_bound.as_ref())?;
    let stated_compact = config::tail_statement(cfg.analysis.compact_tail.as_ref())?;
    let silent = cfg.analysis.tail_bound.is_none() && cfg.analysis.compact_tail.is_none();
    let (tail, compact_tail) = if silent && !truncated {
        (Some(Tail::Finite), Some(Tail::Finite))
    } else {
        (stated, stated_compact)
    };

    let stats = atom_stats(&cfg.u, &cfg.w, &alg, &exps, &space)?;
    let nonatomic_ok = nonatomic_condition(&alg);
    let v = verdicts(&stats, &exps, nonatomic_ok, tail, compact_tail)?;
    let oracle = (args.oracle || cfg.analysis.oracle == Some(true))
        .then(|| oracle_report(&cfg.u, &cfg.w, &alg, &exps, &space, &stats))
        .transpose()?;
    Ok(Report {
        source: format!("config {source}"),
        overrides,
        exponents: exps,
        atoms: stats.len(),
        cells: Some(space.len()),
        truncated,
        nonatomic_ok,
        panels: alg.panels().to_vec(),
        factors: factor_summary(&stats, &exps),
        headline: v.nuclearity.status,
        nuclearity: v.nuclearity,
        compactness: v.compactness,
        consistent: v.consistent,
        remarks: vec![PHI_REMARK.into()],
        example: None,
        oracle,
        atom_stats: stats,
    })
}

fn analyze_example(args: &AnalyzeArgs) -> Result<Report> {
    let exps = exponents(args, None, None)?;
    let n = args.terms.unwrap_or(DEFAULT_EXAMPLE_TERMS);
    if n == 0 {
        return Err(Error::config("--terms", "must be at least 1"));
    }
    if exps.regime == Regime::Equal {
        return Err(Error::RegimeUnsupported(format!(
            "nuclearity criteria need p != q (p = q = {})",
            exps.p
        )));
    }
    let family = PaperExample::new(ExamplePart::Merged);
    let stats = family_stats(&family, &exps, n)?;
    let case = CompactnessCase::for_exponents(&exps)?;
    let v = verdicts(
        &stats,
        &exps,
        true,
        family.tail_bound(n, &exps),
        family.compactness_tail(case, n, &exps),
    )?;
    let example = example_report(&family, &stats, &exps)?;
    let oracle = if args.oracle {
        let m = n.min(EXAMPLE_ORACLE_ATOMS);
        let (space, alg, u, w) = family.materialize(m)?;
        Some(oracle_report(&u, &w, &alg, &exps, &space, &stats[..m])?)
    } else {
        None
    };
    let mut remarks = vec![PHI_REMARK.to_string()];
    remarks.push(
        "even-block tail bounds use k_n ≥ n²/4".into(),
    );
    Ok(Report {
        source: "example paper (merged odd singletons and even blocks)".into(),
        overrides: BTreeMap::new(),
        exponents: exps,
        atoms: n,
        cells: None,
        truncated: true,
        nonatomic_ok: true,
        panels: Vec::new(),
        factors: factor_summary(&stats, &exps),
        headline: v.nuclearity.status,
        nuclearity: v.nuclearity,
        compactness: v.compactness,
        consistent: v.consistent,
        remarks,
        example: Some(example),
        oracle,
        atom_stats: stats,
    })
}

fn example_report(family: &PaperExample, stats: &[AtomStats], exps: &Exponents) -> Result<ExampleReport> {
    let mut odd = crate::sum::NeumaierSum::new();
    let mut even = crate::sum::NeumaierSum::new();
    for s in stats {
        match family.atom(s.block_index) {
            ExampleAtom::Odd(_) => odd += s.term,
            ExampleAtom::Even(_) => even += s.term,
        }
    }
    let (odd_n, even_n) = family.split_count(stats.len());
    let evens = PaperExample::new(ExamplePart::Even);
    let points: Vec<(f64, f64)> = family_stats(&evens, exps, DECAY_WINDOW.1 as usize)?
        .iter()
        .map(|s| ((s.block_index + 1) as f64, s.term))
        .collect();
    let decay = decay_fit(&points, DECAY_WINDOW.0..=DECAY_WINDOW.1)
        .ok()
        .map(|fitted_exponent| DecayReport {
            window: DECAY_WINDOW,
            fitted_exponent,
            bound_exponent: -4.0 + exps.mass_sign() / exps.r,
        });
    Ok(ExampleReport {
        odd: SubSeries {
            atoms: odd_n,
            partial_sum: odd.value(),
            tail_bound: odd_tail_bound(odd_n),
        },
        even: SubSeries {
            atoms: even_n,
            partial_sum: even.value(),
            tail_bound: even_tail_bound(even_n, exps),
        },
        odd_closed_form: std::f64::consts::PI.powi(2) / 8.0,
        decay,
    })
}

fn oracle_report(
    u: &Weight,
    w: &Weight,
    alg: &SubAlgebra,
    exps: &Exponents,
    space: &AtomicSpace,
    stats: &[AtomStats],
) -> Result<OracleReport> {
    let mut skipped = Vec::new();
    let norms = block_norms(u, w, alg, exps, space)?;
    let block_norm_max_residual = norms
        .iter()
        .zip(stats)
        .map(|(b, s)| relative_gap(*b, s.term))
        .fold(0.0, f64::max);
    let small = space.len() <= ORACLE_CELL_LIMIT;
    let norm = if small {
        let bracket = operator_norm(u, w, alg, exps, space)?;
        Some(NormCheck {
            bracket,
            relative_gap: bracket.relative_gap(),
        })
    } else {
        skipped.push(format!("operator norm ascent: more than {ORACLE_CELL_LIMIT} cells"));
        None
    };
    let trace = if small {
        let trace_norm = trace_norm_hilbert(u, w, alg, space)?;
        let bound = nuclear_bound(u, w, alg, &Exponents::new(2.0, 2.0)?, space)?;
        Some(TraceCheck {
            trace_norm,
            nuclear_bound: bound,
            relative_gap: relative_gap(trace_norm, bound),
        })
    } else {
        skipped.push(format!("trace norm: more than {ORACLE_CELL_LIMIT} cells"));
        None
    };
    let pietsch = match pietsch_identity_check(u, w, alg, exps, space) {
        Ok(c) => Some(c),
        Err(Error::ZeroOperator) => {
            skipped.push("test functions: T vanishes on the atoms".into());
            None
        }
        Err(Error::RegimeUnsupported(reason)) => {
            skipped.push(format!("test functions: {reason}"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok(OracleReport {
        atoms: alg.blocks().len(),
        cells: space.len(),
        block_norm_max_residual,
        norm,
        trace,
        pietsch,
        skipped,
    })
}
