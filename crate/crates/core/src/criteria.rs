//! Nuclearity and compactness verdicts from per-atom statistics.
//!
//! A finite truncation never certifies convergence by itself, so every verdict
//! is three-valued: it is certified only when the caller states what happens
//! beyond the truncation through a [`Tail`].

use serde::Serialize;

use crate::measure::SubAlgebra;
use crate::sum::NeumaierSum;
use crate::wce::{AtomStats, Exponents, Regime};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Nuclear,
    NotNuclear,
    Compact,
    NotCompact,
    /// Reserved for callers that classify the zero operator on its own.
    Zero,
    Inconclusive,
}

impl Status {
    /// Process exit code for a headline status.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Nuclear | Status::Compact | Status::Zero => 0,
            Status::NotNuclear | Status::NotCompact => 1,
            Status::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Note {
    /// The evaluated criterion is used exactly as printed although its
    /// exponents look inconsistent.
    VerbatimTypoSuspected,
    /// Evidence came from a fitted decay rate, not from a bound.
    HeuristicTail,
    /// No statement about the atoms beyond the truncation was supplied.
    NoTailStatement,
    /// The tail statement only says the terms vanish, which does not bound a sum.
    TailOnlyVanishing,
    /// A tail bound was supplied but is negative or not finite.
    InvalidTailBound,
    /// `u` and `w` are jointly supported on a non-atomic panel.
    NonAtomicPartNonzero,
    /// Every series term vanishes and nothing lies beyond the truncation.
    ZeroOperator,
    /// `q = 1` in the `q < p` regime, where `q' = ∞` appears in the argument.
    TargetIsL1,
    /// Necessary and sufficient conditions are evaluated separately and are
    /// not claimed to be equivalent.
    SeparateNecessarySufficient,
}

/// What the caller knows about the atoms beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tail {
    /// There are none: the truncation is the whole space.
    Finite,
    /// The remaining terms sum to at most this value.
    SumBound(f64),
    /// The remaining terms tend to zero.
    Vanishing,
    /// The series diverges, or for limit criteria the terms do not vanish.
    Divergent,
}

/// One condition of a characterization with its evaluated evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub satisfied: Option<bool>,
    pub value: Option<f64>,
}

impl Condition {
    fn new(name: &str, satisfied: Option<bool>, value: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            satisfied,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Partial sum of the evaluated series, or for limit criteria the last
    /// term of the sequence.
    pub partial_sum: f64,
    /// `partial_sum` plus the tail bound, when one was supplied.
    pub total_bound: Option<f64>,
    pub terms_used: usize,
    pub notes: Vec<Note>,
    pub conditions: Vec<Condition>,
}

/// `(E|u|^{p'})^{1/p'} (E|w|^q)^{1/q} = 0` on the non-atomic part, checked at
/// panel resolution: supports of `E(|v|^α)` and `v` coincide block-wise, so the
/// product vanishes exactly when no panel supports both weights.
pub fn nonatomic_condition(alg: &SubAlgebra) -> bool {
    !alg
        .panels()
        .iter()
        .any(|p| p.u_support_positive && p.w_support_positive)
}

fn series_sum(terms: impl Iterator<Item = f64>) -> f64 {
    terms.collect::<NeumaierSum>().value()
}

/// How a series criterion resolves given the tail statement.
fn series_status(tail: Option<Tail>, partial: f64, notes: &mut Vec<Note>) -> (Option<bool>, Option<f64>) {
    match tail {
        Some(Tail::Finite) => (Some(true), Some(partial)),
        Some(Tail::SumBound(b)) if b >= 0.0 && b.is_finite() => (Some(true), Some(partial + b)),
        Some(Tail::SumBound(_)) => {
            notes.push(Note::InvalidTailBound);
            (None, None)
        }
        Some(Tail::Divergent) => (Some(false), None),
        Some(Tail::Vanishing) => {
            notes.push(Note::TailOnlyVanishing);
            (None, None)
        }
        None => {
            notes.push(Note::NoTailStatement);
            (None, None)
        }
    }
}

/// How a "terms tend to zero" criterion resolves given the tail statement.
fn limit_status(tail: Option<Tail>, notes: &mut Vec<Note>) -> Option<bool> {
    match tail {
        Some(Tail::Finite) | Some(Tail::Vanishing) => Some(true),
        Some(Tail::SumBound(b)) if b >= 0.0 && b.is_finite() => Some(true),
        Some(Tail::SumBound(_)) => {
            notes.push(Note::InvalidTailBound);
            None
        }
        Some(Tail::Divergent) => Some(false),
        None => {
            notes.push(Note::NoTailStatement);
            None
        }
    }
}

/// Nuclearity of `T : L^p → L^q` from the series `Σ_i c_i`.
pub fn nuclearity_verdict(
    stats: &[AtomStats],
    exps: &Exponents,
    nonatomic_ok: bool,
    tail: Option<Tail>,
) -> Result<Verdict> {
    if exps.regime == Regime::Equal {
        return Err(Error::RegimeUnsupported(format!(
            "nuclearity criteria need p != q (p = q = {})",
            exps.p
        )));
    }
    let partial = series_sum(stats.iter().map(|s| s.term));
    let mut notes = Vec::new();
    if exps.regime == Regime::Smaller && exps.q == 1.0 {
        notes.push(Note::TargetIsL1);
    }
    let (series_ok, total) = series_status(tail, partial, &mut notes);
    let conditions = vec![
        Condition::new("non-atomic part vanishes", Some(nonatomic_ok), None),
        Condition::new("atom series converges", series_ok, total),
    ];
    let status = if !nonatomic_ok {
        notes.push(Note::NonAtomicPartNonzero);
        Status::NotNuclear
    } else {
        match series_ok {
            Some(true) => Status::Nuclear,
            Some(false) => Status::NotNuclear,
            None => Status::Inconclusive,
        }
    };
    if status == Status::Nuclear && tail == Some(Tail::Finite) && partial == 0.0 {
        notes.push(Note::ZeroOperator);
    }
    Ok(Verdict {
        status,
        partial_sum: partial,
        total_bound: total,
        terms_used: stats.len(),
        notes,
        conditions,
    })
}

/// Which compactness characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompactnessCase {
    /// `1 < q < p`: a series over the A-atoms (used exactly as printed).
    SeriesSmaller,
    /// `1 < p < q`: a limit over the A-atoms.
    LimitLarger,
    /// `q = 1 < p`: a series over the A-atoms.
    IntoL1,
    /// `p = 1 < q`: necessary conditions on A-atoms, sufficient ones on Σ-atoms.
    FromL1,
}

impl CompactnessCase {
    pub fn for_exponents(exps: &Exponents) -> Result<Self> {
        let (p, q) = (exps.p, exps.q);
        if p > 1.0 && q > 1.0 && q < p {
            Ok(Self::SeriesSmaller)
        } else if p > 1.0 && q > 1.0 && p < q {
            Ok(Self::LimitLarger)
        } else if p > 1.0 && q == 1.0 {
            Ok(Self::IntoL1)
        } else if p == 1.0 && q > 1.0 {
            Ok(Self::FromL1)
        } else {
            Err(Error::RegimeUnsupported(format!(
                "no compactness characterization for p = {p}, q = {q}"
            )))
        }
    }

    /// Per-atom quantity the criterion sums or sends to zero.
    pub fn quantity(self, s: &AtomStats, exps: &Exponents) -> f64 {
        let (pc, qc) = (exps.p_conj, exps.q_conj);
        match self {
            Self::SeriesSmaller => {
                let span = qc - pc;
                s.ew.powf(pc * qc / span) * s.eu_p.powf(qc / span) * s.mass
            }
            Self::LimitLarger => s.eu * s.ew.powf(pc / exps.q) / s.mass.powf((pc - qc) / qc),
            Self::IntoL1 => s.eu * s.ew.powf(pc) * s.mass,
            Self::FromL1 => {
                s.eu_qconj.unwrap_or(0.0) * s.ew.powf(qc / exps.q) / s.mass
            }
        }
    }
}

/// Compactness of `T : L^p → L^q` for the characterization `case`.
///
/// For [`CompactnessCase::FromL1`] the tail statement refers to the Σ-atom
/// sequence; `Divergent` means the A-atom sequence does not vanish.
pub fn compactness_verdict(
    stats: &[AtomStats],
    exps: &Exponents,
    nonatomic_ok: bool,
    case: CompactnessCase,
    tail: Option<Tail>,
) -> Result<Verdict> {
    let expected = CompactnessCase::for_exponents(exps)?;
    if expected != case {
        return Err(Error::RegimeUnsupported(format!(
            "case {case:?} does not match p = {}, q = {} (expected {expected:?})",
            exps.p, exps.q
        )));
    }
    let mut notes = Vec::new();
    let values: Vec<f64> = stats.iter().map(|s| case.quantity(s, exps)).collect();
    let last = values.last().copied().unwrap_or(0.0);
    let b = Condition::new("non-atomic part vanishes", Some(nonatomic_ok), None);

    let (status, partial, total, conditions) = match case {
        CompactnessCase::SeriesSmaller | CompactnessCase::IntoL1 => {
            if case == CompactnessCase::SeriesSmaller {
                notes.push(Note::VerbatimTypoSuspected);
            }
            let partial = series_sum(values.iter().copied());
            let (ok, total) = series_status(tail, partial, &mut notes);
            let status = combine(nonatomic_ok, ok);
            let conds = vec![b, Condition::new("atom series converges", ok, total)];
            (status, partial, total, conds)
        }
        CompactnessCase::LimitLarger => {
            let ok = limit_status(tail, &mut notes);
            let status = combine(nonatomic_ok, ok);
            let conds = vec![b, Condition::new("atom terms vanish", ok, Some(last))];
            (status, last, None, conds)
        }
        CompactnessCase::FromL1 => {
            notes.push(Note::SeparateNecessarySufficient);
            let ok = limit_status(tail, &mut notes);
            let cell_last = stats
                .iter()
                .map(|s| s.eu_qconj.unwrap_or(0.0) * s.ew.powf(exps.q_conj / exps.q) / s.min_cell_mass)
                .next_back()
                .unwrap_or(0.0);
            let necessary = match (nonatomic_ok, ok) {
                (false, _) | (_, Some(false)) => Some(false),
                (true, Some(true)) => Some(true),
                (true, None) => None,
            };
            // The sufficient list only gains from a vanishing Σ-atom sequence.
            let sufficient = match (nonatomic_ok, ok) {
                (false, _) => Some(false),
                (true, Some(true)) => Some(true),
                (true, _) => None,
            };
            let status = match (necessary, sufficient) {
                (Some(false), _) => Status::NotCompact,
                (_, Some(true)) => Status::Compact,
                _ => Status::Inconclusive,
            };
            let conds = vec![
                Condition::new("necessary: non-atomic part vanishes", Some(nonatomic_ok), None),
                Condition::new("necessary: A-atom terms vanish", ok, Some(last)),
                Condition::new("sufficient: non-atomic part vanishes", Some(nonatomic_ok), None),
                Condition::new("sufficient: Σ-atom terms vanish", ok, Some(cell_last)),
                Condition::new("necessary conditions hold", necessary, None),
                Condition::new("sufficient conditions hold", sufficient, None),
            ];
            (status, last, None, conds)
        }
    };
    if !nonatomic_ok {
        notes.push(Note::NonAtomicPartNonzero);
    }
    Ok(Verdict {
        status,
        partial_sum: partial,
        total_bound: total,
        terms_used: stats.len(),
        notes,
        conditions,
    })
}

fn combine(nonatomic_ok: bool, atoms_ok: Option<bool>) -> Status {
    match (nonatomic_ok, atoms_ok) {
        (false, _) | (_, Some(false)) => Status::NotCompact,
        (true, Some(true)) => Status::Compact,
        (true, None) => Status::Inconclusive,
    }
}

/// Nuclear operators are compact; `false` flags a contradiction.
pub fn consistency_check(nuclear: &Verdict, compact: &Verdict) -> bool {
    !(nuclear.status == Status::Nuclear && compact.status == Status::NotCompact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomicSpace, NonAtomicPanel, Weight};
    use crate::wce::atom_stats;

    fn stats_for(u: &[f64], w: &[f64], exps: &Exponents) -> Vec<AtomStats> {
        let s = AtomicSpace::counting(u.len() as u64).unwrap();
        let alg = SubAlgebra::trivial(&s);
        atom_stats(
            &Weight::from_values(&s, u.to_vec()),
            &Weight::from_values(&s, w.to_vec()),
            &alg,
            exps,
            &s,
        )
        .unwrap()
    }

    fn verdict(status: Status) -> Verdict {
        Verdict {
            status,
            partial_sum: 0.0,
            total_bound: None,
            terms_used: 0,
            notes: vec![],
            conditions: vec![],
        }
    }

    #[test]
    fn nonatomic_condition_examples() {
        let s = AtomicSpace::counting(1).unwrap();
        let alg = SubAlgebra::trivial(&s);
        assert!(nonatomic_condition(&alg));
        let alg = alg.with_panels(vec![NonAtomicPanel::new("B", true, false)]);
        assert!(nonatomic_condition(&alg));
        let alg = alg.with_panels(vec![
            NonAtomicPanel::new("B0", false, true),
            NonAtomicPanel::new("B1", true, true),
        ]);
        assert!(!nonatomic_condition(&alg));
    }

    #[test]
    fn zero_terms_are_nuclear() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let st = stats_for(&[0.0, 0.0], &[1.0, 2.0], &exps);
        let v = nuclearity_verdict(&st, &exps, true, Some(Tail::Finite)).unwrap();
        assert_eq!(v.status, Status::Nuclear);
        assert_eq!(v.partial_sum, 0.0);
        assert!(v.notes.contains(&Note::ZeroOperator));
    }

    #[test]
    fn nonatomic_failure_overrides_series() {
        let exps = Exponents::new(3.0, 2.0).unwrap();
        let st = stats_for(&[0.0], &[0.0], &exps);
        for tail in [None, Some(Tail::Finite), Some(Tail::SumBound(0.0))] {
            let v = nuclearity_verdict(&st, &exps, false, tail).unwrap();
            assert_eq!(v.status, Status::NotNuclear);
            let c = compactness_verdict(&st, &exps, false, CompactnessCase::SeriesSmaller, tail).unwrap();
            assert_eq!(c.status, Status::NotCompact);
        }
    }

    #[test]
    fn tail_statements() {
        let exps = Exponents::new(2.0, 3.0).unwrap();
        let st = stats_for(&[1.0, 2.0], &[1.0, 0.5], &exps);
        let run = |t| nuclearity_verdict(&st, &exps, true, t).unwrap();
        assert_eq!(run(None).status, Status::Inconclusive);
        assert!(run(None).notes.contains(&Note::NoTailStatement));
        assert_eq!(run(Some(Tail::Vanishing)).status, Status::Inconclusive);
        assert_eq!(run(Some(Tail::SumBound(-1.0))).status, Status::Inconclusive);
        assert_eq!(run(Some(Tail::SumBound(f64::INFINITY))).status, Status::Inconclusive);
        assert_eq!(run(Some(Tail::Divergent)).status, Status::NotNuclear);
        let v = run(Some(Tail::SumBound(0.25)));
        assert_eq!(v.status, Status::Nuclear);
        assert_eq!(v.total_bound, Some(v.partial_sum + 0.25));
        assert_eq!(v.terms_used, 2);
        // Inconclusive still carries evidence.
        let i = run(None);
        assert_eq!(i.partial_sum, v.partial_sum);
    }

    #[test]
    fn equal_exponents_are_rejected() {
        let exps = Exponents::new(2.0, 2.0).unwrap();
        let st = stats_for(&[1.0], &[1.0], &exps);
        assert!(matches!(
            nuclearity_verdict(&st, &exps, true, Some(Tail::Finite)),
            Err(Error::RegimeUnsupported(_))
        ));
        assert!(CompactnessCase::for_exponents(&exps).is_err());
    }

    #[test]
    fn compactness_cases_by_exponents() {
        let case = |p, q| CompactnessCase::for_exponents(&Exponents::new(p, q).unwrap());
        assert_eq!(case(3.0, 2.0).unwrap(), CompactnessCase::SeriesSmaller);
        assert_eq!(case(2.0, 3.0).unwrap(), CompactnessCase::LimitLarger);
        assert_eq!(case(2.0, 1.0).unwrap(), CompactnessCase::IntoL1);
        assert_eq!(case(1.0, 2.0).unwrap(), CompactnessCase::FromL1);
        assert!(case(1.0, 1.0).is_err());

        let exps = Exponents::new(3.0, 2.0).unwrap();
        let st = stats_for(&[1.0], &[1.0], &exps);
        assert!(compactness_verdict(&st, &exps, true, CompactnessCase::LimitLarger, None).is_err());
    }

    #[test]
    fn zero_operator_and_finite_rank_are_compact() {
        for (p, q) in [(3.0, 2.0), (2.0, 3.0), (2.0, 1.0), (1.0, 2.0)] {
            let exps = Exponents::new(p, q).unwrap();
            let case = CompactnessCase::for_exponents(&exps).unwrap();
            let zero = stats_for(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &exps);
            let v = compactness_verdict(&zero, &exps, true, case, Some(Tail::Finite)).unwrap();
            assert_eq!(v.status, Status::Compact, "zero operator, ({p},{q})");
            let some = stats_for(&[1.0, -3.0, 2.0], &[0.5, 1.0, 7.0], &exps);
            let v = compactness_verdict(&some, &exps, true, case, Some(Tail::Finite)).unwrap();
            assert_eq!(v.status, Status::Compact, "finite rank, ({p},{q})");
            let v = compactness_verdict(&some, &exps, true, case, Some(Tail::Divergent)).unwrap();
            assert_eq!(v.status, Status::NotCompact);
            let v = compactness_verdict(&some, &exps, true, case, None).unwrap();
            assert_eq!(v.status, Status::Inconclusive);
        }
    }

    #[test]
    fn series_smaller_is_verbatim() {
        // p = 3, q = 2: p' = 3/2, q' = 2, so the printed exponents are
        // p'q'/(q'−p') = 6 on E|w|^q and q'/(q'−p') = 4 on E|u|^p.
        let exps = Exponents::new(3.0, 2.0).unwrap();
        let st = stats_for(&[2.0], &[0.5], &exps);
        let expected = (0.25f64).powi(6) * 8f64.powi(4);
        let got = CompactnessCase::SeriesSmaller.quantity(&st[0], &exps);
        assert!((got - expected).abs() < 1e-12 * expected);
        let v = compactness_verdict(&st, &exps, true, CompactnessCase::SeriesSmaller, Some(Tail::Finite)).unwrap();
        assert!(v.notes.contains(&Note::VerbatimTypoSuspected));
    }

    #[test]
    fn from_l1_reports_both_lists() {
        let exps = Exponents::new(1.0, 2.0).unwrap();
        let st = stats_for(&[1.0, 2.0], &[1.0, 1.0], &exps);
        let v = compactness_verdict(&st, &exps, true, CompactnessCase::FromL1, None).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        assert!(v.conditions.iter().any(|c| c.name.starts_with("necessary")));
        assert!(v.conditions.iter().any(|c| c.name.starts_with("sufficient")));
        assert!(v.notes.contains(&Note::SeparateNecessarySufficient));
    }

    #[test]
    fn consistency_examples() {
        assert!(consistency_check(&verdict(Status::Nuclear), &verdict(Status::Compact)));
        assert!(!consistency_check(&verdict(Status::Nuclear), &verdict(Status::NotCompact)));
        assert!(consistency_check(&verdict(Status::Inconclusive), &verdict(Status::Compact)));
        assert!(consistency_check(&verdict(Status::NotNuclear), &verdict(Status::NotCompact)));
    }

    #[test]
    fn target_l1_is_flagged() {
        let exps = Exponents::new(2.0, 1.0).unwrap();
        let st = stats_for(&[1.0], &[1.0], &exps);
        let v = nuclearity_verdict(&st, &exps, true, Some(Tail::Finite)).unwrap();
        assert!(v.notes.contains(&Note::TargetIsL1));
    }
}
