//! Report documents and their table, CSV and JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::criteria::{CompactnessCase, Status, Verdict};
use crate::measure::NonAtomicPanel;
use crate::oracle::{NormBracket, PietschCheck};
use crate::wce::{AtomStats, Exponents};
use crate::{Error, Result};

/// Rows shown by the table rendering; JSON and CSV carry every row.
pub const TABLE_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub source: String,
    /// Command-line values that replaced config values.
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub exponents: Exponents,
    pub atoms: usize,
    pub cells: Option<usize>,
    pub truncated: bool,
    pub nonatomic_ok: bool,
    pub panels: Vec<NonAtomicPanel>,
    pub factors: FactorSummary,
    pub nuclearity: Verdict,
    pub compactness: CompactnessReport,
    pub consistent: bool,
    pub headline: Status,
    pub remarks: Vec<String>,
    pub example: Option<ExampleReport>,
    pub oracle: Option<OracleReport>,
    pub atom_stats: Vec<AtomStats>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FactorSummary {
    /// `Σ_i ‖φ_i‖ ‖g_i‖` over the atoms analysed.
    pub nuclear_bound: f64,
    /// Largest relative gap between `‖φ_i‖ ‖g_i‖` and the series term.
    pub max_term_mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessReport {
    pub case: CompactnessCase,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubSeries {
    pub atoms: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
}

impl SubSeries {
    pub fn upper(&self) -> f64 {
        self.partial_sum + self.tail_bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub odd: SubSeries,
    pub even: SubSeries,
    /// `Σ_k (2k−1)^{−2} = π²/8`.
    pub odd_closed_form: f64,
    pub decay: Option<DecayReport>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayReport {
    pub window: (f64, f64),
    pub fitted_exponent: f64,
    /// Exponent of the proven majorant `8 n^{−4 + s/r}`.
    pub bound_exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub atoms: usize,
    pub cells: usize,
    /// Largest relative gap between the block norms and the series terms.
    pub block_norm_max_residual: f64,
    pub norm: Option<NormCheck>,
    pub trace: Option<TraceCheck>,
    pub pietsch: Option<PietschCheck>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormCheck {
    pub bracket: NormBracket,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceCheck {
    /// Sum of singular values of `T` on `L²`.
    pub trace_norm: f64,
    /// `Σ_i ‖φ_i‖ ‖g_i‖` at `p = q = 2`.
    pub nuclear_bound: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CondexpReport {
    pub source: String,
    pub rows: Vec<CondexpRow>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CondexpRow {
    pub block_index: usize,
    pub cells: usize,
    pub mass: f64,
    /// Value of `E f` on the block.
    pub value: f64,
    /// `|∫_A f dμ − ∫_A E f dμ|`.
    pub residual: f64,
}

#[derive(Serialize)]
struct StatsRow {
    block_index: usize,
    mass: f64,
    eu: f64,
    ew: f64,
    d: f64,
    term: f64,
}

fn csv_of<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::config("--format", e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::config("--format", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn json_of<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::config("--format", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

fn verdict_line(out: &mut String, label: &str, v: &Verdict) {
    let _ = writeln!(
        out,
        "{label:<13} {:?}  partial={:.12e}  bound={}  terms={}",
        v.status,
        v.partial_sum,
        opt(v.total_bound),
        v.terms_used
    );
    for c in &v.conditions {
        let state = match c.satisfied {
            Some(true) => "yes",
            Some(false) => "no",
            None => "unknown",
        };
        let _ = writeln!(out, "  {:<40} {state:<8} {}", c.name, opt(c.value));
    }
    if !v.notes.is_empty() {
        let _ = writeln!(out, "  notes: {:?}", v.notes);
    }
}

impl Report {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => json_of(self),
            Format::Csv => csv_of(self.atom_stats.iter().map(|s| StatsRow {
                block_index: s.block_index,
                mass: s.mass,
                eu: s.eu,
                ew: s.ew,
                d: s.d,
                term: s.term,
            })),
            Format::Table => Ok(self.table()),
        }
    }

    fn table(&self) -> String {
        let e = &self.exponents;
        let mut out = String::new();
        let _ = writeln!(out, "source        {}", self.source);
        for (k, v) in &self.overrides {
            let _ = writeln!(out, "override      {k} = {v}");
        }
        let _ = writeln!(
            out,
            "exponents     p={} q={} p'={} q'={} r={} ({:?})",
            e.p, e.q, e.p_conj, e.q_conj, e.r, e.regime
        );
        let cells = self.cells.map_or_else(String::new, |c| format!(", {c} cells"));
        let cut = if self.truncated { ", truncated" } else { "" };
        let _ = writeln!(out, "atoms         {}{cells}{cut}", self.atoms);
        let _ = writeln!(out, "non-atomic    {}", if self.nonatomic_ok { "ok" } else { "u, w jointly supported" });
        let _ = writeln!(
            out,
            "{:>8} {:>14} {:>14} {:>14} {:>14} {:>14}",
            "block", "mass", "eu", "ew", "d", "term"
        );
        for s in self.atom_stats.iter().take(TABLE_ROWS) {
            let _ = writeln!(
                out,
                "{:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                s.block_index, s.mass, s.eu, s.ew, s.d, s.term
            );
        }
        if self.atom_stats.len() > TABLE_ROWS {
            let _ = writeln!(out, "{:>8} ({} more rows)", "...", self.atom_stats.len() - TABLE_ROWS);
        }
        let _ = writeln!(
            out,
            "nuclear bound {:.12e}  (max |product − term| / term = {:.3e})",
            self.factors.nuclear_bound, self.factors.max_term_mismatch
        );
        verdict_line(&mut out, "nuclearity", &self.nuclearity);
        verdict_line(&mut out, "compactness", &self.compactness.verdict);
        let _ = writeln!(out, "  case: {:?}", self.compactness.case);
        let _ = writeln!(out, "consistency   {}", if self.consistent { "ok" } else { "VIOLATED" });
        if let Some(x) = &self.example {
            let _ = writeln!(
                out,
                "odd atoms     {}  partial={:.12e}  tail<={:.3e}  (π²/8 = {:.12e})",
                x.odd.atoms, x.odd.partial_sum, x.odd.tail_bound, x.odd_closed_form
            );
            let _ = writeln!(
                out,
                "even atoms    {}  partial={:.12e}  tail<={:.3e}",
                x.even.atoms, x.even.partial_sum, x.even.tail_bound
            );
            if let Some(d) = &x.decay {
                let _ = writeln!(
                    out,
                    "even decay    fitted {:.4} on n in [{}, {}], majorant {:.4} (heuristic)",
                    d.fitted_exponent, d.window.0, d.window.1, d.bound_exponent
                );
            }
        }
        if let Some(o) = &self.oracle {
            let _ = writeln!(out, "oracle        {} atoms, {} cells", o.atoms, o.cells);
            let _ = writeln!(out, "  block norms vs terms       {:.3e}", o.block_norm_max_residual);
            if let Some(n) = &o.norm {
                let _ = writeln!(
                    out,
                    "  operator norm              formula {:.12e}  ascent {:.12e}  gap {:.3e}",
                    n.bracket.formula_value, n.bracket.ascent_value, n.relative_gap
                );
            }
            if let Some(t) = &o.trace {
                let _ = writeln!(
                    out,
                    "  trace norm (p=q=2)         svd {:.12e}  factors {:.12e}  gap {:.3e}",
                    t.trace_norm, t.nuclear_bound, t.relative_gap
                );
            }
            if let Some(pc) = &o.pietsch {
                let _ = writeln!(
                    out,
                    "  test functions             {} blocks  residual {:.3e}  max ‖f‖_p {:.6}",
                    pc.blocks_checked, pc.max_residual, pc.max_test_norm
                );
            }
            for s in &o.skipped {
                let _ = writeln!(out, "  skipped: {s}");
            }
        }
        for r in &self.remarks {
            let _ = writeln!(out, "remark        {r}");
        }
        let _ = writeln!(out, "headline      {:?}", self.headline);
        out
    }
}

impl CondexpReport {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => json_of(self),
            Format::Csv => csv_of(&self.rows),
            Format::Table => {
                let mut out = String::new();
                let _ = writeln!(out, "source {}", self.source);
                let _ = writeln!(out, "{:>8} {:>6} {:>16} {:>22} {:>12}", "block", "cells", "mass", "E f", "residual");
                for r in &self.rows {
                    let _ = writeln!(
                        out,
                        "{:>8} {:>6} {:>16.9e} {:>22.15e} {:>12.3e}",
                        r.block_index, r.cells, r.mass, r.value, r.residual
                    );
                }
                Ok(out)
            }
        }
    }
}
