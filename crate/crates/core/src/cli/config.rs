//! The analysis config document (JSON).
//!
//! ```json
//! {
//!   "space": {
//!     "cells": [{"id": 1, "mass": 1.0}, {"id": 2, "mass": 2.0}],
//!     "blocks": [[1, 2]],
//!     "panels": [{"id": "B0", "u_support": true, "w_support": false}]
//!   },
//!   "weights": {
//!     "u": {"type": "table", "values": {"1": 3.0, "2": 5.0}},
//!     "w": {"type": "expr", "formula": "1/n^3"},
//!     "f": {"type": "table", "values": [1.0, -1.0]}
//!   },
//!   "analysis": {"p": 2, "q": 3, "terms": 10, "tail_bound": 0.5, "oracle": true}
//! }
//! ```
//!
//! `blocks` defaults to the singleton partition. Table values are keyed by
//! cell id or listed in cell order. `tail_bound` is a number, or one of
//! `"finite"`, `"vanishing"`, `"divergent"`, `"unknown"`, and bounds the
//! nuclearity series beyond the listed blocks. `compact_tail` is the same
//! statement for the compactness quantity. When both are absent the cells are
//! taken to be the whole space, unless `terms` cuts blocks off.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::criteria::Tail;
use crate::measure::{AtomicSpace, Cell, CellId, NonAtomicPanel, SubAlgebra, Weight};
use crate::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub space: SpaceDoc,
    pub weights: WeightsDoc,
    #[serde(default)]
    pub analysis: AnalysisDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub cells: Vec<CellDoc>,
    pub blocks: Option<Vec<Vec<u64>>>,
    #[serde(default)]
    pub panels: Vec<PanelDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub id: u64,
    pub mass: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LabelDoc {
    Num(u64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelDoc {
    pub id: LabelDoc,
    pub u_support: bool,
    pub w_support: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub u: WeightDoc,
    pub w: WeightDoc,
    pub f: Option<WeightDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Table,
    Expr,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TableValues {
    ById(BTreeMap<String, f64>),
    InOrder(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightDoc {
    #[serde(rename = "type")]
    pub kind: WeightKind,
    pub values: Option<TableValues>,
    pub formula: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TailDoc {
    Bound(f64),
    Word(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisDoc {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub terms: Option<usize>,
    pub tail_bound: Option<TailDoc>,
    pub compact_tail: Option<TailDoc>,
    pub oracle: Option<bool>,
}

/// A validated config: space, partition and weights ready for analysis.
#[derive(Debug, Clone)]
pub struct Config {
    pub space: AtomicSpace,
    pub alg: SubAlgebra,
    pub u: Weight,
    pub w: Weight,
    pub f: Option<Weight>,
    pub analysis: AnalysisDoc,
}

impl ConfigDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<document>".into() } else { path }, e.into_inner().to_string())
        })
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(ConfigDoc::from_json(text)?)
    }

    pub fn from_doc(doc: ConfigDoc) -> Result<Self> {
        let field = |name: &'static str| move |e: Error| Error::config(name, e.to_string());
        let space = AtomicSpace::new(doc.space.cells.iter().map(|c| Cell::new(c.id, c.mass)).collect())
            .map_err(field("space.cells"))?;
        let panels = doc
            .space
            .panels
            .iter()
            .map(|p| {
                let id = match &p.id {
                    LabelDoc::Num(n) => n.to_string(),
                    LabelDoc::Text(s) => s.clone(),
                };
                NonAtomicPanel::new(id, p.u_support, p.w_support)
            })
            .collect();
        let alg = match &doc.space.blocks {
            Some(blocks) => SubAlgebra::new(
                &space,
                blocks.iter().map(|b| b.iter().map(|&id| CellId(id)).collect()).collect(),
                panels,
            )
            .map_err(field("space.blocks"))?,
            None => SubAlgebra::trivial(&space).with_panels(panels),
        };
        let u = weight(&doc.weights.u, &space, "weights.u")?;
        let w = weight(&doc.weights.w, &space, "weights.w")?;
        let f = doc
            .weights
            .f
            .as_ref()
            .map(|d| weight(d, &space, "weights.f"))
            .transpose()?;
        if let Some(terms) = doc.analysis.terms {
            if terms == 0 {
                return Err(Error::config("analysis.terms", "must be at least 1"));
            }
        }
        tail_statement(doc.analysis.tail_bound.as_ref()).map_err(rename("analysis.tail_bound"))?;
        tail_statement(doc.analysis.compact_tail.as_ref()).map_err(rename("analysis.compact_tail"))?;
        Ok(Self {
            space,
            alg,
            u,
            w,
            f,
            analysis: doc.analysis,
        })
    }
}

fn rename(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config { reason, .. } => Error::config(field, reason),
        other => other,
    }
}

fn weight(doc: &WeightDoc, space: &AtomicSpace, name: &str) -> Result<Weight> {
    let w = match doc.kind {
        WeightKind::Table => {
            let values = doc
                .values
                .as_ref()
                .ok_or_else(|| Error::config(format!("{name}.values"), "a table weight needs values"))?;
            match values {
                TableValues::InOrder(v) => {
                    if v.len() != space.len() {
                        return Err(Error::config(
                            format!("{name}.values"),
                            format!("expected {} values, got {}", space.len(), v.len()),
                        ));
                    }
                    Weight::from_values(space, v.clone())
                }
                TableValues::ById(map) => {
                    let mut table = BTreeMap::new();
                    for (k, v) in map {
                        let id = k
                            .parse::<u64>()
                            .map_err(|_| Error::config(format!("{name}.values.{k}"), "keys must be cell ids"))?;
                        space
                            .position(CellId(id))
                            .map_err(|e| Error::config(format!("{name}.values.{k}"), e.to_string()))?;
                        table.insert(CellId(id), *v);
                    }
                    Weight::Table(table)
                }
            }
        }
        WeightKind::Expr => {
            let formula = doc
                .formula
                .as_deref()
                .ok_or_else(|| Error::config(format!("{name}.formula"), "an expr weight needs a formula"))?;
            Weight::expr(formula).map_err(|e| Error::config(format!("{name}.formula"), e.to_string()))?
        }
    };
    w.values(space).map_err(|e| Error::config(name, e.to_string()))?;
    Ok(w)
}

/// `None` when the document states nothing or says `"unknown"`.
pub fn tail_statement(doc: Option<&TailDoc>) -> Result<Option<Tail>> {
    match doc {
        None => Ok(None),
        Some(TailDoc::Bound(b)) if *b >= 0.0 && b.is_finite() => Ok(Some(Tail::SumBound(*b))),
        Some(TailDoc::Bound(b)) => Err(Error::config(
            "tail",
            format!("{b} is not a nonnegative finite bound"),
        )),
        Some(TailDoc::Word(w)) => match w.as_str() {
            "finite" => Ok(Some(Tail::Finite)),
            "vanishing" => Ok(Some(Tail::Vanishing)),
            "divergent" => Ok(Some(Tail::Divergent)),
            "unknown" => Ok(None),
            other => Err(Error::config(
                "tail",
                format!("unknown tail statement `{other}`"),
            )),
        },
    }
}
