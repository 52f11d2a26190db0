//! Discrete σ-finite measure spaces, sub-σ-algebras given as partitions,
//! and measurable functions on them.
//!
//! Every cell carries positive mass, so "almost everywhere" statements reduce
//! to statements about every cell and the essential supremum is a maximum.
//! The non-atomic part of a space is never sampled; it is carried by
//! [`NonAtomicPanel`]s that only record whether `u` and `w` are supported there.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u64);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A Σ-atom: one point of the discrete space with its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub mass: f64,
}

impl Cell {
    pub fn new(id: u64, mass: f64) -> Self {
        Self {
            id: CellId(id),
            mass,
        }
    }
}

/// A finite (possibly truncated) atomic measure space.
#[derive(Debug, Clone)]
pub struct AtomicSpace {
    cells: Vec<Cell>,
    total_mass: f64,
    index: HashMap<CellId, usize>,
}

impl AtomicSpace {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut index = HashMap::with_capacity(cells.len());
        for (pos, cell) in cells.iter().enumerate() {
            if !(cell.mass > 0.0 && cell.mass.is_finite()) {
                return Err(Error::InvalidMass(cell.id, cell.mass));
            }
            if index.insert(cell.id, pos).is_some() {
                return Err(Error::DuplicateCell(cell.id));
            }
        }
        let total_mass = cells.iter().map(|c| c.mass).collect::<NeumaierSum>().value();
        Ok(Self {
            cells,
            total_mass,
            index,
        })
    }

    /// `n` unit-mass cells with ids `1..=n`.
    pub fn counting(n: u64) -> Result<Self> {
        Self::new((1..=n).map(|id| Cell::new(id, 1.0)).collect())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn ids(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().map(|c| c.id)
    }

    pub fn position(&self, id: CellId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownCell(id))
    }

    pub fn mass_of(&self, id: CellId) -> Result<f64> {
        Ok(self.cells[self.position(id)?].mass)
    }

    pub(crate) fn masses(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mass).collect()
    }
}

/// An A-atom: a block of the partition generating the sub-σ-algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    cell_ids: Vec<CellId>,
    positions: Vec<usize>,
    mass: f64,
}

impl Block {
    fn new(index: usize, cell_ids: Vec<CellId>, space: &AtomicSpace) -> Result<Self> {
        if cell_ids.is_empty() {
            return Err(Error::EmptyBlock(index));
        }
        let positions = cell_ids
            .iter()
            .map(|&id| space.position(id))
            .collect::<Result<Vec<_>>>()?;
        let mass = positions
            .iter()
            .map(|&p| space.cells[p].mass)
            .collect::<NeumaierSum>()
            .value();
        Ok(Self {
            cell_ids,
            positions,
            mass,
        })
    }

    pub fn cell_ids(&self) -> &[CellId] {
        &self.cell_ids
    }

    /// Positions of the member cells in the space's cell order.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_ids.is_empty()
    }
}

/// Stand-in for a piece of the non-atomic part `B`, resolved only to whether
/// `E(|u|^·)` and `E(|w|^·)` are supported on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonAtomicPanel {
    pub id: String,
    pub u_support_positive: bool,
    pub w_support_positive: bool,
}

impl NonAtomicPanel {
    pub fn new(id: impl Into<String>, u_support_positive: bool, w_support_positive: bool) -> Self {
        Self {
            id: id.into(),
            u_support_positive,
            w_support_positive,
        }
    }
}

/// A sub-σ-algebra given by a partition of the cells into blocks, plus the
/// panels standing in for the non-atomic part.
#[derive(Debug, Clone)]
pub struct SubAlgebra {
    blocks: Vec<Block>,
    panels: Vec<NonAtomicPanel>,
    block_of: Vec<usize>,
}

impl SubAlgebra {
    pub fn new(
        space: &AtomicSpace,
        blocks: Vec<Vec<CellId>>,
        panels: Vec<NonAtomicPanel>,
    ) -> Result<Self> {
        let blocks = blocks
            .into_iter()
            .enumerate()
            .map(|(i, ids)| Block::new(i, ids, space))
            .collect::<Result<Vec<_>>>()?;
        let mut block_of = vec![usize::MAX; space.len()];
        for (bi, block) in blocks.iter().enumerate() {
            for (&pos, &id) in block.positions.iter().zip(&block.cell_ids) {
                if block_of[pos] != usize::MAX {
                    return Err(Error::BlockOverlap(id));
                }
                block_of[pos] = bi;
            }
        }
        if let Some(pos) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::BlockCoverage(space.cells[pos].id));
        }
        Ok(Self {
            blocks,
            panels,
            block_of,
        })
    }

    /// Every cell is its own block: `E` is the identity.
    pub fn trivial(space: &AtomicSpace) -> Self {
        Self::new(space, space.ids().map(|id| vec![id]).collect(), Vec::new())
            .expect("singleton partition is always valid")
    }

    /// One block holding every cell: `E` is the global average.
    pub fn single_block(space: &AtomicSpace) -> Self {
        Self::new(space, vec![space.ids().collect()], Vec::new())
            .expect("single block partition is always valid")
    }

    pub fn with_panels(mut self, panels: Vec<NonAtomicPanel>) -> Self {
        self.panels = panels;
        self
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn panels(&self) -> &[NonAtomicPanel] {
        &self.panels
    }

    /// Index of the block containing the cell at position `pos`.
    pub fn block_of_position(&self, pos: usize) -> usize {
        self.block_of[pos]
    }

    pub fn block_of(&self, id: CellId, space: &AtomicSpace) -> Result<usize> {
        Ok(self.block_of[space.position(id)?])
    }

    /// Keeps the first `n` blocks (and the panels) on the sub-space they cover.
    pub fn truncate(&self, space: &AtomicSpace, n: usize) -> Result<(AtomicSpace, SubAlgebra)> {
        let kept = &self.blocks[..n.min(self.blocks.len())];
        let cells = kept
            .iter()
            .flat_map(|b| b.positions.iter().map(|&p| space.cells[p]))
            .collect();
        let sub = AtomicSpace::new(cells)?;
        let alg = SubAlgebra::new(
            &sub,
            kept.iter().map(|b| b.cell_ids.clone()).collect(),
            self.panels.clone(),
        )?;
        Ok((sub, alg))
    }
}

/// A measurable function on an atomic space.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Table(BTreeMap<CellId, f64>),
    /// Closed form in the cell index; the index of a cell is its id.
    Expr(Expr),
}

impl Weight {
    pub fn constant(space: &AtomicSpace, c: f64) -> Self {
        Weight::from_values(space, vec![c; space.len()])
    }

    pub fn zero(space: &AtomicSpace) -> Self {
        Weight::constant(space, 0.0)
    }

    pub fn expr(source: &str) -> Result<Self> {
        Ok(Weight::Expr(Expr::parse(source)?))
    }

    /// Table from values given in the space's cell order.
    pub fn from_values(space: &AtomicSpace, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.len(), "one value per cell");
        Weight::Table(space.ids().zip(values).collect())
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, f64)>>(pairs: I) -> Self {
        Weight::Table(pairs.into_iter().map(|(id, v)| (CellId(id), v)).collect())
    }

    pub fn eval(&self, cell: &Cell) -> Result<f64> {
        let value = match self {
            Weight::Table(t) => *t.get(&cell.id).ok_or(Error::MissingValue(cell.id))?,
            Weight::Expr(e) => e.eval(cell.id.0 as f64),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Eval {
                cell: cell.id,
                value,
            })
        }
    }

    pub fn eval_id(&self, id: CellId, space: &AtomicSpace) -> Result<f64> {
        self.eval(&space.cells()[space.position(id)?])
    }

    /// Values in the space's cell order.
    pub fn values(&self, space: &AtomicSpace) -> Result<Vec<f64>> {
        space.cells().iter().map(|c| self.eval(c)).collect()
    }

    /// Pointwise map, tabulated on `space`.
    pub fn map(&self, space: &AtomicSpace, f: impl Fn(f64) -> f64) -> Result<Weight> {
        let values = self.values(space)?;
        Ok(Weight::from_values(space, values.into_iter().map(f).collect()))
    }

    /// Pointwise product, tabulated on `space`.
    pub fn product(&self, other: &Weight, space: &AtomicSpace) -> Result<Weight> {
        let a = self.values(space)?;
        let b = other.values(space)?;
        Ok(Weight::from_values(
            space,
            a.into_iter().zip(b).map(|(x, y)| x * y).collect(),
        ))
    }

    /// `self · χ_set`, tabulated on `space`.
    pub fn restrict(&self, set: &[CellId], space: &AtomicSpace) -> Result<Weight> {
        let keep: HashSet<CellId> = set.iter().copied().collect();
        for id in set {
            space.position(*id)?;
        }
        let values = space
            .cells()
            .iter()
            .map(|c| {
                if keep.contains(&c.id) {
                    self.eval(c)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Weight::from_values(space, values))
    }
}

/// `∫_set f dμ`, summed in the order the ids are given.
pub fn integrate(f: &Weight, set: &[CellId], space: &AtomicSpace) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for &id in set {
        let cell = &space.cells()[space.position(id)?];
        acc.add(f.eval(cell)? * cell.mass);
    }
    Ok(acc.value())
}

/// `‖f‖_p` on the whole space; `p = ∞` gives the maximum of `|f|`.
pub fn lp_norm(f: &Weight, p: f64, space: &AtomicSpace) -> Result<f64> {
    let values = f.values(space)?;
    let masses = space.masses();
    lp_norm_values(&values, &masses, p)
}

pub(crate) fn lp_norm_values(values: &[f64], masses: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} must satisfy p >= 1")));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s = values
        .iter()
        .zip(masses)
        .map(|(v, m)| abs_pow(*v, p) * m)
        .collect::<NeumaierSum>()
        .value();
    Ok(s.powf(1.0 / p))
}

/// `|x|^p` with `0^p = 0` for every `p > 0`.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}
