//! Conditional expectation with respect to a partition sub-σ-algebra.
//!
//! On an atomic sub-σ-algebra `E(f)` is constant on every block `A_i` with
//! value `(1/μ(A_i)) ∫_{A_i} f dμ`.

use std::collections::BTreeSet;

use crate::measure::{AtomicSpace, SubAlgebra, Weight};
use crate::sum::NeumaierSum;
use crate::Result;

/// Blockwise averages of `values` (given in cell order), one per block.
pub(crate) fn block_averages(values: &[f64], alg: &SubAlgebra, space: &AtomicSpace) -> Vec<f64> {
    let cells = space.cells();
    alg.blocks()
        .iter()
        .map(|b| {
            let s = b
                .positions()
                .iter()
                .map(|&p| values[p] * cells[p].mass)
                .collect::<NeumaierSum>()
                .value();
            s / b.mass()
        })
        .collect()
}

/// Spreads one value per block back onto the cells.
pub(crate) fn spread(block_values: &[f64], alg: &SubAlgebra, space: &AtomicSpace) -> Vec<f64> {
    (0..space.len())
        .map(|p| block_values[alg.block_of_position(p)])
        .collect()
}

/// `E(f)` as a table that is constant on each block.
pub fn cond_exp(f: &Weight, alg: &SubAlgebra, space: &AtomicSpace) -> Result<Weight> {
    let values = f.values(space)?;
    let averages = block_averages(&values, alg, space);
    Ok(Weight::from_values(space, spread(&averages, alg, space)))
}

/// Block value of `E(f)` on every block, in block order.
pub fn cond_exp_block_values(f: &Weight, alg: &SubAlgebra, space: &AtomicSpace) -> Result<Vec<f64>> {
    Ok(block_averages(&f.values(space)?, alg, space))
}

/// Indices of the blocks meeting the support of `f`: the smallest union of
/// A-atoms containing `{f ≠ 0}`.
pub fn support_cover(f: &Weight, alg: &SubAlgebra, space: &AtomicSpace) -> Result<BTreeSet<usize>> {
    let values = f.values(space)?;
    Ok(alg
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.positions().iter().any(|&p| values[p] != 0.0))
        .map(|(i, _)| i)
        .collect())
}
