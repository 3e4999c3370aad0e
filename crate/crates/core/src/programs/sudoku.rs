//! Sudoku constraint probabilities over independent cell distributions.
//!
//! Each group (row, column, block) must contain every value exactly once. For
//! group `g` and value `k` the indicators `B_jk = [cell_j == k]` are summed and
//! `Pr[Σ_j B_jk == 1]` is computed. Treating all constraints as independent and
//! multiplying their probabilities gives only an approximation of the
//! probability that the grid is valid.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::random_probs;
use crate::error::{Error, Result};
use crate::inference::{BranchSpec, Comparator, Condition};
use crate::lang::DistSpec;
use crate::ops::LinearOpChain;
use crate::pmf::ProbInt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Row,
    Column,
    Block,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::Row => "row",
            GroupKind::Column => "column",
            GroupKind::Block => "block",
        })
    }
}

/// A `size × size` grid of cell distributions over `1..=size`, row-major.
#[derive(Debug, Clone)]
pub struct Grid {
    size: usize,
    cells: Vec<ProbInt>,
}

impl Grid {
    pub fn new(size: usize, cells: Vec<ProbInt>) -> Result<Self> {
        if size == 0 || cells.len() != size * size {
            return Err(Error::InvalidArgument(format!(
                "a {size}x{size} grid needs {} cells, got {}",
                size * size,
                cells.len()
            )));
        }
        Ok(Self { size, cells })
    }

    /// Every cell drawn independently, full support on `1..=size`.
    pub fn random(size: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..size * size)
            .map(|_| ProbInt::from_probs(&random_probs(&mut rng, size), 1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(size, cells)
    }

    /// Point-mass cells from row-major values.
    pub fn from_values(size: usize, values: &[i64]) -> Result<Self> {
        Self::new(size, values.iter().map(|&v| ProbInt::point(v)).collect())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell(&self, row: usize, col: usize) -> &ProbInt {
        &self.cells[row * self.size + col]
    }

    /// Blocks are only used when the size is a perfect square of at least 9.
    fn block_side(&self) -> Option<usize> {
        let b = (self.size as f64).sqrt().round() as usize;
        (self.size >= 9 && b * b == self.size).then_some(b)
    }

    /// Cell indices of every constraint group.
    pub fn groups(&self) -> Vec<(GroupKind, usize, Vec<usize>)> {
        let g = self.size;
        let mut out = Vec::new();
        for r in 0..g {
            out.push((GroupKind::Row, r, (0..g).map(|c| r * g + c).collect()));
        }
        for c in 0..g {
            out.push((GroupKind::Column, c, (0..g).map(|r| r * g + c).collect()));
        }
        if let Some(b) = self.block_side() {
            for blk in 0..g {
                let (r0, c0) = (blk / b * b, blk % b * b);
                let cells = (0..g).map(|i| (r0 + i / b) * g + c0 + i % b).collect();
                out.push((GroupKind::Block, blk, cells));
            }
        }
        out
    }
}

/// `[x == k] ∈ {0, 1}` carrying the mass of `x`.
fn indicator(x: &ProbInt, k: i64) -> Result<ProbInt> {
    x.branch(&BranchSpec {
        condition: Condition::compare(Comparator::Eq, k)?,
        true_chain: LinearOpChain::new().scale(0).shift(1),
        false_chain: LinearOpChain::new().scale(0),
    })
}

/// `Pr[exactly one cell equals k]`.
pub fn exactly_one_prob(cells: &[&ProbInt], k: i64) -> Result<f64> {
    let mut sum: Option<ProbInt> = None;
    for c in cells {
        let b = indicator(c, k)?;
        sum = Some(match sum {
            Some(s) => s.add(&b)?,
            None => b,
        });
    }
    sum.ok_or(Error::EmptyVector)?.prob(Comparator::Eq, 1)
}

/// Program text for the same query, for cross-checking against enumeration.
pub fn exactly_one_source(cells: &[&ProbInt], k: i64) -> String {
    let mut s = String::new();
    for (j, c) in cells.iter().enumerate() {
        let entries = c.iter_masses().filter(|&(_, m)| m > 0.0).collect();
        s += &format!("pint C{j} ~ {};\n", DistSpec::Pmf(entries));
        s += &format!("let B{j} = if (C{j} == {k}) then 1 else 0;\n");
    }
    let terms: Vec<String> = (0..cells.len()).map(|j| format!("B{j}")).collect();
    s += &format!("query Pr[{} == 1];\n", terms.join(" + "));
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintProb {
    pub kind: GroupKind,
    pub index: usize,
    pub value: i64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SudokuReport {
    pub constraints: Vec<ConstraintProb>,
    /// Sum of the log constraint probabilities.
    pub log_prob: f64,
}

/// Every group/value constraint probability of `grid`.
pub fn constraint_probs(grid: &Grid) -> Result<SudokuReport> {
    let mut constraints = Vec::new();
    let mut log_prob = 0.0;
    for (kind, index, cells) in grid.groups() {
        let refs: Vec<&ProbInt> = cells.iter().map(|&i| &grid.cells[i]).collect();
        for value in 1..=grid.size as i64 {
            let prob = exactly_one_prob(&refs, value)?;
            log_prob += prob.ln();
            constraints.push(ConstraintProb { kind, index, value, prob });
        }
    }
    Ok(SudokuReport { constraints, log_prob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::oracle::enumerate_program;

    const VALID4: [i64; 16] = [1, 2, 3, 4, 3, 4, 1, 2, 2, 1, 4, 3, 4, 3, 2, 1];

    #[test]
    fn valid_grid_is_certain() {
        let r = constraint_probs(&Grid::from_values(4, &VALID4).unwrap()).unwrap();
        assert_eq!(r.constraints.len(), 32);
        assert!(r.constraints.iter().all(|c| c.prob == 1.0));
        assert_eq!(r.log_prob, 0.0);
    }

    #[test]
    fn repeated_value_is_impossible() {
        let mut v = VALID4;
        v[1] = 1; // first row now holds 1 twice and no 2
        let r = constraint_probs(&Grid::from_values(4, &v).unwrap()).unwrap();
        let row0: Vec<f64> = r
            .constraints
            .iter()
            .filter(|c| c.kind == GroupKind::Row && c.index == 0)
            .map(|c| c.prob)
            .collect();
        assert_eq!(row0, vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(r.log_prob, f64::NEG_INFINITY);
    }

    #[test]
    fn random_grid_matches_enumeration() {
        let grid = Grid::random(4, 42).unwrap();
        let report = constraint_probs(&grid).unwrap();
        for (c, (kind, index, cells)) in report
            .constraints
            .chunks(4)
            .zip(grid.groups())
        {
            let refs: Vec<&ProbInt> = cells.iter().map(|&i| &grid.cells[i]).collect();
            for cp in c {
                assert_eq!((cp.kind, cp.index), (kind, index));
                let p = parse(&exactly_one_source(&refs, cp.value)).unwrap();
                let oracle = enumerate_program(&p).unwrap()[0].scalar().unwrap();
                assert!((cp.prob - oracle).abs() < 1e-9, "{cp:?} vs {oracle}");
            }
        }
    }

    #[test]
    fn nine_by_nine_has_blocks() {
        let grid = Grid::random(9, 1).unwrap();
        let groups = grid.groups();
        assert_eq!(groups.len(), 27);
        assert_eq!(groups[18].2, vec![0, 1, 2, 9, 10, 11, 18, 19, 20]);
        assert_eq!(groups[26].2, vec![60, 61, 62, 69, 70, 71, 78, 79, 80]);
        let r = constraint_probs(&grid).unwrap();
        assert_eq!(r.constraints.len(), 243);
        assert!(r.constraints.iter().all(|c| (0.0..=1.0 + 1e-12).contains(&c.prob)));
    }
}
