use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem size: an `rows × cols` unknown of rank at most `rank` with at most
/// `sparsity` nonzero rows, observed through `measurements` linear functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemDims {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub sparsity: usize,
    pub measurements: usize,
}

impl ProblemDims {
    pub fn new(
        rows: usize,
        cols: usize,
        rank: usize,
        sparsity: usize,
        measurements: usize,
    ) -> Result<Self> {
        let dims = ProblemDims {
            rows,
            cols,
            rank,
            sparsity,
            measurements,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let ProblemDims {
            rows: m_rows,
            cols,
            rank,
            sparsity,
            measurements,
        } = *self;
        if rank < 1 {
            return Err(Error::Parameter("rank k must be at least 1".into()));
        }
        if rank >= sparsity {
            return Err(Error::Parameter(format!(
                "rank k = {rank} must be strictly smaller than sparsity s = {sparsity} (k < s), \
                 otherwise the low-rank constraint is void"
            )));
        }
        if sparsity > m_rows {
            return Err(Error::Parameter(format!(
                "sparsity s = {sparsity} exceeds row count M = {m_rows}"
            )));
        }
        if rank > cols {
            return Err(Error::Parameter(format!(
                "rank k = {rank} exceeds column count N = {cols}"
            )));
        }
        if measurements < 1 {
            return Err(Error::Parameter("measurement count m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free set of 0-based row indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet(indices)
    }

    pub fn full(rows: usize) -> Self {
        SupportSet((0..rows).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.0.binary_search(&row).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SupportSet::new(iter.into_iter().collect())
    }
}
