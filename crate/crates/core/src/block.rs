//! Streaming units: a block is a batch of subjects, each with paired
//! `(time, value)` measurements.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::FdaError;
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Subject {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> crate::Result<Self> {
        if times.len() != values.len() {
            return Err(FdaError::InvalidBlock(format!(
                "subject has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(FdaError::InvalidBlock(
                "subject without measurements".into(),
            ));
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(FdaError::InvalidBlock("non-finite measurement".into()));
        }
        Ok(Subject { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.times.len()).collect();
        idx.sort_by(|&a, &b| {
            self.times[a]
                .total_cmp(&self.times[b])
                .then(self.values[a].total_cmp(&self.values[b]))
        });
        self.times = idx.iter().map(|&i| self.times[i]).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    fn cmp_canonical(&self, other: &Subject) -> Ordering {
        for ((ta, ya), (tb, yb)) in self
            .times
            .iter()
            .zip(&self.values)
            .zip(other.times.iter().zip(&other.values))
        {
            let c = ta.total_cmp(tb).then(ya.total_cmp(yb));
            if c != Ordering::Equal {
                return c;
            }
        }
        self.len().cmp(&other.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub block_id: u64,
    pub subjects: Vec<Subject>,
}

impl Block {
    pub fn new(block_id: u64, subjects: Vec<Subject>) -> crate::Result<Self> {
        if subjects.is_empty() {
            return Err(FdaError::InvalidBlock(format!(
                "block {block_id} has no subjects"
            )));
        }
        for s in &subjects {
            if s.times.len() != s.values.len() || s.times.is_empty() {
                return Err(FdaError::InvalidBlock(format!(
                    "block {block_id} has a malformed subject"
                )));
            }
        }
        Ok(Block { block_id, subjects })
    }

    pub fn check_domain(&self, grid: &GridSpec) -> crate::Result<()> {
        for s in &self.subjects {
            for &t in &s.times {
                if !grid.contains(t) {
                    return Err(FdaError::Domain {
                        time: t,
                        lo: grid.lo(),
                        hi: grid.hi(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Sorts measurements within each subject and subjects within the block
    /// so that every downstream sum runs in a fixed order.
    pub fn canonicalize(&mut self) {
        for s in &mut self.subjects {
            s.sort();
        }
        self.subjects.sort_by(|a, b| a.cmp_canonical(b));
    }

    pub fn canonical(&self) -> Block {
        let mut b = self.clone();
        b.canonicalize();
        b
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_measurements(&self) -> usize {
        self.subjects.iter().map(Subject::len).sum()
    }

    /// Concatenates blocks into a single pooled block (canonicalized).
    pub fn pooled<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> crate::Result<Block> {
        let subjects: Vec<Subject> = blocks
            .into_iter()
            .flat_map(|b| b.subjects.iter().cloned())
            .collect();
        let mut b = Block::new(0, subjects)?;
        b.canonicalize();
        Ok(b)
    }

    /// Values with the same per-subject layout, filled by `f(time, value)`.
    pub fn map_values(&self, mut f: impl FnMut(f64, f64) -> f64) -> Vec<Vec<f64>> {
        self.subjects
            .iter()
            .map(|s| {
                s.times
                    .iter()
                    .zip(&s.values)
                    .map(|(&t, &y)| f(t, y))
                    .collect()
            })
            .collect()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.subjects.iter().map(|s| s.values.clone()).collect()
    }

    pub(crate) fn check_aligned(&self, responses: &[Vec<f64>]) -> crate::Result<()> {
        if responses.len() != self.subjects.len() {
            return Err(FdaError::ShapeMismatch {
                what: "responses (subjects)",
                expected: self.subjects.len(),
                found: responses.len(),
            });
        }
        for (s, r) in self.subjects.iter().zip(responses) {
            if s.len() != r.len() {
                return Err(FdaError::ShapeMismatch {
                    what: "responses (measurements)",
                    expected: s.len(),
                    found: r.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert!(Subject::new(vec![0.1, 0.2], vec![1.0]).is_err());
        assert!(Subject::new(vec![], vec![]).is_err());
        assert!(Block::new(1, vec![]).is_err());
        let b = Block::new(
            1,
            vec![Subject::new(vec![0.2, 1.4], vec![1.0, 2.0]).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            b.check_domain(&GridSpec::unit_curve()),
            Err(FdaError::Domain { .. })
        ));
    }

    #[test]
    fn canonical_order_is_permutation_invariant() {
        let a = Subject::new(vec![0.7, 0.1, 0.4], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Subject::new(vec![0.3], vec![5.0]).unwrap();
        let c = Subject::new(vec![0.1, 0.9], vec![-1.0, 0.5]).unwrap();
        let b1 = Block::new(3, vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let mut a_rev = a.clone();
        a_rev.times.reverse();
        a_rev.values.reverse();
        let b2 = Block::new(3, vec![c, a_rev, b]).unwrap();
        assert_eq!(b1.canonical(), b2.canonical());
        let canon = b1.canonical();
        assert_eq!(canon.subjects[1].times, vec![0.1, 0.4, 0.7]);
        assert_eq!(canon.subjects[1].values, vec![2.0, 3.0, 1.0]);
    }
}
