//! Running observation counts.

use crate::block::Block;

/// Falling-factorial pair counts `s_j = Σ_i m_i (m_i − 1) ⋯ (m_i − j + 1)`
/// for `j = 1..4`.
pub fn falling_counts(block: &Block) -> [f64; 4] {
    let mut s = [0.0; 4];
    for subj in &block.subjects {
        let m = subj.len() as f64;
        let mut f = 1.0;
        for (j, sj) in s.iter_mut().enumerate() {
            f *= m - j as f64;
            if f <= 0.0 {
                break;
            }
            *sj += f;
        }
    }
    s
}

/// Running totals `S_1..S_4` and subject count `N`, plus the counts of the
/// most recent block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountLedger {
    pub totals: [f64; 4],
    pub n_subjects: u64,
    pub n_blocks: u64,
    pub last: [f64; 4],
    pub last_subjects: u64,
}

impl CountLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, block: &Block) {
        let s = falling_counts(block);
        for (t, v) in self.totals.iter_mut().zip(&s) {
            *t += v;
        }
        self.last = s;
        self.last_subjects = block.n_subjects() as u64;
        self.n_subjects += self.last_subjects;
        self.n_blocks += 1;
    }

    /// `S_j` for `j` in `1..=4`.
    pub fn total(&self, j: usize) -> f64 {
        self.totals[j - 1]
    }

    /// `s_j` of the latest block.
    pub fn last(&self, j: usize) -> f64 {
        self.last[j - 1]
    }

    /// Weight of the latest block in a dimension-`d` bank: `s_d / S_d`.
    pub fn weight(&self, d: usize) -> f64 {
        let total = self.total(d);
        if total > 0.0 {
            self.last(d) / total
        } else {
            0.0
        }
    }

    /// Mean number of measurements per subject.
    pub fn mean_measurements(&self) -> f64 {
        if self.n_subjects == 0 {
            0.0
        } else {
            self.total(1) / self.n_subjects as f64
        }
    }

    /// Mean number of ordered pairs per subject.
    pub fn mean_pairs(&self) -> f64 {
        if self.n_subjects == 0 {
            0.0
        } else {
            self.total(2) / self.n_subjects as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Subject;
    use alloc::vec;
    use alloc::vec::Vec;

    fn block(ms: &[usize]) -> Block {
        let subjects: Vec<Subject> = ms
            .iter()
            .map(|&m| {
                let t: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();
                Subject::new(t, vec![0.0; m]).unwrap()
            })
            .collect();
        Block::new(0, subjects).unwrap()
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_counts(&block(&[2, 3, 1])), [6.0, 8.0, 6.0, 0.0]);
        assert_eq!(falling_counts(&block(&[1])), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(falling_counts(&block(&[5])), [5.0, 20.0, 60.0, 120.0]);
    }

    #[test]
    fn ledger_accumulates() {
        let mut c = CountLedger::new();
        c.update(&block(&[2, 3, 1]));
        c.update(&block(&[4]));
        assert_eq!(c.totals, [10.0, 20.0, 30.0, 24.0]);
        assert_eq!(c.last, [4.0, 12.0, 24.0, 24.0]);
        assert_eq!(c.n_subjects, 4);
        assert_eq!(c.n_blocks, 2);
        assert!((c.weight(2) - 0.6).abs() < 1e-15);
        assert!((c.mean_measurements() - 2.5).abs() < 1e-15);
    }
}
