//! Candidate bandwidth banks holding pseudo-sufficient statistics.
//!
//! Each slot stores the running sum of sub-statistics computed at a chain of
//! slightly different bandwidths, plus the count-weighted centroid of that
//! chain. A new block generates `L` decreasing candidates from the current
//! bandwidth, matches each to the nearest old centroid and adds its fresh
//! sub-statistics onto that slot.

use alloc::vec::Vec;

use crate::error::{check_bandwidth, FdaError};
use crate::smoother::{Design, LocalStats};

/// `η_l = ((L − l + 1) / L)^exponent · h` for `l = 1..=L`.
pub fn candidates(h: f64, count: usize, exponent: f64) -> Vec<f64> {
    let n = count as f64;
    (0..count)
        .map(|l| {
            if l == 0 {
                h
            } else {
                libm::pow((n - l as f64) / n, exponent) * h
            }
        })
        .collect()
}

/// Candidates for the mean (`d = 1`) or covariance (`d = 2`) smoother.
pub fn generate_candidates(h: f64, count: usize, d: usize) -> Vec<f64> {
    candidates(h, count, 1.0 / (d as f64 + 4.0))
}

/// Source slot (0-based) for each new slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPlan {
    pub sources: Vec<usize>,
}

impl MatchPlan {
    pub fn identity(count: usize) -> Self {
        MatchPlan {
            sources: (0..count).collect(),
        }
    }
}

/// Nearest-centroid matching; ties go to the smaller index.
pub fn match_candidates(etas: &[f64], centroids: &[f64]) -> MatchPlan {
    let sources = etas
        .iter()
        .map(|&eta| {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (i, &phi) in centroids.iter().enumerate() {
                let dist = (eta - phi).abs();
                if dist < best_dist {
                    best = i;
                    best_dist = dist;
                }
            }
            best
        })
        .collect();
    MatchPlan { sources }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub centroid: f64,
    pub stats: LocalStats,
}

/// One absorbed block in a slot's history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLink {
    pub block: u64,
    pub bandwidth: f64,
    /// Count `s_{k,d}` of the block.
    pub count: f64,
}

/// The realized bandwidth history of every slot. Only kept on request; it
/// grows with the number of blocks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoBandwidthChain {
    pub slots: Vec<Vec<ChainLink>>,
}

impl PseudoBandwidthChain {
    /// History of the leading slot, which backs the current estimate.
    pub fn leading(&self) -> &[ChainLink] {
        self.slots.first().map(|s| s.as_slice()).unwrap_or(&[])
    }
}

/// Weighted power sums `ρ_j = Σ_k ω_k η_k^j` for `j ∈ {−2, −1, 0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainMoments {
    pub rho: [f64; 5],
}

impl ChainMoments {
    pub fn get(&self, j: i32) -> f64 {
        assert!((-2..=2).contains(&j), "moment order out of range");
        self.rho[(j + 2) as usize]
    }
}

/// Moments of a chain with weights proportional to the block counts.
pub fn chain_moments(chain: &[ChainLink]) -> ChainMoments {
    let total: f64 = chain.iter().map(|c| c.count).sum();
    let mut rho = [0.0; 5];
    if total <= 0.0 {
        return ChainMoments { rho };
    }
    for link in chain {
        let w = link.count / total;
        for (k, r) in rho.iter_mut().enumerate() {
            *r += w * libm::pow(link.bandwidth, k as f64 - 2.0);
        }
    }
    ChainMoments { rho }
}

/// `L` slots of pseudo-sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBank {
    design: Design,
    axis_points: usize,
    exponent: f64,
    slots: Vec<Slot>,
    blocks: u64,
    chain: Option<PseudoBandwidthChain>,
}

impl CandidateBank {
    /// Empty bank with `count` slots whose candidates shrink with the given
    /// exponent.
    pub fn new(
        design: Design,
        axis_points: usize,
        count: usize,
        exponent: f64,
    ) -> crate::Result<Self> {
        if count == 0 {
            return Err(FdaError::InvalidConfig(
                "bank needs at least one slot".into(),
            ));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(FdaError::InvalidConfig(
                "candidate exponent must be positive".into(),
            ));
        }
        let slots = (0..count)
            .map(|_| Slot {
                centroid: 0.0,
                stats: LocalStats::zeros_n(design, axis_points),
            })
            .collect();
        Ok(CandidateBank {
            design,
            axis_points,
            exponent,
            slots,
            blocks: 0,
            chain: None,
        })
    }

    pub(crate) fn from_parts(
        design: Design,
        axis_points: usize,
        exponent: f64,
        slots: Vec<Slot>,
        blocks: u64,
    ) -> crate::Result<Self> {
        if slots.is_empty() {
            return Err(FdaError::InvalidConfig(
                "bank needs at least one slot".into(),
            ));
        }
        Ok(CandidateBank {
            design,
            axis_points,
            exponent,
            slots,
            blocks,
            chain: None,
        })
    }

    /// Starts recording the bandwidth chain of every slot.
    pub fn track_chain(&mut self) {
        if self.chain.is_none() {
            self.chain = Some(PseudoBandwidthChain {
                slots: alloc::vec![Vec::new(); self.slots.len()],
            });
        }
    }

    pub fn chain(&self) -> Option<&PseudoBandwidthChain> {
        self.chain.as_ref()
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn axis_points(&self) -> usize {
        self.axis_points
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks == 0
    }

    /// Blocks absorbed so far.
    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn centroids(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.centroid).collect()
    }

    /// Statistics of the leading slot.
    pub fn leading(&self) -> &LocalStats {
        &self.slots[0].stats
    }

    /// Candidates generated from `h` for this bank.
    pub fn candidates(&self, h: f64) -> Vec<f64> {
        candidates(h, self.slots.len(), self.exponent)
    }

    /// Absorbs one block. `weight` is the block's share `s_k / S_k` of the
    /// running count and `substats` computes the block's sub-statistics at a
    /// given bandwidth. `count` is only used by the chain tracker.
    pub fn absorb(
        &mut self,
        h: f64,
        weight: f64,
        count: f64,
        mut substats: impl FnMut(f64) -> crate::Result<LocalStats>,
    ) -> crate::Result<MatchPlan> {
        check_bandwidth(h)?;
        let etas = self.candidates(h);
        let plan = if self.blocks == 0 {
            MatchPlan::identity(etas.len())
        } else {
            match_candidates(&etas, &self.centroids())
        };
        let omega = if self.blocks == 0 { 1.0 } else { weight };
        let mut next = Vec::with_capacity(etas.len());
        for (&eta, &src) in etas.iter().zip(&plan.sources) {
            let fresh = substats(eta)?;
            if fresh.design() != self.design || fresh.axis_points() != self.axis_points {
                return Err(FdaError::ShapeMismatch {
                    what: "bank statistics",
                    expected: self.axis_points,
                    found: fresh.axis_points(),
                });
            }
            let old = &self.slots[src];
            let mut stats = old.stats.clone();
            stats.add_assign(&fresh)?;
            next.push(Slot {
                centroid: (1.0 - omega) * old.centroid + omega * eta,
                stats,
            });
        }
        if let Some(chain) = &mut self.chain {
            let block = self.blocks + 1;
            chain.slots = etas
                .iter()
                .zip(&plan.sources)
                .map(|(&eta, &src)| {
                    let mut c = chain.slots[src].clone();
                    c.push(ChainLink {
                        block,
                        bandwidth: eta,
                        count,
                    });
                    c
                })
                .collect();
        }
        self.slots = next;
        self.blocks += 1;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn candidate_values() {
        let c = generate_candidates(0.4, 5, 1);
        let want = [0.4, 0.38254, 0.36115, 0.33302, 0.28991];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert_eq!(generate_candidates(0.7, 1, 2), vec![0.7]);
        let c = generate_candidates(0.3, 3, 2);
        // Direct evaluation of the closed form.
        for (a, b) in c.iter().zip([0.3, 0.280397, 0.249805]) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn matching() {
        let plan = match_candidates(&[0.372], &[0.40, 0.38, 0.36, 0.33, 0.29]);
        assert_eq!(plan.sources, vec![1]);
        let plan = match_candidates(&[0.5], &[0.25, 0.75]);
        assert_eq!(plan.sources, vec![0]);
    }

    #[test]
    fn first_block_is_identity() {
        let mut bank = CandidateBank::new(Design::Linear1D, 3, 4, 0.2).unwrap();
        let plan = bank
            .absorb(0.3, 0.25, 1.0, |_| {
                Ok(LocalStats::zeros_n(Design::Linear1D, 3))
            })
            .unwrap();
        assert_eq!(plan, MatchPlan::identity(4));
        assert_eq!(bank.centroids(), bank.candidates(0.3));
    }

    #[test]
    fn chain_moment_values() {
        let chain: Vec<ChainLink> = (0..4)
            .map(|k| ChainLink {
                block: k,
                bandwidth: 0.2,
                count: 1.0 + k as f64,
            })
            .collect();
        let m = chain_moments(&chain);
        assert!((m.get(-1) - 5.0).abs() < 1e-12);
        assert!((m.get(0) - 1.0).abs() < 1e-12);
        assert!((m.get(2) - 0.04).abs() < 1e-12);
    }
}
