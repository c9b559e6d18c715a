mod common;

use common::*;
use fdastream_core::{
    chain_moments, generate_candidates, match_candidates, mean_substats, pilot_candidates,
    CandidateBank, ChainLink, CountLedger, Design, GridSpec, Kernel, LocalStats, MatchPlan,
    PilotKind,
};
use proptest::prelude::*;

#[test]
fn pilot_candidate_examples() {
    let c = pilot_candidates(0.1, 2, PilotKind::NuMu);
    assert!((c[1] - 0.08706).abs() < 1e-5);
    let c = pilot_candidates(0.2, 3, PilotKind::ThetaGamma);
    assert!((c[1] - 0.2 * (2.0f64 / 3.0).powf(0.125)).abs() < 1e-12);
    assert!((c[2] - 0.2 * (1.0f64 / 3.0).powf(0.125)).abs() < 1e-12);
}

#[test]
fn tie_goes_to_the_smaller_index() {
    let plan = match_candidates(&[0.5, 0.5], &[0.75, 0.25]);
    assert_eq!(plan.sources, vec![0, 0]);
}

/// Reference bank that records which bandwidth every block was summed at
/// for each slot, then re-sums the raw blocks along those chains.
#[test]
fn absorb_matches_chain_materialization() {
    let mut r = rng(11);
    let grid = GridSpec::new(0.0, 1.0, 26).unwrap();
    let k = Kernel::epanechnikov();
    let blocks: Vec<_> = (1..=3)
        .map(|i| random_block(&mut r, i, 6 + 3 * i as usize))
        .collect();
    let hs = [0.3, 0.26, 0.21];
    let l = 3;
    let e = 0.2;

    let mut bank = CandidateBank::new(Design::Linear1D, grid.len(), l, e).unwrap();
    let mut ledger = CountLedger::new();
    let mut chains: Vec<Vec<f64>> = vec![Vec::new(); l];
    let mut centroids = vec![0.0; l];
    for (b, &h) in blocks.iter().zip(&hs) {
        ledger.update(b);
        bank.absorb(h, ledger.weight(1), ledger.last(1), |eta| {
            mean_substats(b, eta, &grid, &k)
        })
        .unwrap();

        let etas: Vec<f64> = (0..l)
            .map(|i| ((l - i) as f64 / l as f64).powf(e) * h)
            .collect();
        let first = chains[0].is_empty();
        let omega = if first {
            1.0
        } else {
            ledger.last(1) / ledger.total(1)
        };
        let mut next_chains = Vec::new();
        let mut next_centroids = Vec::new();
        for &eta in &etas {
            let src = if first {
                next_chains.len()
            } else {
                let mut best = 0;
                for i in 1..l {
                    if (eta - centroids[i]).abs() < (eta - centroids[best]).abs() {
                        best = i;
                    }
                }
                best
            };
            let mut c = chains[src].clone();
            c.push(eta);
            next_chains.push(c);
            next_centroids.push((1.0 - omega) * centroids[src] + omega * eta);
        }
        chains = next_chains;
        centroids = next_centroids;
    }

    for (slot, chain) in bank.slots().iter().zip(&chains) {
        let mut want = LocalStats::zeros(Design::Linear1D, &grid);
        for (b, &eta) in blocks.iter().zip(chain) {
            want.add_assign(&mean_substats(b, eta, &grid, &k).unwrap())
                .unwrap();
        }
        assert!(slot.stats.max_abs_diff(&want) <= 1e-12 * want.max_abs());
    }
    for (a, b) in bank.centroids().iter().zip(&centroids) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn single_slot_telescopes() {
    let mut r = rng(12);
    let grid = GridSpec::new(0.0, 1.0, 21).unwrap();
    let k = Kernel::epanechnikov();
    let mut bank = CandidateBank::new(Design::Linear1D, grid.len(), 1, 0.2).unwrap();
    let mut want = LocalStats::zeros(Design::Linear1D, &grid);
    for i in 1..=5 {
        let b = random_block(&mut r, i, 5);
        let plan = bank
            .absorb(0.25, 0.5, 1.0, |h| mean_substats(&b, h, &grid, &k))
            .unwrap();
        assert_eq!(plan, MatchPlan::identity(1));
        want.add_assign(&mean_substats(&b, 0.25, &grid, &k).unwrap())
            .unwrap();
    }
    assert!(bank.leading().max_abs_diff(&want) <= 1e-12 * want.max_abs());
    assert!((bank.centroids()[0] - 0.25).abs() < 1e-15);
}

#[test]
fn chain_tracking_records_leading_history() {
    let mut bank = CandidateBank::new(Design::Linear1D, 3, 2, 0.2).unwrap();
    bank.track_chain();
    let zero = |_| {
        Ok(LocalStats::zeros(
            Design::Linear1D,
            &GridSpec::new(0.0, 1.0, 3).unwrap(),
        ))
    };
    bank.absorb(0.4, 1.0, 10.0, zero).unwrap();
    bank.absorb(0.3, 0.5, 10.0, zero).unwrap();
    let lead = bank.chain().unwrap().leading();
    assert_eq!(lead.len(), 2);
    assert_eq!(lead[1].bandwidth, 0.3);
    // Slot 0 at block 2 is fed by the old slot whose centroid is nearest 0.3.
    assert!((lead[0].bandwidth - 0.4 * 0.5f64.powf(0.2)).abs() < 1e-15);
}

#[test]
fn chain_moments_weighted_by_counts() {
    let chain = [
        ChainLink {
            block: 1,
            bandwidth: 0.5,
            count: 1.0,
        },
        ChainLink {
            block: 2,
            bandwidth: 0.25,
            count: 3.0,
        },
    ];
    let m = chain_moments(&chain);
    assert!((m.get(0) - 1.0).abs() < 1e-15);
    assert!((m.get(1) - (0.25 * 0.5 + 0.75 * 0.25)).abs() < 1e-15);
    assert!((m.get(-1) - (0.25 * 2.0 + 0.75 * 4.0)).abs() < 1e-12);
    assert!((m.get(2) - (0.25 * 0.25 + 0.75 * 0.0625)).abs() < 1e-15);
    assert!((m.get(-2) - (0.25 * 4.0 + 0.75 * 16.0)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn candidates_strictly_decrease(h in 1e-3f64..10.0, l in 1usize..30, d in 1usize..=2) {
        let c = generate_candidates(h, l, d);
        prop_assert_eq!(c.len(), l);
        prop_assert_eq!(c[0], h);
        for w in c.windows(2) {
            prop_assert!(w[1] < w[0] && w[1] > 0.0);
        }
    }

    #[test]
    fn matches_are_nearest_with_low_index_ties(
        etas in prop::collection::vec(0.01f64..1.0, 1..8),
        cents in prop::collection::vec(0.01f64..1.0, 1..8),
    ) {
        let cents: Vec<f64> = cents.into_iter().take(etas.len()).collect();
        prop_assume!(cents.len() == etas.len());
        let plan = match_candidates(&etas, &cents);
        for (eta, &src) in etas.iter().zip(&plan.sources) {
            let d = (eta - cents[src]).abs();
            for (i, c) in cents.iter().enumerate() {
                prop_assert!((eta - c).abs() >= d);
                if i < src {
                    prop_assert!((eta - c).abs() > d);
                }
            }
        }
    }

    #[test]
    fn centroids_stay_in_candidate_hull(
        hs in prop::collection::vec(0.05f64..0.5, 1..12),
        counts in prop::collection::vec(1.0f64..50.0, 12),
        l in 1usize..6,
    ) {
        let grid = GridSpec::new(0.0, 1.0, 3).unwrap();
        let mut bank = CandidateBank::new(Design::Linear1D, 3, l, 0.2).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut total = 0.0;
        for (h, s) in hs.iter().zip(&counts) {
            total += s;
            for c in bank.candidates(*h) {
                lo = lo.min(c);
                hi = hi.max(c);
            }
            bank.absorb(*h, s / total, *s, |_| Ok(LocalStats::zeros(Design::Linear1D, &grid))).unwrap();
            for c in bank.centroids() {
                prop_assert!(c >= lo * (1.0 - 1e-12) && c <= hi * (1.0 + 1e-12));
            }
        }
    }
}
