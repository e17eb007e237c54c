//! Independent oracles for the exact formulas and the walk statistics.

mod common;

use cutpoints::experiments::mc_hit_before;
use cutpoints::kernel::Kernel;
use cutpoints::rng::{stream_rng, StreamKey};
use cutpoints::stack_machine::eulerian_check;
use cutpoints::sum::NeumaierSum;
use cutpoints::trajectory::{detect_strong_cutpoints, is_cut_time, simulate, simulate_with, SimulateOptions};
use cutpoints::tree_walk::{simulate_tree_walk, walk_statistics, Tree};
use cutpoints::{ChainLaw, ResistanceProfile, State, StopRule, TailTable};
use rand::Rng as _;
use rayon::prelude::*;

/// Sum of `1/(k ln^2 k)` over `lo..hi`, in parallel chunks.
fn brute_canonical_sum(lo: u64, hi: u64) -> f64 {
    const CHUNK: u64 = 1 << 22;
    let parts: Vec<f64> = (lo..hi)
        .step_by(CHUNK as usize)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|a| {
            let b = (a + CHUNK).min(hi);
            let mut acc = NeumaierSum::new();
            // backwards so small terms accumulate first
            for k in (a..b).rev() {
                let x = k as f64;
                let l = x.ln();
                acc.add(1.0 / (x * l * l));
            }
            acc.value()
        })
        .collect();
    parts.into_iter().rev().collect::<NeumaierSum>().value()
}

#[test]
fn tail_enclosure_contains_long_summation() {
    // 10^9 direct terms, then the remainder bracketed by integrals:
    // int_{M+1}^inf <= sum_{k>M} <= int_M^inf, with int_a^inf = 1/ln a.
    let big_m: u64 = 1_000_000_000;
    let head = brute_canonical_sum(2, big_m + 1);
    let lo = head + 1.0 / ((big_m + 1) as f64).ln();
    let hi = head + 1.0 / (big_m as f64).ln();
    let table = TailTable::new(&ResistanceProfile::canonical(2.0).unwrap(), 16).unwrap();
    let t2 = table.tail(2).unwrap();
    let mid = 0.5 * (lo + hi);
    // the long-sum bracket is itself ~1e-11 wide; allow for its rounding
    let slack = 1e-12 * mid;
    assert!(t2.lo <= hi + slack && lo - slack <= t2.hi, "table [{}, {}] vs brute [{lo}, {hi}]", t2.lo, t2.hi);
    assert!(t2.contains(mid) || (t2.mid() - mid).abs() <= slack);
}

#[test]
fn ruin_formula_against_monte_carlo() {
    let p = ResistanceProfile::explicit(vec![1.0, 2.0, 4.0, 8.0]).unwrap();
    let (law, table) = (ChainLaw::new(&p), TailTable::new(&p, 4).unwrap());
    assert!((table.hit_before(3, 5).unwrap() - 0.2).abs() < 1e-15);
    let r = mc_hit_before(&law, &table, 3, 5, 1_000_000, 17, None).unwrap();
    assert!(r.within(4.0), "{r:?}");
}

#[test]
fn naive_censoring_is_badly_biased() {
    let table = TailTable::new(&ResistanceProfile::canonical(2.0).unwrap(), 1 << 14).unwrap();
    for m in [6u32, 8, 10] {
        let back = table.return_probability(1 << (m + 3), 1 << m).unwrap().value;
        let approx = m as f64 / (m as f64 + 3.0);
        assert!((back - approx).abs() < 0.05, "m={m}: {back} vs {approx}");
        assert!(back > 0.6);
    }
}

#[test]
fn star_first_step_is_uniform() {
    let tree = Tree::new(&[(1, 2, 1.0), (1, 3, 1.0), (1, 4, 1.0)], None).unwrap();
    let reps = 100_000u64;
    let mut counts = [0u64; 3];
    for i in 0..reps {
        let t = simulate_tree_walk(&tree, 1, 4, StreamKey::new(8, i), Some(1)).unwrap();
        counts[(t.states[1] - 2) as usize] += 1;
    }
    let p = 1.0 / 3.0;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    for c in counts {
        assert!((c as f64 / reps as f64 - p).abs() <= 4.0 * se, "{counts:?}");
    }
}

#[test]
fn simple_tree_walks() {
    let path = Tree::path(3).unwrap();
    for i in 0..100 {
        let t = simulate_tree_walk(&path, 1, 3, StreamKey::new(1, i), None).unwrap();
        assert_eq!(&t.states[..2], &[1, 2]);
    }
    let pair = Tree::path(2).unwrap();
    let t = simulate_tree_walk(&pair, 1, 2, StreamKey::new(1, 0), None).unwrap();
    assert_eq!(t.states, vec![1, 2]);
}

#[test]
fn walk_statistics_balance_on_random_walks() {
    for i in 0..10_000u64 {
        let mut rng = stream_rng(31, i);
        let n = rng.random_range(2..=30);
        let tree = common::random_tree(n, &mut rng);
        let (x0, y) = common::distinct_pair(&tree, &mut rng);
        let traj = simulate_tree_walk(&tree, x0, y, StreamKey::new(32, i), None).unwrap();
        let st = walk_statistics(&traj);
        st.check_invariants().unwrap();
        assert!(eulerian_check(&st.transitions, x0, y));
        assert_eq!(st.loop_erasure.first(), Some(&x0));
    }
}

#[test]
fn loop_erasure_on_the_line_is_the_ladder() {
    let law = ChainLaw::new(&ResistanceProfile::canonical(2.0).unwrap());
    for i in 0..200 {
        let t = simulate(&law, 1, StopRule::FirstPassage(30), StreamKey::new(5, i)).unwrap();
        let st = walk_statistics(&t);
        assert_eq!(st.loop_erasure, (1..=30).collect::<Vec<State>>());
    }
}

#[test]
fn strong_cut_times_are_last_visits_of_cutpoints() {
    let law = ChainLaw::new(&ResistanceProfile::canonical(2.0).unwrap());
    for i in 0..2000 {
        let t = simulate(&law, 1, StopRule::FirstPassage(25), StreamKey::new(6, i)).unwrap();
        let strong = detect_strong_cutpoints(&t, |a, b| law.transition_prob(a, b) > 0.0);
        for &k in &strong {
            assert!(is_cut_time(&t.states, k));
            let level = t.states[k];
            assert!(common::brute_force_cut(&t.states, level));
            assert!(!t.states[k + 1..].contains(&level));
        }
    }
}

#[test]
fn horizon_runs_are_flagged() {
    let law = ChainLaw::new(&ResistanceProfile::canonical(2.0).unwrap());
    let t = simulate_with(
        &law,
        1,
        StopRule::FirstPassage(10_000),
        StreamKey::new(0, 0),
        SimulateOptions { horizon_cap: 1000 },
    )
    .unwrap();
    assert!(t.censored_early);
    assert_eq!(t.steps(), 1000);
}
