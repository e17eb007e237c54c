//! Distributional checks: samplers against each other and against exact
//! laws, by z-scores and chi-square tests.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use cutpoints::experiments::{pattern_census, ExperimentOptions, Sampler};
use cutpoints::kernel::{FiniteChain, Kernel};
use cutpoints::rng::{derive_seed, stream_rng, StreamKey};
use cutpoints::stack_machine::{resample_orderings, run_from_stacks, StackSystem};
use cutpoints::stats::{chi_square_gof, chi_square_homogeneity};
use cutpoints::trajectory::{
    conditioned_descent, detect_cutpoints_censored, exact_cutpoint_pattern, ladder_cutpoint_pattern, simulate,
    ExactPatternOptions,
};
use cutpoints::{ChainLaw, ResistanceProfile, State, StopRule, TailTable};

const P_MIN: f64 = 0.001;

fn three_state() -> FiniteChain {
    FiniteChain::new(BTreeMap::from([(1, vec![(2, 0.5), (3, 0.5)]), (2, vec![(1, 0.6), (3, 0.4)])])).unwrap()
}

fn pattern_code(indicator: &[bool]) -> usize {
    indicator.iter().enumerate().map(|(i, &c)| (c as usize) << i).sum()
}

#[test]
fn lazy_stacks_follow_the_chain_law() {
    let chain = three_state();
    let paths = chain.most_likely_paths(1, 3, 0.999, 10_000);
    let index: BTreeMap<Vec<State>, usize> = paths.iter().enumerate().map(|(i, (p, _))| (p.clone(), i)).collect();
    let mut probs: Vec<f64> = paths.iter().map(|p| p.1).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let kernel: Arc<dyn Kernel> = Arc::new(chain.clone());
    let mut stacks = vec![0u64; probs.len()];
    let mut direct = vec![0u64; probs.len()];
    for i in 0..100_000u64 {
        let run = run_from_stacks(StackSystem::lazy(kernel.clone(), i), 1, StopRule::Absorb(3)).unwrap();
        stacks[common::cell_of(&index, &run.trajectory.states)] += 1;
        let mut rng = stream_rng(77, i);
        let mut path = vec![1];
        while *path.last().unwrap() != 3 {
            path.push(chain.sample_next(*path.last().unwrap(), &mut rng).unwrap());
        }
        direct[common::cell_of(&index, &path)] += 1;
    }
    assert!(chi_square_gof(&stacks, &probs).unwrap().p_value > P_MIN);
    assert!(chi_square_homogeneity(&stacks, &direct).unwrap().p_value > P_MIN);
}

#[test]
fn resampled_trajectories_follow_the_chain_law() {
    let chain = common::small_chain();
    let paths = chain.most_likely_paths(1, 4, 0.999, 100_000);
    let index: BTreeMap<Vec<State>, usize> = paths.iter().enumerate().map(|(i, (p, _))| (p.clone(), i)).collect();
    let mut probs: Vec<f64> = paths.iter().map(|p| p.1).collect();
    probs.push((1.0 - probs.iter().sum::<f64>()).max(0.0));
    let kernel: Arc<dyn Kernel> = Arc::new(chain);
    let mut counts = vec![0u64; probs.len()];
    for i in 0..100_000u64 {
        let run =
            run_from_stacks(StackSystem::lazy(kernel.clone(), derive_seed(3, i)), 1, StopRule::Absorb(4)).unwrap();
        let s = &run.snapshot;
        let t = resample_orderings(&s.multisets(), &s.exits(), 1, StopRule::Absorb(4), i).unwrap();
        counts[common::cell_of(&index, &t.states)] += 1;
    }
    let test = chi_square_gof(&counts, &probs).unwrap();
    assert!(test.p_value > P_MIN, "{test:?}");
}

#[test]
fn forced_orderings_reproduce_the_run() {
    let path = cutpoints::tree_walk::Tree::path(6).unwrap();
    let kernel: Arc<dyn Kernel> = Arc::new(path);
    let mut seen_forced = 0;
    for seed in 0..300 {
        let run = run_from_stacks(StackSystem::lazy(kernel.clone(), seed), 1, StopRule::Absorb(6)).unwrap();
        let s = &run.snapshot;
        if s.popped_states().all(|x| s.w(x).len() <= 1) {
            seen_forced += 1;
            for r in 0..5 {
                let t = resample_orderings(&s.multisets(), &s.exits(), 1, StopRule::Absorb(6), r).unwrap();
                assert_eq!(t.states, run.trajectory.states);
            }
        }
    }
    assert!(seen_forced > 0);
    // a monotone run is the only one consistent with its exits
    let exits: BTreeMap<State, State> = (1..6).map(|x| (x, x + 1)).collect();
    let t = resample_orderings(&BTreeMap::new(), &exits, 1, StopRule::Absorb(6), 9).unwrap();
    assert_eq!(t.states, vec![1, 2, 3, 4, 5, 6]);
}

#[test]
fn conditioned_descent_matches_rejection_sampling() {
    let p = ResistanceProfile::geometric(0.5, 1000).unwrap();
    let (law, table) = (ChainLaw::new(&p), TailTable::new(&p, 200).unwrap());
    let (from, target, ceiling) = (5 as State, 2 as State, 50 as State);
    let samples = 100_000u64;

    let mut descents: Vec<Vec<State>> = Vec::new();
    for i in 0..samples {
        descents.push(conditioned_descent(&law, &table, from, target, StreamKey::new(40, i)).unwrap().states);
    }
    let mut accepted: Vec<Vec<State>> = Vec::new();
    let mut i = 0u64;
    while (accepted.len() as u64) < samples {
        let mut rng = stream_rng(41, i);
        i += 1;
        let mut x = from;
        let mut path = vec![x];
        while x != target && x != ceiling {
            x = cutpoints::kernel::Kernel::sample_next(&law, x, &mut rng).unwrap();
            path.push(x);
        }
        if x == target {
            accepted.push(path);
        }
    }

    let mut index: BTreeMap<Vec<State>, usize> = BTreeMap::new();
    let mut freq: BTreeMap<Vec<State>, u64> = BTreeMap::new();
    for path in descents.iter().chain(&accepted) {
        *freq.entry(path.clone()).or_default() += 1;
    }
    // one cell per path seen at least 20 times overall; the rest pooled
    for (path, &c) in &freq {
        if c >= 20 {
            let n = index.len();
            index.insert(path.clone(), n);
        }
    }
    let mut a = vec![0u64; index.len() + 1];
    let mut b = vec![0u64; index.len() + 1];
    for path in &descents {
        a[common::cell_of(&index, path)] += 1;
    }
    for path in &accepted {
        b[common::cell_of(&index, path)] += 1;
    }
    let test = chi_square_homogeneity(&a, &b).unwrap();
    assert!(test.p_value > P_MIN, "{test:?}");
}

fn pattern_histograms(profile: &ResistanceProfile, k_max: usize, reps: u64, walk: bool) -> Vec<Vec<u64>> {
    let (law, table) = (ChainLaw::new(profile), TailTable::new(profile, 1 << 12).unwrap());
    let mut hist = vec![vec![0u64; 1 << k_max]; if walk { 3 } else { 2 }];
    let walk_opts = ExactPatternOptions { simulate_descent: true, ..Default::default() };
    for i in 0..reps {
        let l = ladder_cutpoint_pattern(&table, k_max, &mut stream_rng(50, i)).unwrap();
        hist[0][pattern_code(&l.indicator)] += 1;
        let s = exact_cutpoint_pattern(&law, &table, k_max, StreamKey::new(51, i), Default::default()).unwrap();
        assert!(s.bias_bound.iter().all(|b| *b == 0.0));
        hist[1][pattern_code(&s.indicator)] += 1;
        if walk {
            let w = exact_cutpoint_pattern(&law, &table, k_max, StreamKey::new(52, i), walk_opts).unwrap();
            hist[2][pattern_code(&w.indicator)] += 1;
        }
    }
    hist
}

#[test]
fn step_level_sampler_matches_ladder_patterns() {
    let canonical = ResistanceProfile::canonical(2.0).unwrap();
    let hist = pattern_histograms(&canonical, 6, 20_000, false);
    let test = chi_square_homogeneity(&hist[0], &hist[1]).unwrap();
    assert!(test.p_value > P_MIN, "{test:?}");

    // Simulated descents are only cheap when the conditioned walk has a
    // clear downward drift, so that variant runs on a geometric profile.
    let geometric = ResistanceProfile::geometric(0.9, 5000).unwrap();
    let hist = pattern_histograms(&geometric, 6, 20_000, true);
    for other in &hist[1..] {
        let test = chi_square_homogeneity(&hist[0], other).unwrap();
        assert!(test.p_value > P_MIN, "{test:?}");
    }
}

#[test]
fn step_level_marginals_match_exact_probabilities() {
    let p = ResistanceProfile::canonical(2.0).unwrap();
    let (law, table) = (ChainLaw::new(&p), TailTable::new(&p, 64).unwrap());
    let opts = ExperimentOptions { sampler: Sampler::StepLevel(Default::default()), ..Default::default() };
    let c = pattern_census(&law, &table, &[1, 2, 5, 10], &[(4, 8)], 20_000, 60, opts).unwrap();
    for r in c.marginals.iter().chain(&c.conditionals) {
        assert!(r.within(4.0), "{r:?}");
    }

    let g = ResistanceProfile::geometric(0.5, 1000).unwrap();
    let (law, table) = (ChainLaw::new(&g), TailTable::new(&g, 64).unwrap());
    let levels: Vec<usize> = (1..=10).collect();
    let c = pattern_census(&law, &table, &levels, &[], 100_000, 61, opts).unwrap();
    for r in &c.marginals {
        assert_eq!(r.target, Some(0.5));
        assert!(r.within(4.0), "{r:?}");
    }
}

#[test]
fn censored_disagreement_is_within_the_bias_bound() {
    // The step-level sampler and a plain simulation share their first leg
    // on equal streams, so they can only disagree after a return below N.
    let p = ResistanceProfile::canonical(2.0).unwrap();
    let (law, table) = (ChainLaw::new(&p), TailTable::new(&p, 64).unwrap());
    let (k_max, n) = (8usize, 32 as State);
    let reps = 20_000u64;
    let opts = ExactPatternOptions { censor_level: Some(n as usize), ..Default::default() };
    let mut disagree = 0u64;
    let mut bound = 0.0f64;
    for i in 0..reps {
        let key = StreamKey::new(70, i);
        let traj = simulate(&law, 1, StopRule::FirstPassage(n), key).unwrap();
        let censored = detect_cutpoints_censored(&traj, k_max, &table).unwrap();
        let exact = exact_cutpoint_pattern(&law, &table, k_max, key, opts).unwrap();
        bound = bound.max(censored.max_bias_bound());
        disagree += u64::from(censored.indicator != exact.indicator);
    }
    let rate = disagree as f64 / reps as f64;
    let se = (bound * (1.0 - bound) / reps as f64).sqrt();
    assert!(rate <= bound + 4.0 * se, "rate {rate} vs bound {bound}");
    assert!(disagree > 0);
}

#[test]
fn pattern_census_is_thread_independent() {
    let p = ResistanceProfile::canonical(2.0).unwrap();
    let (law, table) = (ChainLaw::new(&p), TailTable::new(&p, 256).unwrap());
    let run = |threads| {
        let opts = ExperimentOptions { threads, ..Default::default() };
        pattern_census(&law, &table, &[3, 30], &[(20, 40)], 5000, 8, opts).unwrap()
    };
    assert_eq!(run(Some(1)), run(Some(3)));
    assert_eq!(run(Some(1)), run(None));
}
