#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use cutpoints::kernel::FiniteChain;
use cutpoints::rng::Rng;
use cutpoints::tree_walk::Tree;
use cutpoints::State;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

/// Random labelled tree on `n` vertices (ids shuffled from `1..=n`) with
/// weights drawn log-uniformly from [0.2, 5].
pub fn random_tree(n: usize, rng: &mut Rng) -> Tree {
    let mut labels: Vec<State> = (1..=n as State).collect();
    labels.shuffle(rng);
    let edges: Vec<_> = (1..n)
        .map(|i| {
            let parent = rng.random_range(0..i);
            let w = (rng.random_range(-1.6f64..1.6)).exp();
            (labels[parent], labels[i], w)
        })
        .collect();
    Tree::new(&edges, Some(labels[0])).unwrap()
}

/// Two distinct vertices of `tree`.
pub fn distinct_pair(tree: &Tree, rng: &mut Rng) -> (State, State) {
    let vs: Vec<State> = tree.vertices().collect();
    let picked: Vec<_> = vs.choose_multiple(rng, 2).copied().collect();
    (picked[0], picked[1])
}

/// Definitional check on a path from 1 stopped at its first visit to its
/// top level: is level `k` a cutpoint, i.e. is there a time with
/// `S_t = k` whose past and future are disjoint?
pub fn brute_force_cut(states: &[State], k: State) -> bool {
    (0..states.len()).filter(|&t| states[t] == k).any(|t| {
        let past: HashSet<_> = states[..=t].iter().collect();
        !states[t + 1..].iter().any(|s| past.contains(s))
    })
}

/// Absorbed chain on {1, 2, 3, 4} used by the law tests; 4 absorbs.
pub fn small_chain() -> FiniteChain {
    FiniteChain::new(BTreeMap::from([
        (1, vec![(2, 0.6), (3, 0.4)]),
        (2, vec![(1, 0.3), (3, 0.2), (4, 0.5)]),
        (3, vec![(1, 0.25), (4, 0.75)]),
    ]))
    .unwrap()
}

/// Cell index of `path` among `cells`, or `cells.len()` for the pooled
/// remainder.
pub fn cell_of(index: &BTreeMap<Vec<State>, usize>, path: &[State]) -> usize {
    index.get(path).copied().unwrap_or(index.len())
}
