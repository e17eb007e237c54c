//! Nearest-neighbor walks on finite trees and the statistics of their
//! trajectories: occupation numbers `V`, transition counts `M`, last-exit
//! pointers `U` and the loop-erasure `L`.
//!
//! On a tree, a walk's transition counts are determined by its occupation
//! numbers (away from the end vertex), and its last-exit pointers are
//! determined by which way it escapes. [`reconstruct_m_from_v`] and
//! [`infer_exit_pointers`] compute both.

mod tree;

pub use tree::{parse_tree, Tree, TreeSpec};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::StreamKey;
use crate::trajectory::{loop_erasure, Space, State, StopRule, Trajectory, DEFAULT_HORIZON_CAP};

/// Occupation numbers: vertex -> number of visits. Absent means 0.
pub type Occupation = BTreeMap<State, u64>;
/// Transition counts: `(x, y)` -> number of `x -> y` steps. Absent means 0.
pub type TransitionCounts = BTreeMap<(State, State), u64>;

/// Runs the weighted nearest-neighbor walk on `tree` from `x0` until it
/// first arrives at `absorb`, or for `horizon` steps if given.
pub fn simulate_tree_walk(
    tree: &Tree,
    x0: State,
    absorb: State,
    key: StreamKey,
    horizon: Option<u64>,
) -> Result<Trajectory> {
    if !tree.contains(x0) || !tree.contains(absorb) {
        return Err(Error::InvalidArguments(format!("{x0} or {absorb} is not a vertex of the tree")));
    }
    let cap = horizon.unwrap_or(DEFAULT_HORIZON_CAP);
    let mut rng = key.rng();
    let mut states = vec![x0];
    let mut x = x0;
    let mut steps = 0u64;
    while x != absorb && steps < cap {
        x = tree.sample_next(x, &mut rng)?;
        states.push(x);
        steps += 1;
    }
    let stop_rule = match horizon {
        Some(t) => StopRule::Horizon(t),
        None => StopRule::Absorb(absorb),
    };
    let censored_early = horizon.is_none() && x != absorb;
    Ok(Trajectory { space: Space::Tree, start: x0, states, stop_rule, seed: Some(key), censored_early })
}

/// `V`, `M`, `U` and `L` of a finite trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkStatistics {
    pub start: State,
    pub end_state: State,
    pub occupation: Occupation,
    pub transitions: TransitionCounts,
    /// State entered right after the last visit, for visited states. The
    /// end state has no successor and points to itself.
    pub exits: BTreeMap<State, State>,
    pub loop_erasure: Vec<State>,
}

impl WalkStatistics {
    pub fn v(&self, x: State) -> u64 {
        self.occupation.get(&x).copied().unwrap_or(0)
    }

    pub fn m(&self, x: State, y: State) -> u64 {
        self.transitions.get(&(x, y)).copied().unwrap_or(0)
    }

    /// Last-exit pointer; `U(x) = x` when `x` was never visited.
    pub fn u(&self, x: State) -> State {
        self.exits.get(&x).copied().unwrap_or(x)
    }

    /// Checks entry balance, exit balance and loop-erasure shape.
    pub fn check_invariants(&self) -> Result<()> {
        let mut inflow: BTreeMap<State, u64> = BTreeMap::new();
        let mut outflow: BTreeMap<State, u64> = BTreeMap::new();
        for (&(x, y), &c) in &self.transitions {
            *outflow.entry(x).or_default() += c;
            *inflow.entry(y).or_default() += c;
        }
        for (&x, &v) in &self.occupation {
            let entries = inflow.get(&x).copied().unwrap_or(0) + u64::from(x == self.start);
            if entries != v {
                return Err(Error::InvalidInput(format!("entry balance fails at {x}: {entries} != {v}")));
            }
            let exits = outflow.get(&x).copied().unwrap_or(0) + u64::from(x == self.end_state);
            if exits != v {
                return Err(Error::InvalidInput(format!("exit balance fails at {x}: {exits} != {v}")));
            }
        }
        if !eulerian_balanced(&self.transitions, self.start, self.end_state) {
            return Err(Error::InvalidInput("transition multigraph is not Eulerian".into()));
        }
        let l = &self.loop_erasure;
        let distinct: BTreeSet<_> = l.iter().collect();
        if l.first() != Some(&self.start) || l.last() != Some(&self.end_state) || distinct.len() != l.len() {
            return Err(Error::InvalidInput("loop-erasure is not a self-avoiding path from start to end".into()));
        }
        if l.windows(2).any(|w| self.m(w[0], w[1]) == 0) {
            return Err(Error::InvalidInput("loop-erasure uses a step the walk never took".into()));
        }
        Ok(())
    }
}

/// Counts `V`, `M`, `U` and the loop-erasure of `traj`.
pub fn walk_statistics(traj: &Trajectory) -> WalkStatistics {
    let s = &traj.states;
    let mut occupation = Occupation::new();
    let mut transitions = TransitionCounts::new();
    let mut exits = BTreeMap::new();
    for (i, &x) in s.iter().enumerate() {
        *occupation.entry(x).or_default() += 1;
        match s.get(i + 1) {
            Some(&y) => {
                *transitions.entry((x, y)).or_default() += 1;
                exits.insert(x, y);
            }
            None => {
                exits.insert(x, x);
            }
        }
    }
    let (loop_erasure, _) = loop_erasure(s);
    WalkStatistics { start: traj.start, end_state: traj.end_state(), occupation, transitions, exits, loop_erasure }
}

/// In/out-degree balance of a transition multigraph: every vertex balances
/// except `x0` (one extra departure) and `end` (one extra arrival); if
/// `x0 == end` every vertex balances.
pub fn eulerian_balanced(m: &TransitionCounts, x0: State, end: State) -> bool {
    let mut net: BTreeMap<State, i64> = BTreeMap::new();
    for (&(x, y), &c) in m {
        *net.entry(x).or_default() += c as i64;
        *net.entry(y).or_default() -= c as i64;
    }
    net.entry(x0).or_default();
    net.entry(end).or_default();
    net.iter().all(|(&x, &d)| d == i64::from(x == x0) - i64::from(x == end))
}

/// Order in which leaves are peeled by [`reconstruct_m_from_v_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafOrder {
    SmallestId,
    Random(StreamKey),
}

/// Rebuilds the transition counts of a walk from `x0` ending at `y` out of
/// its occupation numbers, peeling leaves in increasing vertex order.
pub fn reconstruct_m_from_v(tree: &Tree, v: &Occupation, x0: State, y: State) -> Result<TransitionCounts> {
    reconstruct_m_from_v_with(tree, v, x0, y, LeafOrder::SmallestId)
}

/// Leaf-peeling reconstruction of `M` from `V`.
///
/// Repeatedly take a leaf `z != y` with neighbor `z*`. Every visit to `z`
/// is followed by a step back to `z*`, and every visit except an initial one
/// is preceded by a step from `z*`, so `M(z, z*) = V(z)` and
/// `M(z*, z) = V(z) - [z is the start]`. Cutting those excursions out merges
/// visits of `z*`: `V(z*) -= V(z) - [z is the start]`, and the start moves to
/// `z*` if `z` was the start. `V(y)` is never read.
pub fn reconstruct_m_from_v_with(
    tree: &Tree,
    v: &Occupation,
    x0: State,
    y: State,
    order: LeafOrder,
) -> Result<TransitionCounts> {
    if !tree.contains(x0) || !tree.contains(y) {
        return Err(Error::InvalidArguments(format!("{x0} or {y} is not a vertex of the tree")));
    }
    if let Some(x) = v.keys().find(|x| !tree.contains(**x)) {
        return Err(Error::InconsistentOccupationField(format!("vertex {x} is not in the tree")));
    }

    let mut occ: BTreeMap<State, i64> = tree.vertices().map(|x| (x, *v.get(&x).unwrap_or(&0) as i64)).collect();
    let mut degree: BTreeMap<State, usize> = tree.vertices().map(|x| (x, tree.degree(x))).collect();
    let mut alive: BTreeSet<State> = tree.vertices().collect();
    let mut leaves: BTreeSet<State> = alive.iter().copied().filter(|&x| degree[&x] == 1 && x != y).collect();
    let mut rng = match order {
        LeafOrder::Random(key) => Some(key.rng()),
        LeafOrder::SmallestId => None,
    };

    let mut root = x0;
    let mut m = TransitionCounts::new();
    while alive.len() > 1 {
        let z = match rng.as_mut() {
            Some(r) => *leaves.iter().choose(r).expect("a tree with two vertices has a leaf besides y"),
            None => *leaves.first().expect("a tree with two vertices has a leaf besides y"),
        };
        let z_star = tree.neighbors(z).find(|w| alive.contains(w)).expect("leaf has one live neighbor");
        let vz = occ[&z];
        let is_root = z == root;
        if is_root && vz < 1 {
            return Err(Error::InconsistentOccupationField(format!("start vertex {z} has V = {vz}")));
        }
        let back = vz - i64::from(is_root);
        if vz > 0 {
            m.insert((z, z_star), vz as u64);
        }
        if back > 0 {
            m.insert((z_star, z), back as u64);
        }
        if z_star != y {
            let updated = occ[&z_star] - back;
            if updated < 0 || (is_root && updated < 1) {
                return Err(Error::InconsistentOccupationField(format!(
                    "V({z_star}) becomes {updated} after removing leaf {z}"
                )));
            }
            occ.insert(z_star, updated);
        }
        if is_root {
            root = z_star;
        }

        alive.remove(&z);
        leaves.remove(&z);
        let d = degree.get_mut(&z_star).expect("vertex");
        *d -= 1;
        if *d == 1 && z_star != y {
            leaves.insert(z_star);
        }
    }
    Ok(m)
}

/// Last-exit pointers implied by the occupation field of a walk from `x0`
/// that escapes through `escape`: every visited vertex points to its
/// neighbor toward `escape`, `escape` points to itself, and unvisited
/// vertices (not listed) point to themselves.
pub fn infer_exit_pointers(tree: &Tree, v: &Occupation, x0: State, escape: State) -> Result<BTreeMap<State, State>> {
    let path = tree
        .path_between(x0, escape)
        .ok_or_else(|| Error::InvalidArguments(format!("{x0} or {escape} is not a vertex of the tree")))?;
    if let Some(x) = path.iter().rev().skip(1).find(|x| v.get(x).copied().unwrap_or(0) == 0) {
        return Err(Error::InconsistentOccupationField(format!("vertex {x} between {x0} and {escape} has V = 0")));
    }
    let parent = tree.parents_toward(escape);
    let mut exits: BTreeMap<State, State> = v
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&x, _)| {
            parent
                .get(&x)
                .map(|&p| (x, p))
                .ok_or_else(|| Error::InconsistentOccupationField(format!("vertex {x} is not in the tree")))
        })
        .collect::<Result<_>>()?;
    exits.insert(escape, escape);
    Ok(exits)
}
