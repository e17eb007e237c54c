//! Running a Markov chain from per-state successor stacks.
//!
//! Each state owns a stack of successors. The chain moves by popping the top
//! of the current state's stack. For a run that stops, `popped(x)` is the
//! list of entries consumed at `x`; its last entry is the exit pointer
//! `U(x)` and the rest is `W(x)`. Reordering any `W(x)` and rerunning gives
//! the same transition counts and exit pointers, and drawing every `W(x)` in
//! uniformly random order reproduces the chain's law.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::{derive_seed, stream_rng, Rng, StreamKey};
use crate::trajectory::{Space, State, StopRule, Trajectory, DEFAULT_HORIZON_CAP};
use crate::tree_walk::{walk_statistics, TransitionCounts};

const LAZY_STACK_TAG: u64 = 0x5354_4143_4b53; // "STACKS"
const RESAMPLE_TAG: u64 = 0x5245_5341_4d50; // "RESAMP"

#[derive(Clone)]
struct LazySource {
    kernel: Arc<dyn Kernel>,
    seed: u64,
    // per-state generator positioned after the materialized entries
    generators: BTreeMap<State, Rng>,
}

/// Successor stacks, materialized as far as they have been read.
///
/// Lazy stacks draw entry `d` of state `x` as the `d`-th draw of a stream
/// keyed by `(seed, x)`, so an entry's value does not depend on when it is
/// first read.
#[derive(Clone)]
pub struct StackSystem {
    stacks: BTreeMap<State, Vec<State>>,
    lazy: Option<LazySource>,
    horizon_cap: u64,
}

impl std::fmt::Debug for StackSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StackSystem")
            .field("stacks", &self.stacks)
            .field("lazy", &self.lazy.as_ref().map(|l| l.seed))
            .finish()
    }
}

impl StackSystem {
    /// Finite stacks; running past the end of one is a `StackUnderflow`.
    pub fn explicit(stacks: BTreeMap<State, Vec<State>>) -> Self {
        Self { stacks, lazy: None, horizon_cap: DEFAULT_HORIZON_CAP }
    }

    /// Infinite stacks filled on demand from `kernel`.
    pub fn lazy(kernel: Arc<dyn Kernel>, seed: u64) -> Self {
        Self {
            stacks: BTreeMap::new(),
            lazy: Some(LazySource { kernel, seed, generators: BTreeMap::new() }),
            horizon_cap: DEFAULT_HORIZON_CAP,
        }
    }

    pub fn with_horizon_cap(mut self, cap: u64) -> Self {
        self.horizon_cap = cap;
        self
    }

    /// Materialized entries of the stack under `x`.
    pub fn stack(&self, x: State) -> &[State] {
        self.stacks.get(&x).map_or(&[], Vec::as_slice)
    }

    fn entry(&mut self, x: State, depth: usize) -> Result<State> {
        let stack = self.stacks.entry(x).or_default();
        if depth < stack.len() {
            return Ok(stack[depth]);
        }
        let Some(lazy) = self.lazy.as_mut() else {
            return Err(Error::StackUnderflow { state: x, depth });
        };
        let seed = derive_seed(lazy.seed, LAZY_STACK_TAG);
        let gen = lazy.generators.entry(x).or_insert_with(|| stream_rng(seed, u64::from(x)));
        while stack.len() <= depth {
            stack.push(lazy.kernel.sample_next(x, gen)?);
        }
        Ok(stack[depth])
    }
}

/// A completed run together with the stacks it read.
#[derive(Debug, Clone)]
pub struct StackRun {
    pub trajectory: Trajectory,
    pub snapshot: StackSnapshot,
}

/// Immutable record of which stack entries a run consumed.
#[derive(Debug, Clone)]
pub struct StackSnapshot {
    system: StackSystem,
    popped: BTreeMap<State, usize>,
    x0: State,
    stop: StopRule,
}

impl StackSnapshot {
    pub fn x0(&self) -> State {
        self.x0
    }

    pub fn stop_rule(&self) -> StopRule {
        self.stop
    }

    /// States with at least one popped entry.
    pub fn popped_states(&self) -> impl Iterator<Item = State> + '_ {
        self.popped.iter().filter(|(_, n)| **n > 0).map(|(x, _)| *x)
    }

    /// Ordered list of successors popped at `x`.
    pub fn popped(&self, x: State) -> &[State] {
        let n = self.popped.get(&x).copied().unwrap_or(0);
        &self.system.stack(x)[..n]
    }

    /// `popped(x)` without its last entry.
    pub fn w(&self, x: State) -> &[State] {
        let p = self.popped(x);
        &p[..p.len().saturating_sub(1)]
    }

    /// Last popped successor of `x`, or `x` if nothing was popped there.
    pub fn u(&self, x: State) -> State {
        self.popped(x).last().copied().unwrap_or(x)
    }

    /// Multiset view `[W(x)]`: successor -> multiplicity.
    pub fn multiset_view(&self, x: State) -> BTreeMap<State, usize> {
        let mut out = BTreeMap::new();
        for &y in self.w(x) {
            *out.entry(y).or_default() += 1;
        }
        out
    }

    /// `[W(x)]` as sorted lists, for every popped state.
    pub fn multisets(&self) -> BTreeMap<State, Vec<State>> {
        self.popped_states()
            .map(|x| {
                let mut w = self.w(x).to_vec();
                w.sort_unstable();
                (x, w)
            })
            .collect()
    }

    /// `U(x)` for every popped state.
    pub fn exits(&self) -> BTreeMap<State, State> {
        self.popped_states().map(|x| (x, self.u(x))).collect()
    }
}

/// Runs from `x0` by popping stacks until `stop` fires.
///
/// `FirstPassage(n)` and `Absorb(n)` stop on arrival at `n` (immediately if
/// `x0 == n`); the stop state's own stack is never popped.
pub fn run_from_stacks(mut system: StackSystem, x0: State, stop: StopRule) -> Result<StackRun> {
    let mut popped: BTreeMap<State, usize> = BTreeMap::new();
    let mut states = vec![x0];
    let mut x = x0;
    let mut steps = 0u64;
    let mut censored_early = false;
    while !stop.stops_at(x, steps) {
        if steps >= system.horizon_cap {
            censored_early = true;
            break;
        }
        let depth = popped.entry(x).or_default();
        let next = system.entry(x, *depth)?;
        *depth += 1;
        x = next;
        states.push(x);
        steps += 1;
    }
    let seed = system.lazy.as_ref().map(|l| StreamKey::new(l.seed, 0));
    let trajectory = Trajectory { space: Space::Tree, start: x0, states, stop_rule: stop, seed, censored_early };
    Ok(StackRun { trajectory, snapshot: StackSnapshot { system, popped, x0, stop } })
}

/// Permutes `W(x)` for each `x` in `perms` and reruns from the same start.
///
/// `perms[x]` is a permutation of `0..|W(x)|` (new position `i` takes old
/// entry `perms[x][i]`). A permutation of the full popped list is accepted
/// only if it fixes the final entry `U(x)`.
pub fn reorder_and_rerun(snapshot: &StackSnapshot, perms: &BTreeMap<State, Vec<usize>>) -> Result<StackRun> {
    let mut system = snapshot.system.clone();
    for (&x, perm) in perms {
        let popped = snapshot.popped(x);
        let w_len = popped.len().saturating_sub(1);
        let perm = match perm.len() {
            n if n == w_len => perm.as_slice(),
            n if n == popped.len() && n > 0 => {
                if perm[n - 1] != n - 1 {
                    return Err(Error::InvalidPermutation(format!("permutation at {x} moves the final exit")));
                }
                &perm[..n - 1]
            }
            n => {
                return Err(Error::InvalidPermutation(format!(
                    "permutation at {x} has length {n}, W({x}) has length {w_len}"
                )))
            }
        };
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a permutation")));
        }
        if perm.is_empty() {
            continue;
        }
        let stack = system.stacks.get_mut(&x).expect("popped states have stacks");
        let original: Vec<State> = stack[..w_len].to_vec();
        for (i, &p) in perm.iter().enumerate() {
            stack[i] = original[p];
        }
    }
    run_from_stacks(system, snapshot.x0, snapshot.stop)
}

/// Draws a uniformly random ordering of each multiset `[W(x)]`, puts `U(x)`
/// last, and runs from `x0`. All supplied entries must be consumed.
pub fn resample_orderings(
    multisets: &BTreeMap<State, Vec<State>>,
    exits: &BTreeMap<State, State>,
    x0: State,
    stop: StopRule,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = stream_rng(derive_seed(seed, RESAMPLE_TAG), 0);
    let mut stacks: BTreeMap<State, Vec<State>> = BTreeMap::new();
    for (&x, &u) in exits {
        let mut w = multisets.get(&x).cloned().unwrap_or_default();
        w.shuffle(&mut rng);
        w.push(u);
        stacks.insert(x, w);
    }
    if let Some(x) = multisets.keys().find(|x| !exits.contains_key(x)) {
        return Err(Error::InconsistentStacks(format!("state {x} has a multiset but no exit")));
    }
    let total: BTreeMap<State, usize> = stacks.iter().map(|(x, s)| (*x, s.len())).collect();
    let run = run_from_stacks(StackSystem::explicit(stacks), x0, stop).map_err(|e| match e {
        Error::StackUnderflow { state, .. } => {
            Error::InconsistentStacks(format!("rerun ran out of successors at state {state}"))
        }
        other => other,
    })?;
    for (x, n) in total {
        if run.snapshot.popped.get(&x).copied().unwrap_or(0) != n {
            return Err(Error::InconsistentStacks(format!("stack at {x} was not fully consumed")));
        }
    }
    Ok(run.trajectory)
}

/// Whether `m` is the transition multigraph of a walk from `x0` to `end`
/// (in/out balance everywhere except one extra departure at `x0` and one
/// extra arrival at `end`).
pub fn eulerian_check(m: &TransitionCounts, x0: State, end: State) -> bool {
    crate::tree_walk::eulerian_balanced(m, x0, end)
}

/// Transition counts of a run's trajectory.
pub fn transition_counts(run: &StackRun) -> TransitionCounts {
    walk_statistics(&run.trajectory).transitions
}
