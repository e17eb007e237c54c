//! Simulation of the birth-and-death chain and cutpoint detection on its
//! trajectories.

mod detect;
mod exact;
mod splice;

pub use detect::{detect_cutpoints_censored, detect_strong_cutpoints, is_cut_time, CutpointMethod, CutpointReport};
pub use exact::{conditioned_descent, exact_cutpoint_pattern, ladder_cutpoint_pattern, ExactPatternOptions};
pub use splice::{loop_erasure, splice_to_cutpoints};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resistance::ChainLaw;
use crate::rng::StreamKey;

/// A state of the chain: a level on the positive integers or a tree vertex.
pub type State = u32;

/// Default hard cap on the number of simulated steps.
pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Line,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop at the first visit to the given level.
    FirstPassage(State),
    /// Stop on the first arrival at the given state.
    Absorb(State),
    /// Stop after the given number of steps.
    Horizon(u64),
}

impl StopRule {
    /// Whether arriving at `x` after `steps` steps ends the walk.
    #[inline]
    pub(crate) fn stops_at(&self, x: State, steps: u64) -> bool {
        match *self {
            StopRule::FirstPassage(n) | StopRule::Absorb(n) => x == n,
            StopRule::Horizon(t) => steps >= t,
        }
    }
}

impl std::fmt::Display for StopRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopRule::FirstPassage(n) => write!(f, "first_passage {n}"),
            StopRule::Absorb(y) => write!(f, "absorb {y}"),
            StopRule::Horizon(t) => write!(f, "horizon {t}"),
        }
    }
}

/// A finite nearest-neighbor path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub space: Space,
    pub start: State,
    pub states: Vec<State>,
    pub stop_rule: StopRule,
    pub seed: Option<StreamKey>,
    /// Set when the step cap (or an absorbing boundary) ended the walk
    /// before its stop rule was met.
    pub censored_early: bool,
}

impl Trajectory {
    /// A path on the positive integers; consecutive states must differ by 1.
    pub fn line(states: Vec<State>, stop_rule: StopRule) -> Result<Self> {
        let start = *states.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
        if states.contains(&0) {
            return Err(Error::InvalidInput("line states start at 1".into()));
        }
        if let Some(w) = states.windows(2).find(|w| w[0].abs_diff(w[1]) != 1) {
            return Err(Error::InvalidInput(format!("states {} and {} are not adjacent", w[0], w[1])));
        }
        Ok(Self { space: Space::Line, start, states, stop_rule, seed: None, censored_early: false })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn end_state(&self) -> State {
        *self.states.last().expect("trajectories are non-empty")
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Whether the final state is the first occurrence of `n`.
    pub fn ends_at_first_passage(&self, n: State) -> bool {
        self.end_state() == n && !self.states[..self.states.len() - 1].contains(&n)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub horizon_cap: u64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { horizon_cap: DEFAULT_HORIZON_CAP }
    }
}

/// Runs the chain from `start` until `stop_rule` fires.
///
/// Identical `(law, start, stop_rule, key)` give identical trajectories. If
/// the step cap is hit first, or an explicit profile's absorbing top state
/// is reached, the partial path is returned with `censored_early` set.
pub fn simulate(law: &ChainLaw, start: State, stop_rule: StopRule, key: StreamKey) -> Result<Trajectory> {
    simulate_with(law, start, stop_rule, key, SimulateOptions::default())
}

pub fn simulate_with(
    law: &ChainLaw,
    start: State,
    stop_rule: StopRule,
    key: StreamKey,
    opts: SimulateOptions,
) -> Result<Trajectory> {
    let top = law.max_state().map(|s| s as State);
    if start == 0 || top.is_some_and(|t| start > t) {
        return Err(Error::OutOfRange(format!("start state {start} outside the state space")));
    }
    if let StopRule::FirstPassage(n) | StopRule::Absorb(n) = stop_rule {
        if n == 0 || top.is_some_and(|t| n > t) {
            return Err(Error::OutOfRange(format!("stop state {n} outside the state space")));
        }
    }

    let mut rng = key.rng();
    let mut states = vec![start];
    let mut x = start;
    let mut steps = 0u64;
    let mut censored_early = false;
    while !stop_rule.stops_at(x, steps) {
        if steps >= opts.horizon_cap || top == Some(x) {
            censored_early = true;
            break;
        }
        x = step(law, x, &mut rng);
        steps += 1;
        states.push(x);
    }

    Ok(Trajectory { space: Space::Line, start, states, stop_rule, seed: Some(key), censored_early })
}

#[inline]
pub(crate) fn step(law: &ChainLaw, x: State, rng: &mut crate::rng::Rng) -> State {
    let u: f64 = rng.random();
    if u < law.up_unchecked(x as usize) {
        x + 1
    } else {
        x - 1
    }
}
