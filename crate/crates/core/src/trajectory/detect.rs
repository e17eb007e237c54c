use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{State, StopRule, Trajectory};
use crate::error::{Error, Result};
use crate::resistance::TailTable;

/// How a [`CutpointReport`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutpointMethod {
    /// Read off a path stopped at the first passage of `n`; biased by the
    /// chance that the infinite walk later returns.
    Censored { n: State },
    /// Step-level regeneration sampler for the infinite walk.
    ExactPattern,
    /// Sampler built from independent per-level excursion minima.
    Ladder,
}

/// Cutpoint indicators for levels `1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutpointReport {
    pub k_max: usize,
    pub method: CutpointMethod,
    /// `indicator[k - 1]` is true iff level `k` is a cutpoint.
    pub indicator: Vec<bool>,
    /// `bias_bound[k - 1]` bounds the probability that the infinite walk
    /// would still spoil level `k`; zero for exact methods.
    pub bias_bound: Vec<f64>,
    /// `first_passage[k - 1]`: time of the first visit to `k`, when known.
    pub first_passage: Vec<Option<u64>>,
    /// `spoiled[k - 1]`: `k` was visited after the first passage of `k + 1`.
    pub spoiled: Vec<bool>,
    /// The run hit its step cap; indicators are then only censored values.
    pub truncated: bool,
}

impl CutpointReport {
    pub(crate) fn from_spoiled(
        k_max: usize,
        method: CutpointMethod,
        spoiled: Vec<bool>,
        first_passage: Vec<Option<u64>>,
        bias_bound: Vec<f64>,
        truncated: bool,
    ) -> Self {
        let indicator = spoiled.iter().map(|s| !s).collect();
        Self { k_max, method, indicator, bias_bound, first_passage, spoiled, truncated }
    }

    pub fn is_cut(&self, k: usize) -> bool {
        k >= 1 && k <= self.k_max && self.indicator[k - 1]
    }

    /// Cut levels in increasing order.
    pub fn cut_levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicator.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i + 1)
    }

    /// Number of cut levels in `(lo, hi]`.
    pub fn count_in(&self, lo: usize, hi: usize) -> usize {
        let hi = hi.min(self.k_max);
        if lo >= hi {
            return 0;
        }
        self.indicator[lo..hi].iter().filter(|c| **c).count()
    }

    pub fn max_bias_bound(&self) -> f64 {
        self.bias_bound.iter().copied().fold(0.0, f64::max)
    }
}

/// Cutpoints of a path from 1 stopped at the first passage of `n`.
///
/// Level `k` is reported as a cutpoint iff the path never visits `k` after
/// its first visit to `k + 1`; for nearest-neighbor paths from 1 this is the
/// past/future disjointness criterion evaluated inside the observed window.
/// `bias_bound(k) = t(n)/t(k)` is the probability that the continuation of
/// the walk would return to `k`.
pub fn detect_cutpoints_censored(traj: &Trajectory, k_max: usize, table: &TailTable) -> Result<CutpointReport> {
    let n = match traj.stop_rule {
        StopRule::FirstPassage(n) => n,
        other => {
            return Err(Error::InvalidInput(format!("expected a first-passage trajectory, got stop rule {other}")))
        }
    };
    if k_max == 0 || k_max >= n as usize {
        return Err(Error::InvalidArguments(format!("need 1 <= K < N, got K = {k_max}, N = {n}")));
    }
    if traj.start != 1 || traj.censored_early || !traj.ends_at_first_passage(n) {
        return Err(Error::InvalidInput("trajectory must run from 1 to the first passage of N".into()));
    }

    let mut first_passage = vec![None; k_max];
    let mut spoiled = vec![false; k_max];
    let mut highest = 0 as State;
    for (time, &x) in traj.states.iter().enumerate() {
        let k = x as usize;
        if k <= k_max {
            if first_passage[k - 1].is_none() {
                first_passage[k - 1] = Some(time as u64);
            }
            if highest > x {
                spoiled[k - 1] = true;
            }
        }
        highest = highest.max(x);
    }

    let tn = table.tail_mid(n as usize)?;
    let bias_bound = (1..=k_max).map(|k| table.tail_mid(k).map(|tk| tn / tk)).collect::<Result<Vec<_>>>()?;
    Ok(CutpointReport::from_spoiled(k_max, CutpointMethod::Censored { n }, spoiled, first_passage, bias_bound, false))
}

/// Whether time `k` splits the path into disjoint past `{S_0..S_k}` and
/// future `{S_{k+1}..}`. Direct O(T) set check.
pub fn is_cut_time(states: &[State], k: usize) -> bool {
    let past: std::collections::HashSet<_> = states[..=k].iter().collect();
    !states[k + 1..].iter().any(|s| past.contains(s))
}

/// Strong cut times of a finite path: times `k` (with at least one later
/// state) whose past and future are disjoint and such that no transition
/// `S_i -> S_j` with `i < k < j` has positive probability.
pub fn detect_strong_cutpoints<F>(traj: &Trajectory, transition_positive: F) -> Vec<usize>
where
    F: Fn(State, State) -> bool,
{
    let s = &traj.states;
    let t = s.len();
    if t < 2 {
        return Vec::new();
    }

    // cut times via an incrementally maintained |past ∩ future|
    let mut future: HashMap<State, usize> = HashMap::new();
    for &x in s {
        *future.entry(x).or_default() += 1;
    }
    let mut in_past: HashMap<State, bool> = HashMap::new();
    let mut overlap = 0usize;
    let mut cut = vec![false; t];
    for (k, &x) in s.iter().enumerate() {
        let c = future.get_mut(&x).expect("counted");
        *c -= 1;
        if *c == 0 && in_past.contains_key(&x) {
            overlap -= 1;
        }
        if in_past.insert(x, true).is_none() && *c > 0 {
            overlap += 1;
        }
        cut[k] = overlap == 0;
    }

    // difference array over times k strictly inside a positive-probability jump
    let mut cover = vec![0i64; t + 1];
    for i in 0..t {
        for j in i + 2..t {
            if transition_positive(s[i], s[j]) {
                cover[i + 1] += 1;
                cover[j] -= 1;
            }
        }
    }
    let mut running = 0i64;
    let mut out = Vec::new();
    for k in 0..t - 1 {
        running += cover[k];
        if cut[k] && running == 0 {
            out.push(k);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resistance::{ChainLaw, ResistanceProfile};

    fn table() -> TailTable {
        TailTable::new(&ResistanceProfile::canonical(2.0).unwrap(), 256).unwrap()
    }

    #[test]
    fn hand_checked_indicators() {
        let traj = Trajectory::line(vec![1, 2, 1, 2, 3, 4, 3, 4, 5], StopRule::FirstPassage(5)).unwrap();
        let rep = detect_cutpoints_censored(&traj, 3, &table()).unwrap();
        assert_eq!(rep.indicator, vec![false, true, false]);
        assert_eq!(rep.first_passage, vec![Some(0), Some(1), Some(4)]);
        let t = table();
        assert!((rep.bias_bound[1] - t.tail_mid(5).unwrap() / t.tail_mid(2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn monotone_path_is_all_cutpoints() {
        let n = 12;
        let traj = Trajectory::line((1..=n).collect(), StopRule::FirstPassage(n)).unwrap();
        let rep = detect_cutpoints_censored(&traj, n as usize - 1, &table()).unwrap();
        assert!(rep.indicator.iter().all(|c| *c));
    }

    #[test]
    fn argument_errors() {
        let traj = Trajectory::line(vec![1, 2, 3], StopRule::FirstPassage(3)).unwrap();
        assert!(matches!(detect_cutpoints_censored(&traj, 3, &table()), Err(Error::InvalidArguments(_))));
        let horizon = Trajectory::line(vec![1, 2, 3], StopRule::Horizon(2)).unwrap();
        assert!(matches!(detect_cutpoints_censored(&horizon, 1, &table()), Err(Error::InvalidInput(_))));
        let short = Trajectory::line(vec![1, 2, 3], StopRule::FirstPassage(4)).unwrap();
        assert!(matches!(detect_cutpoints_censored(&short, 2, &table()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn strong_cut_times_on_monotone_path() {
        let law = ChainLaw::new(&ResistanceProfile::canonical(2.0).unwrap());
        let traj = Trajectory::line(vec![1, 2, 3, 4, 5], StopRule::FirstPassage(5)).unwrap();
        let strong = detect_strong_cutpoints(&traj, |a, b| law.transition_positive(a as usize, b as usize));
        assert_eq!(strong, vec![0, 1, 2, 3]);
    }

    #[test]
    fn strong_cut_times_with_backtrack() {
        let law = ChainLaw::new(&ResistanceProfile::canonical(2.0).unwrap());
        let traj = Trajectory::line(vec![1, 2, 1, 2, 3], StopRule::FirstPassage(3)).unwrap();
        let strong = detect_strong_cutpoints(&traj, |a, b| law.transition_positive(a as usize, b as usize));
        // times 0..2 revisit 1 or 2 later; at time 3 the state 2 was seen at time 1
        // and 2 -> 3 is a positive transition across it
        assert_eq!(strong, Vec::<usize>::new());
        assert!(is_cut_time(&traj.states, 3));
    }
}
