use std::collections::HashMap;

use super::{State, Trajectory};
use crate::error::{Error, Result};

/// Chronological loop-erasure of a finite path: `L_0 = S_0` and `L_j` is the
/// state visited right after the last visit to `L_{j-1}`, ending at the
/// final state. Returns the erased path and the last-visit time of each
/// of its entries.
pub fn loop_erasure(states: &[State]) -> (Vec<State>, Vec<usize>) {
    let mut last: HashMap<State, usize> = HashMap::with_capacity(states.len().min(1 << 16));
    for (t, &x) in states.iter().enumerate() {
        last.insert(x, t);
    }
    let mut erased = Vec::new();
    let mut times = Vec::new();
    let mut t = 0;
    loop {
        let x = states[t];
        let lt = last[&x];
        erased.push(x);
        times.push(lt);
        if lt + 1 == states.len() {
            break;
        }
        t = lt + 1;
    }
    (erased, times)
}

/// Replaces the beginning of the path with its loop-erased prefix
/// `L_0, ..., L_n` and continues with the steps after the last visit to
/// `L_n`, so that `L_0, ..., L_n` become cutpoints of the new path.
pub fn splice_to_cutpoints(traj: &Trajectory, n: usize) -> Result<Trajectory> {
    if traj.states.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let (erased, last_visit) = loop_erasure(&traj.states);
    if n >= erased.len() {
        return Err(Error::InsufficientData(format!(
            "loop-erasure has {} states, cannot splice {} of them",
            erased.len(),
            n + 1
        )));
    }
    let k_n = last_visit[n];
    let mut states = Vec::with_capacity(n + 1 + traj.states.len() - k_n - 1);
    states.extend_from_slice(&erased[..=n]);
    states.extend_from_slice(&traj.states[k_n + 1..]);
    Ok(Trajectory { states, ..traj.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::StopRule;

    #[test]
    fn loop_erasure_of_backtracking_path() {
        let (l, times) = loop_erasure(&[1, 2, 1, 2, 3, 4, 3, 4, 5]);
        assert_eq!(l, vec![1, 2, 3, 4, 5]);
        assert_eq!(times, vec![2, 3, 6, 7, 8]);
    }

    #[test]
    fn splice_hand_example() {
        let traj = Trajectory::line(vec![1, 2, 1, 2, 3, 2, 3, 4], StopRule::FirstPassage(4)).unwrap();
        // k_0 = 2, the last visit to 1
        let out = splice_to_cutpoints(&traj, 0).unwrap();
        assert_eq!(out.states, vec![1, 2, 3, 2, 3, 4]);
        // k_1 = 5, the last visit to 2
        let out = splice_to_cutpoints(&traj, 1).unwrap();
        assert_eq!(out.states, vec![1, 2, 3, 4]);
    }

    #[test]
    fn loop_free_path_is_unchanged() {
        let traj = Trajectory::line(vec![1, 2, 3, 4, 5], StopRule::FirstPassage(5)).unwrap();
        for n in 0..5 {
            assert_eq!(splice_to_cutpoints(&traj, n).unwrap(), traj);
        }
        assert!(matches!(splice_to_cutpoints(&traj, 5), Err(Error::InsufficientData(_))));
    }
}
