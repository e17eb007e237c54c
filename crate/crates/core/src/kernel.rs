//! Transition kernels shared by the stack machine and the tree walks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::resistance::ChainLaw;
use crate::rng::Rng;
use crate::trajectory::State;

/// A Markov transition kernel on integer-labelled states.
pub trait Kernel: Send + Sync {
    /// Draws a successor of `x`.
    fn sample_next(&self, x: State, rng: &mut Rng) -> Result<State>;

    /// One-step transition probability `p(x, y)`.
    fn transition_prob(&self, x: State, y: State) -> f64;
}

impl Kernel for ChainLaw {
    fn sample_next(&self, x: State, rng: &mut Rng) -> Result<State> {
        let up = self.up(x as usize)?;
        let u: f64 = rng.random();
        Ok(if u < up { x + 1 } else { x - 1 })
    }

    fn transition_prob(&self, x: State, y: State) -> f64 {
        let (x, y) = (x as usize, y as usize);
        if !self.transition_positive(x, y) {
            0.0
        } else if y == x + 1 {
            self.up_unchecked(x)
        } else {
            self.down_unchecked(x)
        }
    }
}

/// A chain on finitely many states given by explicit transition rows.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    rows: BTreeMap<State, Vec<(State, f64)>>,
}

impl FiniteChain {
    /// Rows must have positive entries summing to 1 (within 1e-12).
    /// States without a row have no successors and can only be stop states.
    pub fn new(rows: BTreeMap<State, Vec<(State, f64)>>) -> Result<Self> {
        for (x, row) in &rows {
            if row.is_empty() || row.iter().any(|(_, p)| !(*p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidInput(format!("row {x} needs positive probabilities")));
            }
            let s: f64 = row.iter().map(|(_, p)| p).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("row {x} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn row(&self, x: State) -> Option<&[(State, f64)]> {
        self.rows.get(&x).map(Vec::as_slice)
    }

    /// Paths from `x0` absorbed at `y`, in decreasing order of probability,
    /// until their total probability reaches `mass`. Stops early (returning
    /// what it has) once `max_paths` paths have been listed.
    pub fn most_likely_paths(&self, x0: State, y: State, mass: f64, max_paths: usize) -> Vec<(Vec<State>, f64)> {
        #[derive(PartialEq)]
        struct Node(f64, Vec<State>);
        impl Eq for Node {}
        impl PartialOrd for Node {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Node {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut heap = BinaryHeap::new();
        heap.push(Node(1.0, vec![x0]));
        let mut out = Vec::new();
        let mut total = 0.0;
        // Best-first: a complete path pops before any extension of a less
        // likely prefix, so paths come out in decreasing probability.
        while let Some(Node(p, path)) = heap.pop() {
            let x = *path.last().expect("non-empty");
            if x == y {
                total += p;
                out.push((path, p));
                if total >= mass || out.len() >= max_paths {
                    break;
                }
                continue;
            }
            if let Some(row) = self.rows.get(&x) {
                for &(z, q) in row {
                    let mut next = path.clone();
                    next.push(z);
                    heap.push(Node(p * q, next));
                }
            }
        }
        out
    }
}

impl Kernel for FiniteChain {
    fn sample_next(&self, x: State, rng: &mut Rng) -> Result<State> {
        let row = self.rows.get(&x).ok_or_else(|| Error::InvalidInput(format!("state {x} has no successors")))?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(y, p) in row {
            acc += p;
            if u < acc {
                return Ok(y);
            }
        }
        Ok(row.last().expect("non-empty").0)
    }

    fn transition_prob(&self, x: State, y: State) -> f64 {
        self.rows.get(&x).and_then(|row| row.iter().find(|(z, _)| *z == y)).map_or(0.0, |(_, p)| *p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FiniteChain {
        let mut rows = BTreeMap::new();
        rows.insert(0, vec![(1, 0.5), (2, 0.5)]);
        rows.insert(1, vec![(0, 0.5), (2, 0.5)]);
        FiniteChain::new(rows).unwrap()
    }

    #[test]
    fn path_enumeration_is_ordered_and_sums() {
        let c = small();
        let paths = c.most_likely_paths(0, 2, 0.999, 10_000);
        assert_eq!(paths[0], (vec![0, 2], 0.5));
        assert!(paths.windows(2).all(|w| w[0].1 >= w[1].1));
        let total: f64 = paths.iter().map(|p| p.1).sum();
        assert!(total >= 0.999);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut rows = BTreeMap::new();
        rows.insert(0, vec![(1, 0.5), (2, 0.4)]);
        assert!(FiniteChain::new(rows).is_err());
    }
}
