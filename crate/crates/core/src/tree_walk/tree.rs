use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::Rng;
use crate::trajectory::State;

/// A finite tree with positive edge weights (conductances).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    adjacency: BTreeMap<State, Vec<(State, f64)>>,
}

impl Tree {
    /// Builds a tree from weighted edges. A tree on a single vertex is given
    /// by an empty edge list together with `isolated`.
    pub fn new(edges: &[(State, State, f64)], isolated: Option<State>) -> Result<Self> {
        let mut adjacency: BTreeMap<State, Vec<(State, f64)>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for &(u, v, w) in edges {
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("edge {u}-{v} has non-positive weight {w}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidInput(format!("duplicate edge {u}-{v}")));
            }
            adjacency.entry(u).or_default().push((v, w));
            adjacency.entry(v).or_default().push((u, w));
        }
        if edges.is_empty() {
            let x = isolated.ok_or_else(|| Error::InvalidInput("empty tree".into()))?;
            adjacency.insert(x, Vec::new());
        }
        for nbrs in adjacency.values_mut() {
            nbrs.sort_by_key(|(v, _)| *v);
        }
        if edges.len() + 1 != adjacency.len() {
            return Err(Error::InvalidInput(format!(
                "{} edges on {} vertices: not a tree",
                edges.len(),
                adjacency.len()
            )));
        }
        let tree = Self { adjacency };
        let first = *tree.adjacency.keys().next().expect("non-empty");
        if tree.distances_from(first).len() != tree.adjacency.len() {
            return Err(Error::InvalidInput("graph is disconnected".into()));
        }
        Ok(tree)
    }

    /// Unit-weight path `1 - 2 - ... - n`.
    pub fn path(n: State) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1, 1.0)).collect();
        Self::new(&edges, Some(1))
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn contains(&self, x: State) -> bool {
        self.adjacency.contains_key(&x)
    }

    pub fn vertices(&self) -> impl Iterator<Item = State> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn neighbors(&self, x: State) -> impl Iterator<Item = State> + '_ {
        self.adjacency.get(&x).into_iter().flatten().map(|(v, _)| *v)
    }

    pub fn degree(&self, x: State) -> usize {
        self.adjacency.get(&x).map_or(0, Vec::len)
    }

    pub fn are_adjacent(&self, x: State, y: State) -> bool {
        self.neighbors(x).any(|v| v == y)
    }

    pub fn edges(&self) -> impl Iterator<Item = (State, State, f64)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&u, nbrs)| nbrs.iter().filter(move |(v, _)| u < *v).map(move |&(v, w)| (u, v, w)))
    }

    /// BFS parent pointers toward `root` (`parent[root] = root`).
    pub fn parents_toward(&self, root: State) -> BTreeMap<State, State> {
        let mut parent = BTreeMap::new();
        parent.insert(root, root);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for v in self.neighbors(x) {
                if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(v) {
                    e.insert(x);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    fn distances_from(&self, root: State) -> BTreeMap<State, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(root, 0);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for v in self.neighbors(x) {
                dist.entry(v).or_insert_with(|| {
                    queue.push_back(v);
                    d + 1
                });
            }
        }
        dist
    }

    /// Unique path from `a` to `b`, inclusive.
    pub fn path_between(&self, a: State, b: State) -> Option<Vec<State>> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let parent = self.parents_toward(b);
        let mut path = vec![a];
        let mut x = a;
        while x != b {
            x = parent[&x];
            path.push(x);
        }
        Some(path)
    }
}

impl Kernel for Tree {
    fn sample_next(&self, x: State, rng: &mut Rng) -> Result<State> {
        let nbrs = self
            .adjacency
            .get(&x)
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::InvalidInput(format!("vertex {x} has no neighbors")))?;
        let total: f64 = nbrs.iter().map(|(_, w)| w).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for &(v, w) in nbrs {
            acc += w;
            if u < acc {
                return Ok(v);
            }
        }
        Ok(nbrs.last().expect("non-empty").0)
    }

    fn transition_prob(&self, x: State, y: State) -> f64 {
        let Some(nbrs) = self.adjacency.get(&x) else { return 0.0 };
        let total: f64 = nbrs.iter().map(|(_, w)| w).sum();
        nbrs.iter().find(|(v, _)| *v == y).map_or(0.0, |(_, w)| w / total)
    }
}

/// A tree together with the walk's start and absorbing vertex, as read from
/// the text format.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    pub tree: Tree,
    pub root: State,
    pub absorb: Option<State>,
}

/// Parses the edge-list tree format:
///
/// ```text
/// # comment
/// root 1
/// absorb 7
/// 1 2
/// 2 3 0.5
/// ```
///
/// Each edge line is `u v [weight]` (default weight 1). `root` is required;
/// `absorb` is optional. Blank lines and text after `#` are ignored.
pub fn parse_tree(text: &str) -> Result<TreeSpec> {
    let mut root = None;
    let mut absorb = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::InvalidInput(format!("line {}: {what}: {raw:?}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let vertex = |s: &str| s.parse::<State>().map_err(|_| bad("bad vertex id"));
        match fields.as_slice() {
            ["root", x] => root = Some(vertex(x)?),
            ["absorb", y] => absorb = Some(vertex(y)?),
            [u, v] => edges.push((vertex(u)?, vertex(v)?, 1.0)),
            [u, v, w] => {
                let w: f64 = w.parse().map_err(|_| bad("bad weight"))?;
                edges.push((vertex(u)?, vertex(v)?, w));
            }
            _ => return Err(bad("expected `root x`, `absorb y` or `u v [weight]`")),
        }
    }
    let root = root.ok_or_else(|| Error::InvalidInput("missing `root` line".into()))?;
    let tree = Tree::new(&edges, Some(root))?;
    if !tree.contains(root) {
        return Err(Error::InvalidInput(format!("root {root} is not a vertex")));
    }
    if let Some(y) = absorb {
        if !tree.contains(y) {
            return Err(Error::InvalidInput(format!("absorbing vertex {y} is not a vertex")));
        }
    }
    Ok(TreeSpec { tree, root, absorb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_disconnected() {
        let cycle = [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)];
        assert!(Tree::new(&cycle, None).is_err());
        let forest = [(1, 2, 1.0), (3, 4, 1.0), (5, 6, 1.0)];
        assert!(Tree::new(&forest, None).is_err());
        // right edge count, but a cycle plus an isolated component
        let tricky = [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0), (4, 5, 1.0)];
        assert!(Tree::new(&tricky, None).is_err());
        assert!(Tree::new(&[(1, 2, 0.0)], None).is_err());
    }

    #[test]
    fn parse_round_trip() {
        let text = "# demo\nroot 1\nabsorb 3\n1 2\n2 3 0.5\n\n2 4 2 # heavy\n";
        let spec = parse_tree(text).unwrap();
        assert_eq!(spec.root, 1);
        assert_eq!(spec.absorb, Some(3));
        assert_eq!(spec.tree.len(), 4);
        assert!((spec.tree.transition_prob(2, 4) - 2.0 / 3.5).abs() < 1e-15);
        assert!(parse_tree("1 2\n").is_err());
        assert!(parse_tree("root 9\n1 2\n").is_err());
        assert!(parse_tree("root 1\n1 2 x\n").is_err());
    }

    #[test]
    fn path_between_vertices() {
        let t = Tree::new(&[(1, 2, 1.0), (2, 3, 1.0), (2, 4, 1.0)], None).unwrap();
        assert_eq!(t.path_between(1, 4).unwrap(), vec![1, 2, 4]);
        assert_eq!(t.path_between(3, 3).unwrap(), vec![3]);
    }
}
