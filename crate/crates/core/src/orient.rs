//! Orientation of a discovered skeleton into a CPDAG: v-structures from the
//! separating sets, then Meek rules R1-R4 to a fixed point.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::{AdjacencyMatrix, SeparationSets};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrientError {
    #[error("non-adjacent pair ({0}, {1}) has no separating set")]
    MissingSepset(usize, usize),
    #[error("sepset dimension mismatch: pair ({0}, {1}) outside {2} variables")]
    OutOfRange(usize, usize, usize),
}

/// Partially directed graph. `directed` holds `(from, to)`; `undirected`
/// holds `(lo, hi)` with `lo < hi`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MixedGraph {
    n: usize,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl MixedGraph {
    pub fn new(n: usize) -> Self {
        Self { n, ..Default::default() }
    }

    pub fn from_skeleton(skeleton: &AdjacencyMatrix) -> Self {
        Self { n: skeleton.dim(), directed: BTreeSet::new(), undirected: skeleton.edges().into_iter().collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.directed.remove(&(a, b));
        self.directed.remove(&(b, a));
        self.undirected.insert(pair(a, b));
    }

    /// Makes `a -> b`, replacing whatever edge joined the pair.
    pub fn add_directed(&mut self, a: usize, b: usize) {
        self.undirected.remove(&pair(a, b));
        self.directed.remove(&(b, a));
        self.directed.insert((a, b));
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&pair(a, b))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_undirected(a, b) || self.has_directed(a, b) || self.has_directed(b, a)
    }

    /// Every adjacency as an unordered pair.
    pub fn skeleton_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.undirected.iter().copied().chain(self.directed.iter().map(|&(a, b)| pair(a, b))).collect()
    }

    fn parents(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.directed.iter().filter(move |&&(_, to)| to == b).map(|&(from, _)| from)
    }

    fn children(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.directed.range((a, 0)..(a + 1, 0)).map(|&(_, to)| to)
    }

    fn undirected_neighbors(&self, a: usize) -> Vec<usize> {
        self.undirected
            .iter()
            .filter_map(|&(x, y)| {
                if x == a {
                    Some(y)
                } else if y == a {
                    Some(x)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Whether some Meek rule forces `a -> b` for the undirected edge `a - b`.
    fn forced(&self, a: usize, b: usize) -> bool {
        // R1: c -> a, c and b non-adjacent.
        if self.parents(a).any(|c| c != b && !self.adjacent(c, b)) {
            return true;
        }
        // R2: a -> c -> b.
        if self.children(a).any(|c| self.has_directed(c, b)) {
            return true;
        }
        let und_a = self.undirected_neighbors(a);
        // R3: a - c -> b, a - d -> b, c and d non-adjacent.
        let into_b: Vec<usize> = und_a.iter().copied().filter(|&c| c != b && self.has_directed(c, b)).collect();
        for (x, &c) in into_b.iter().enumerate() {
            if into_b[x + 1..].iter().any(|&d| !self.adjacent(c, d)) {
                return true;
            }
        }
        // R4: a - c -> d -> b, c and b non-adjacent, a adjacent to d.
        for &c in und_a.iter().filter(|&&c| c != b && !self.adjacent(c, b)) {
            if self.children(c).any(|d| d != a && self.has_directed(d, b) && self.adjacent(a, d)) {
                return true;
            }
        }
        false
    }
}

/// Orients `i -> k <- j` for every unshielded triple `i - k - j` whose
/// separating set excludes `k`. An edge voted in both directions stays
/// undirected.
pub fn find_v_structures(skeleton: &AdjacencyMatrix, sepsets: &SeparationSets) -> Result<MixedGraph, OrientError> {
    let n = skeleton.dim();
    let mut votes: BTreeSet<(usize, usize)> = BTreeSet::new();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|k| skeleton.neighbors(k).collect()).collect();
    for i in 0..n {
        for j in i + 1..n {
            if skeleton.has_edge(i, j) {
                continue;
            }
            let common: Vec<usize> = neighbors[i].iter().copied().filter(|&k| skeleton.has_edge(k, j)).collect();
            if common.is_empty() {
                continue;
            }
            let sep = sepsets.get(i, j).ok_or(OrientError::MissingSepset(i, j))?;
            for k in common {
                if !sep.contains(&k) {
                    votes.insert((i, k));
                    votes.insert((j, k));
                }
            }
        }
    }
    let mut g = MixedGraph::from_skeleton(skeleton);
    for &(a, b) in &votes {
        if !votes.contains(&(b, a)) {
            g.add_directed(a, b);
        }
    }
    Ok(g)
}

/// Applies R1-R4 in synchronous rounds: every orientation forced by the
/// current graph is collected first, pairs forced both ways are left alone,
/// and the rest are applied together. Repeats until nothing changes.
pub fn apply_meek_rules(g: &MixedGraph) -> MixedGraph {
    let mut g = g.clone();
    loop {
        let mut proposals = BTreeSet::new();
        for &(x, y) in &g.undirected {
            if g.forced(x, y) {
                proposals.insert((x, y));
            }
            if g.forced(y, x) {
                proposals.insert((y, x));
            }
        }
        let accepted: Vec<(usize, usize)> =
            proposals.iter().copied().filter(|&(a, b)| !proposals.contains(&(b, a))).collect();
        if accepted.is_empty() {
            return g;
        }
        for (a, b) in accepted {
            g.add_directed(a, b);
        }
    }
}

/// v-structures followed by Meek propagation.
pub fn to_cpdag(skeleton: &AdjacencyMatrix, sepsets: &SeparationSets) -> Result<MixedGraph, OrientError> {
    Ok(apply_meek_rules(&find_v_structures(skeleton, sepsets)?))
}
