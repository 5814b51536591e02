#![allow(dead_code)] // each test binary uses a different subset

//! Shared test helpers: brute-force percolation oracles and random graph
//! generation. The oracles enumerate all k-subsets and test the ordering
//! condition by exhausting permutations, taking none of the shortcuts the
//! library takes, so agreement is meaningful.

use std::collections::BTreeSet;

use percolate_core::cpm::{self, CpmOptions};
use percolate_core::ingest::UserId;
use percolate_core::relations::{RelationModel, SlotGraph};
use rand::Rng;

/// Directed adjacency matrix for up to 16 nodes: bit j of `out[i]` is the
/// edge i -> j.
#[derive(Debug, Clone)]
pub struct DenseDigraph {
    pub n: usize,
    pub out: Vec<u16>,
}

impl DenseDigraph {
    pub fn new(n: usize) -> Self {
        assert!(n <= 16);
        Self { n, out: vec![0; n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        if from != to {
            self.out[from] |= 1 << to;
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.out[from] & (1 << to) != 0
    }

    pub fn random<R: Rng>(rng: &mut R, n: usize, edge_prob: f64) -> Self {
        let mut g = Self::new(n);
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.random_bool(edge_prob) {
                    g.add_edge(from, to);
                }
            }
        }
        g
    }

    /// Every edge made bidirectional.
    pub fn symmetrized(&self) -> Self {
        let mut g = Self::new(self.n);
        for from in 0..self.n {
            for to in 0..self.n {
                if self.has_edge(from, to) {
                    g.add_edge(from, to);
                    g.add_edge(to, from);
                }
            }
        }
        g
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for from in 0..self.n {
            for to in 0..self.n {
                if self.has_edge(from, to) {
                    edges.push((from, to));
                }
            }
        }
        edges
    }
}

fn uid(i: usize) -> UserId {
    UserId::new(&format!("n{i:02}")).unwrap()
}

/// Library-side graph for the same digraph (all weights 1).
pub fn to_slot_graph(g: &DenseDigraph) -> SlotGraph {
    let mut graph = SlotGraph::empty(0, RelationModel::CommentNoSentiment);
    for i in 0..g.n {
        graph.nodes.insert(uid(i));
    }
    for (from, to) in g.edges() {
        graph.edges.insert((uid(from), uid(to)), 1.0);
    }
    graph
}

/// Library detection result as sorted index sets.
pub fn detect_indices(g: &DenseDigraph, k: usize) -> BTreeSet<Vec<usize>> {
    let graph = to_slot_graph(g);
    cpm::detect(&graph, k, &CpmOptions::default())
        .unwrap()
        .into_iter()
        .map(|group| {
            group
                .members
                .iter()
                .map(|m| m.as_str()[1..].parse::<usize>().unwrap())
                .collect()
        })
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for v in start..n {
            if n - v < k - current.len() {
                break;
            }
            current.push(v);
            rec(v + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// A subset is a directed k-clique iff every pair is linked some way and
/// some permutation v1..vk has the edge vj -> vi for every i < j.
fn is_directed_clique(g: &DenseDigraph, members: &[usize]) -> bool {
    for (idx, &u) in members.iter().enumerate() {
        for &v in &members[idx + 1..] {
            if !g.has_edge(u, v) && !g.has_edge(v, u) {
                return false;
            }
        }
    }
    permutations(members).into_iter().any(|perm| {
        for j in 1..perm.len() {
            for i in 0..j {
                if !g.has_edge(perm[j], perm[i]) {
                    return false;
                }
            }
        }
        true
    })
}

/// Undirected variant: pairwise linked in either direction, no ordering
/// requirement.
fn is_undirected_clique(g: &DenseDigraph, members: &[usize]) -> bool {
    for (idx, &u) in members.iter().enumerate() {
        for &v in &members[idx + 1..] {
            if !g.has_edge(u, v) && !g.has_edge(v, u) {
                return false;
            }
        }
    }
    true
}

fn percolate_cliques(cliques: Vec<Vec<usize>>) -> BTreeSet<Vec<usize>> {
    let count = cliques.len();
    let mut parent: Vec<usize> = (0..count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..count {
        for j in (i + 1)..count {
            let shared = cliques[i].iter().filter(|v| cliques[j].contains(v)).count();
            if shared + 1 == cliques[i].len() {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, BTreeSet<usize>> =
        std::collections::HashMap::new();
    for (i, clique) in cliques.iter().enumerate() {
        let root = find(&mut parent, i);
        groups
            .entry(root)
            .or_default()
            .extend(clique.iter().copied());
    }
    groups
        .into_values()
        .map(|set| set.into_iter().collect())
        .collect()
}

/// Brute-force directed k-clique percolation.
pub fn oracle_directed(g: &DenseDigraph, k: usize) -> BTreeSet<Vec<usize>> {
    let cliques: Vec<Vec<usize>> = combinations(g.n, k)
        .into_iter()
        .filter(|subset| is_directed_clique(g, subset))
        .collect();
    percolate_cliques(cliques)
}

/// Brute-force undirected k-clique percolation over the pair-connected
/// underlying graph.
pub fn oracle_undirected(g: &DenseDigraph, k: usize) -> BTreeSet<Vec<usize>> {
    let cliques: Vec<Vec<usize>> = combinations(g.n, k)
        .into_iter()
        .filter(|subset| is_undirected_clique(g, subset))
        .collect();
    percolate_cliques(cliques)
}
