//! Overlapping group detection by k-clique percolation on directed graphs.
//!
//! A directed k-clique is a set of k nodes where every unordered pair is
//! linked in at least one direction and the one-way links admit a total
//! ordering (they contain no cycle). Two k-cliques are adjacent when they
//! share k-1 nodes; groups are the node unions of connected components of
//! that adjacency. Groups found this way may overlap.
//!
//! Enumeration walks k-cliques of the pair-connected underlying graph in
//! lexicographic order, then keeps the orientable ones. Weights play no role
//! here beyond the pruning already applied to the input graph, unless an
//! optional clique-intensity threshold is set.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::UserId;
use crate::relations::{RelationModel, SlotGraph};
use crate::{Error, Result};

/// k nodes, pairwise linked, one-way links orderable. Members are sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DirectedKClique {
    pub members: Vec<UserId>,
}

/// One overlapping group found in a single slot: the node union of a
/// connected component of k-clique adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporaryGroup {
    pub group_id: String,
    pub slot_index: usize,
    pub model: RelationModel,
    pub k: usize,
    /// Sorted member list, at least k entries.
    pub members: Vec<UserId>,
}

impl TemporaryGroup {
    fn new(slot_index: usize, model: RelationModel, k: usize, members: Vec<UserId>) -> Self {
        let group_id = group_id(slot_index, model, k, &members);
        Self {
            group_id,
            slot_index,
            model,
            k,
            members,
        }
    }

    pub fn member_set(&self) -> BTreeSet<&UserId> {
        self.members.iter().collect()
    }
}

/// Stable content hash for a group; reproducible across runs and platforms.
fn group_id(slot_index: usize, model: RelationModel, k: usize, members: &[UserId]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(slot_index.to_string());
    hasher.update([0x1f]);
    hasher.update(model.name());
    hasher.update([0x1f]);
    hasher.update(k.to_string());
    for m in members {
        hasher.update([0x1f]);
        hasher.update(m.as_str());
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Detection knobs beyond k.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CpmOptions {
    /// Keep only cliques whose geometric mean edge weight reaches this
    /// value (a bidirectional pair counts its heavier direction). Off by
    /// default: pruning by edge weight is the standard filter.
    pub intensity_threshold: Option<f64>,
}

struct IndexedGraph {
    users: Vec<UserId>,
    /// Sorted neighbor lists of the pair-connected underlying graph.
    underlying: Vec<Vec<usize>>,
    /// Directed adjacency for orientation checks.
    out: Vec<HashSet<usize>>,
    /// max(weight(u->v), weight(v->u)) keyed by unordered pair (lo, hi).
    pair_weight: HashMap<(usize, usize), f64>,
}

impl IndexedGraph {
    fn build(graph: &SlotGraph) -> Self {
        let users: Vec<UserId> = graph.nodes.iter().cloned().collect();
        let index: HashMap<&UserId, usize> =
            users.iter().enumerate().map(|(i, u)| (u, i)).collect();
        let n = users.len();
        let mut underlying_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut out: Vec<HashSet<usize>> = vec![HashSet::new(); n];
        let mut pair_weight: HashMap<(usize, usize), f64> = HashMap::new();
        for ((src, dst), &w) in &graph.edges {
            let (s, d) = (index[src], index[dst]);
            if s == d {
                continue; // self-loops cannot enter cliques
            }
            out[s].insert(d);
            underlying_sets[s].insert(d);
            underlying_sets[d].insert(s);
            let key = (s.min(d), s.max(d));
            let entry = pair_weight.entry(key).or_insert(w);
            if w > *entry {
                *entry = w;
            }
        }
        IndexedGraph {
            users,
            underlying: underlying_sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            out,
            pair_weight,
        }
    }

    /// True when the one-way links among `members` contain no cycle, i.e.
    /// some total order explains them.
    fn orientable(&self, members: &[usize]) -> bool {
        let k = members.len();
        let mut one_way = vec![false; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let (u, v) = (members[i], members[j]);
                let uv = self.out[u].contains(&v);
                let vu = self.out[v].contains(&u);
                if uv && !vu {
                    one_way[i * k + j] = true;
                } else if vu && !uv {
                    one_way[j * k + i] = true;
                }
            }
        }
        // Kahn's algorithm on <= k nodes.
        let mut indegree = vec![0usize; k];
        for i in 0..k {
            for j in 0..k {
                if one_way[i * k + j] {
                    indegree[j] += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..k).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for j in 0..k {
                if one_way[i * k + j] {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        seen == k
    }

    fn intensity(&self, members: &[usize]) -> f64 {
        let mut log_sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let key = (members[i].min(members[j]), members[i].max(members[j]));
                let w = self.pair_weight.get(&key).copied().unwrap_or(0.0);
                if w <= 0.0 {
                    return 0.0;
                }
                log_sum += w.ln();
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            (log_sum / pairs as f64).exp()
        }
    }
}

/// Enumerates every directed k-clique of the graph, sorted by member list.
pub fn enumerate_kcliques(
    graph: &SlotGraph,
    k: usize,
    options: &CpmOptions,
) -> Vec<DirectedKClique> {
    let indexed = IndexedGraph::build(graph);
    let cliques_idx = enumerate_indices(&indexed, k, options);
    cliques_idx
        .into_iter()
        .map(|members| DirectedKClique {
            members: members
                .into_iter()
                .map(|i| indexed.users[i].clone())
                .collect(),
        })
        .collect()
}

fn enumerate_indices(indexed: &IndexedGraph, k: usize, options: &CpmOptions) -> Vec<Vec<usize>> {
    assert!(k >= 2, "k-clique enumeration needs k >= 2");
    let n = indexed.users.len();
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut clique: Vec<usize> = Vec::with_capacity(k);
    for v in 0..n {
        clique.push(v);
        // Candidates after v keep enumeration lexicographic and duplicate-free.
        let cands: Vec<usize> = indexed.underlying[v]
            .iter()
            .copied()
            .filter(|&u| u > v)
            .collect();
        extend_clique(indexed, k, options, &mut clique, &cands, &mut found);
        clique.pop();
    }
    found
}

fn extend_clique(
    indexed: &IndexedGraph,
    k: usize,
    options: &CpmOptions,
    clique: &mut Vec<usize>,
    cands: &[usize],
    found: &mut Vec<Vec<usize>>,
) {
    if clique.len() == k {
        if indexed.orientable(clique) {
            if let Some(threshold) = options.intensity_threshold {
                if indexed.intensity(clique) < threshold {
                    return;
                }
            }
            found.push(clique.clone());
        }
        return;
    }
    if clique.len() + cands.len() < k {
        return;
    }
    for (pos, &u) in cands.iter().enumerate() {
        // Remaining candidates must keep the clique pairwise connected.
        let next: Vec<usize> = cands[pos + 1..]
            .iter()
            .copied()
            .filter(|w| indexed.underlying[u].binary_search(w).is_ok())
            .collect();
        clique.push(u);
        extend_clique(indexed, k, options, clique, &next, found);
        clique.pop();
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Percolates k-cliques into groups: cliques sharing k-1 members are
/// adjacent; each connected component's node union is one group.
pub fn percolate(
    cliques: &[DirectedKClique],
    slot_index: usize,
    model: RelationModel,
    k: usize,
) -> Vec<TemporaryGroup> {
    if cliques.is_empty() {
        return Vec::new();
    }
    // Cliques sharing a (k-1)-subset are exactly the adjacent ones, so one
    // pass over subsets replaces the quadratic pairwise overlap test.
    let mut by_subset: HashMap<Vec<&UserId>, Vec<usize>> = HashMap::new();
    for (idx, clique) in cliques.iter().enumerate() {
        for skip in 0..clique.members.len() {
            let subset: Vec<&UserId> = clique
                .members
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, m)| m)
                .collect();
            by_subset.entry(subset).or_default().push(idx);
        }
    }
    let mut uf = UnionFind::new(cliques.len());
    for sharing in by_subset.values() {
        for window in sharing.windows(2) {
            uf.union(window[0], window[1]);
        }
    }
    let mut components: HashMap<usize, BTreeSet<UserId>> = HashMap::new();
    for (idx, clique) in cliques.iter().enumerate() {
        let root = uf.find(idx);
        components
            .entry(root)
            .or_default()
            .extend(clique.members.iter().cloned());
    }
    // Distinct components can in principle union to the same node set;
    // groups are a set keyed by members.
    let unique: BTreeSet<Vec<UserId>> = components
        .into_values()
        .map(|members| members.into_iter().collect())
        .collect();
    unique
        .into_iter()
        .map(|members| TemporaryGroup::new(slot_index, model, k, members))
        .collect()
}

/// Full per-slot detection: enumerate directed k-cliques, percolate, sort.
pub fn detect(graph: &SlotGraph, k: usize, options: &CpmOptions) -> Result<Vec<TemporaryGroup>> {
    if k < 3 {
        return Err(Error::Config(format!("k must be at least 3, got {k}")));
    }
    let cliques = enumerate_kcliques(graph, k, options);
    Ok(percolate(&cliques, graph.slot_index, graph.model, k))
}

/// Canonical artifact name for one slot's groups.
pub fn groups_file_name(slot_index: usize, model: RelationModel, k: usize) -> String {
    format!("groups_{slot_index}_{model}_k{k}.ndjson")
}

/// Writes groups as NDJSON, one group per line, already sorted by members.
pub fn write_groups_ndjson<W: Write>(groups: &[TemporaryGroup], mut writer: W) -> Result<()> {
    for group in groups {
        let line = serde_json::to_string(group)
            .map_err(|e| Error::Domain(format!("group serialize: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| Error::Domain(format!("group write: {e}")))?;
    }
    Ok(())
}

/// Reads groups written by [`write_groups_ndjson`].
pub fn read_groups_ndjson<R: Read>(reader: R) -> Result<Vec<TemporaryGroup>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true))
        .map(|(idx, line)| {
            let line = line.map_err(|e| Error::Domain(format!("groups line {}: {e}", idx + 1)))?;
            serde_json::from_str(&line)
                .map_err(|e| Error::Domain(format!("groups line {}: {e}", idx + 1)))
        })
        .collect()
}
