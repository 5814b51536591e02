//! Chaining per-slot groups into stable groups across consecutive slots.
//!
//! Two groups from consecutive slots match when their modified Jaccard
//! similarity (intersection size over the *smaller* group size, i.e. the
//! larger of the two intersection ratios) reaches the configured threshold.
//! Matched groups chain up; a chain alive for at least `ltmin` slots is a
//! stable group.
//!
//! Matching is exclusive: each group extends at most one chain and each
//! chain picks at most one successor. Conflicts are resolved best-first by
//! similarity, then larger successor, then lexicographic member list, so
//! chain assembly is deterministic.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cpm::TemporaryGroup;
use crate::ingest::UserId;
use crate::relations::RelationModel;
use crate::{Error, Result};

/// Matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Minimum modified Jaccard similarity for two groups to match.
    pub jaccard_threshold: f64,
    /// Minimum chain length (in slots) for a chain to count as stable.
    pub ltmin: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            jaccard_threshold: 0.5,
            ltmin: 3,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "jaccard_threshold {} outside (0, 1]",
                self.jaccard_threshold
            )));
        }
        if self.ltmin < 1 {
            return Err(Error::Config("ltmin must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a matched pair relates to the rest of the matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionEvent {
    /// One-to-one match.
    Continue,
    /// The predecessor matched several successors.
    Split,
    /// The successor matched several predecessors.
    Merge,
}

/// Intersection size of two sorted member lists.
fn intersection_size(a: &[UserId], b: &[UserId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Modified Jaccard: `max(|a ∩ b| / |a|, |a ∩ b| / |b|)`.
///
/// Inputs are sorted member lists; empty inputs are a domain error.
pub fn modified_jaccard(a: &[UserId], b: &[UserId]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("modified Jaccard of an empty set".into()));
    }
    debug_assert!(a.windows(2).all(|w| w[0] < w[1]), "members must be sorted");
    debug_assert!(b.windows(2).all(|w| w[0] < w[1]), "members must be sorted");
    let common = intersection_size(a, b) as f64;
    Ok((common / a.len() as f64).max(common / b.len() as f64))
}

/// Classical Jaccard: `|a ∩ b| / |a ∪ b|`. Used by the stability measure.
pub fn classical_jaccard(a: &[UserId], b: &[UserId]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Jaccard of an empty set".into()));
    }
    let common = intersection_size(a, b);
    let union = a.len() + b.len() - common;
    Ok(common as f64 / union as f64)
}

/// One above-threshold pair between consecutive slots. Indices are positions
/// in the two input group lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMatch {
    pub from: usize,
    pub to: usize,
    pub similarity: f64,
    pub event: TransitionEvent,
}

/// All matched pairs between the groups of slot t and slot t+1.
///
/// Labels reflect the full above-threshold matching: a predecessor with
/// several successors yields `Split` pairs, a successor with several
/// predecessors `Merge` pairs (split wins when both apply), the rest
/// `Continue`.
pub fn match_slots(
    groups_t: &[TemporaryGroup],
    groups_next: &[TemporaryGroup],
    config: &MatchConfig,
) -> Result<Vec<GroupMatch>> {
    config.validate()?;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    let mut out_degree = vec![0usize; groups_t.len()];
    let mut in_degree = vec![0usize; groups_next.len()];
    for (i, g) in groups_t.iter().enumerate() {
        for (j, h) in groups_next.iter().enumerate() {
            let similarity = modified_jaccard(&g.members, &h.members)?;
            if similarity >= config.jaccard_threshold {
                pairs.push((i, j, similarity));
                out_degree[i] += 1;
                in_degree[j] += 1;
            }
        }
    }
    Ok(pairs
        .into_iter()
        .map(|(from, to, similarity)| GroupMatch {
            from,
            to,
            similarity,
            event: if out_degree[from] > 1 {
                TransitionEvent::Split
            } else if in_degree[to] > 1 {
                TransitionEvent::Merge
            } else {
                TransitionEvent::Continue
            },
        })
        .collect())
}

/// One slot's worth of a stable group's chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub slot_index: usize,
    pub group_id: String,
    pub members: Vec<UserId>,
    /// Similarity of the transition that led here (absent on the first entry).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_event: Option<TransitionEvent>,
}

/// A chain of matched groups over at least `ltmin` consecutive slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableGroup {
    pub stable_id: String,
    pub model: RelationModel,
    pub k: usize,
    pub lifespan: usize,
    pub chain: Vec<ChainEntry>,
}

impl StableGroup {
    pub fn first_slot(&self) -> usize {
        self.chain.first().map(|e| e.slot_index).unwrap_or(0)
    }

    pub fn last_slot(&self) -> usize {
        self.chain.last().map(|e| e.slot_index).unwrap_or(0)
    }

    /// The chain entry active in `slot`, if any.
    pub fn entry_at(&self, slot: usize) -> Option<&ChainEntry> {
        if slot < self.first_slot() || slot > self.last_slot() {
            return None;
        }
        self.chain.get(slot - self.first_slot())
    }
}

fn stable_id(model: RelationModel, k: usize, chain: &[ChainEntry]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.name());
    hasher.update([0x1f]);
    hasher.update(k.to_string());
    for entry in chain {
        hasher.update([0x1f]);
        hasher.update(&entry.group_id);
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Assembles maximal chains over the per-slot group lists (index = slot)
/// and keeps those spanning at least `ltmin` slots.
///
/// Matching per transition is globally best-first, ordered by descending
/// similarity, then larger successor, then successor members, then larger
/// predecessor, then predecessor members. Every group joins at most one
/// chain; unmatched groups start fresh chains.
pub fn build_stable_groups(
    per_slot_groups: &[Vec<TemporaryGroup>],
    config: &MatchConfig,
    model: RelationModel,
    k: usize,
) -> Result<Vec<StableGroup>> {
    config.validate()?;
    let mut chains: Vec<Vec<ChainEntry>> = Vec::new();
    // chain id owning each group of the current slot
    let mut tail_of: HashMap<usize, usize> = HashMap::new();

    for (slot, groups) in per_slot_groups.iter().enumerate() {
        let mut next_tail: HashMap<usize, usize> = HashMap::new();
        let mut claimed_to: HashSet<usize> = HashSet::new();

        if slot > 0 {
            let prev = &per_slot_groups[slot - 1];
            let mut matches = match_slots(prev, groups, config)?;
            matches.sort_by(|a, b| {
                b.similarity
                    .partial_cmp(&a.similarity)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| groups[b.to].members.len().cmp(&groups[a.to].members.len()))
                    .then_with(|| groups[a.to].members.cmp(&groups[b.to].members))
                    .then_with(|| prev[b.from].members.len().cmp(&prev[a.from].members.len()))
                    .then_with(|| prev[a.from].members.cmp(&prev[b.from].members))
            });
            let mut claimed_from: HashSet<usize> = HashSet::new();
            for m in matches {
                if claimed_from.contains(&m.from) || claimed_to.contains(&m.to) {
                    continue;
                }
                claimed_from.insert(m.from);
                claimed_to.insert(m.to);
                let chain_id = tail_of[&m.from];
                chains[chain_id].push(ChainEntry {
                    slot_index: slot,
                    group_id: groups[m.to].group_id.clone(),
                    members: groups[m.to].members.clone(),
                    link_similarity: Some(m.similarity),
                    link_event: Some(m.event),
                });
                next_tail.insert(m.to, chain_id);
            }
        }

        for (idx, group) in groups.iter().enumerate() {
            if claimed_to.contains(&idx) {
                continue;
            }
            let chain_id = chains.len();
            chains.push(vec![ChainEntry {
                slot_index: slot,
                group_id: group.group_id.clone(),
                members: group.members.clone(),
                link_similarity: None,
                link_event: None,
            }]);
            next_tail.insert(idx, chain_id);
        }
        tail_of = next_tail;
    }

    let mut stable: Vec<StableGroup> = chains
        .into_iter()
        .filter(|chain| chain.len() >= config.ltmin)
        .map(|chain| StableGroup {
            stable_id: stable_id(model, k, &chain),
            model,
            k,
            lifespan: chain.len(),
            chain,
        })
        .collect();
    stable.sort_by(|a, b| {
        a.first_slot()
            .cmp(&b.first_slot())
            .then_with(|| a.chain[0].members.cmp(&b.chain[0].members))
    });
    Ok(stable)
}

/// Canonical artifact name for one model's stable groups.
pub fn stable_file_name(model: RelationModel, k: usize) -> String {
    format!("stable_groups_{model}_k{k}.ndjson")
}

pub fn write_stable_ndjson<W: Write>(groups: &[StableGroup], mut writer: W) -> Result<()> {
    for group in groups {
        let line = serde_json::to_string(group)
            .map_err(|e| Error::Domain(format!("stable group serialize: {e}")))?;
        writeln!(writer, "{line}")
            .map_err(|e| Error::Domain(format!("stable group write: {e}")))?;
    }
    Ok(())
}

pub fn read_stable_ndjson<R: Read>(reader: R) -> Result<Vec<StableGroup>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true))
        .map(|(idx, line)| {
            let line = line.map_err(|e| Error::Domain(format!("stable line {}: {e}", idx + 1)))?;
            serde_json::from_str(&line)
                .map_err(|e| Error::Domain(format!("stable line {}: {e}", idx + 1)))
        })
        .collect()
}
