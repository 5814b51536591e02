//! Building directed weighted relation graphs from interactions.
//!
//! A [`RelationModel`] decides, per interaction, which user the relation
//! points at and whether the interaction counts at all:
//!
//! * the post model routes every comment to the post author;
//! * the comment model routes to the explicit addressee when one exists,
//!   falling back to the post author;
//! * the counting sentiment models keep only interactions of one polarity
//!   (or positive-plus-neutral) under comment routing;
//! * the mean sentiment models form comment-routed edges first, then keep an
//!   edge only when the *average* sentiment of its interactions classifies
//!   into the model's polarity. Each directed pair therefore lands in
//!   exactly one of the three mean models.
//!
//! Edge weight is always the number of contributing interactions.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{Interaction, UserId};
use crate::sentiment::{classify, Polarity, PolarityThresholds};
use crate::{Error, Result};

/// The relation-building rule applied to one slot's interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationModel {
    #[serde(rename = "post")]
    PostNoSentiment,
    #[serde(rename = "comment")]
    CommentNoSentiment,
    #[serde(rename = "count_positive")]
    CountPositive,
    #[serde(rename = "count_negative")]
    CountNegative,
    #[serde(rename = "count_neutral")]
    CountNeutral,
    #[serde(rename = "count_pos_neutral")]
    CountPosPlusNeutral,
    #[serde(rename = "mean_positive")]
    MeanPositive,
    #[serde(rename = "mean_negative")]
    MeanNegative,
    #[serde(rename = "mean_neutral")]
    MeanNeutral,
    #[serde(rename = "mean_pos_neutral")]
    MeanPosPlusNeutral,
}

impl RelationModel {
    pub const ALL: [RelationModel; 10] = [
        RelationModel::PostNoSentiment,
        RelationModel::CommentNoSentiment,
        RelationModel::CountPositive,
        RelationModel::CountNegative,
        RelationModel::CountNeutral,
        RelationModel::CountPosPlusNeutral,
        RelationModel::MeanPositive,
        RelationModel::MeanNegative,
        RelationModel::MeanNeutral,
        RelationModel::MeanPosPlusNeutral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationModel::PostNoSentiment => "post",
            RelationModel::CommentNoSentiment => "comment",
            RelationModel::CountPositive => "count_positive",
            RelationModel::CountNegative => "count_negative",
            RelationModel::CountNeutral => "count_neutral",
            RelationModel::CountPosPlusNeutral => "count_pos_neutral",
            RelationModel::MeanPositive => "mean_positive",
            RelationModel::MeanNegative => "mean_negative",
            RelationModel::MeanNeutral => "mean_neutral",
            RelationModel::MeanPosPlusNeutral => "mean_pos_neutral",
        }
    }

    /// Polarity set an interaction (counting family) or a pair mean (mean
    /// family) must classify into; `None` for the sentiment-blind models.
    fn polarity_set(self) -> Option<&'static [Polarity]> {
        match self {
            RelationModel::PostNoSentiment | RelationModel::CommentNoSentiment => None,
            RelationModel::CountPositive | RelationModel::MeanPositive => {
                Some(&[Polarity::Positive])
            }
            RelationModel::CountNegative | RelationModel::MeanNegative => {
                Some(&[Polarity::Negative])
            }
            RelationModel::CountNeutral | RelationModel::MeanNeutral => Some(&[Polarity::Neutral]),
            RelationModel::CountPosPlusNeutral | RelationModel::MeanPosPlusNeutral => {
                Some(&[Polarity::Positive, Polarity::Neutral])
            }
        }
    }

    pub fn is_mean_family(self) -> bool {
        matches!(
            self,
            RelationModel::MeanPositive
                | RelationModel::MeanNegative
                | RelationModel::MeanNeutral
                | RelationModel::MeanPosPlusNeutral
        )
    }
}

impl fmt::Display for RelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationModel::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown relation model {s:?} (expected one of: {})",
                    RelationModel::ALL.map(|m| m.name()).join(", ")
                ))
            })
    }
}

/// Directed weighted graph of user relations for one (slot, model) pair.
///
/// Weights are interaction counts, kept as `f64` so measures can rescale
/// them; they are integral as built. Edge iteration order is deterministic
/// (lexicographic by source, then target).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGraph {
    pub slot_index: usize,
    pub model: RelationModel,
    pub nodes: BTreeSet<UserId>,
    pub edges: BTreeMap<(UserId, UserId), f64>,
}

impl SlotGraph {
    pub fn empty(slot_index: usize, model: RelationModel) -> Self {
        Self {
            slot_index,
            model,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn weight(&self, src: &UserId, dst: &UserId) -> Option<f64> {
        self.edges.get(&(src.clone(), dst.clone())).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn insert_edge(&mut self, src: UserId, dst: UserId, weight: f64) {
        self.nodes.insert(src.clone());
        self.nodes.insert(dst.clone());
        self.edges.insert((src, dst), weight);
    }
}

/// Knobs for graph construction.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Keep edges from a user to themselves. Off by default: self-loops
    /// cannot take part in k-cliques.
    pub allow_self_loops: bool,
}

/// The user a single interaction points at under a model.
///
/// The post model targets the post author unconditionally; every other model
/// prefers the explicit addressee and falls back to the post author.
pub fn edge_target(interaction: &Interaction, model: RelationModel) -> &UserId {
    match model {
        RelationModel::PostNoSentiment => &interaction.post_author,
        _ => interaction
            .addressee
            .as_ref()
            .unwrap_or(&interaction.post_author),
    }
}

/// Aggregates one slot's interactions into a graph under `model`.
///
/// Interactions not carrying `slot_index` in their `slot_ids` are ignored,
/// so the full corpus list can be passed directly.
pub fn build_graph(
    interactions: &[Interaction],
    slot_index: usize,
    model: RelationModel,
    thresholds: &PolarityThresholds,
    options: &BuildOptions,
) -> SlotGraph {
    let mut graph = SlotGraph::empty(slot_index, model);
    let in_slot = interactions
        .iter()
        .filter(|i| i.kind.is_comment() && i.slot_ids.binary_search(&slot_index).is_ok());

    if model.is_mean_family() {
        // Candidate edges under comment routing, then filter by pair mean.
        let mut pairs: BTreeMap<(UserId, UserId), (usize, f64)> = BTreeMap::new();
        for interaction in in_slot {
            let target = edge_target(interaction, model);
            if !options.allow_self_loops && target == &interaction.initiator {
                continue;
            }
            let entry = pairs
                .entry((interaction.initiator.clone(), target.clone()))
                .or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += interaction.sentiment;
        }
        let wanted = model
            .polarity_set()
            .expect("mean family has a polarity set");
        for ((src, dst), (count, sentiment_sum)) in pairs {
            let mean = sentiment_sum / count as f64;
            if wanted.contains(&classify(mean, thresholds)) {
                graph.insert_edge(src, dst, count as f64);
            }
        }
    } else {
        let mut counts: BTreeMap<(UserId, UserId), usize> = BTreeMap::new();
        for interaction in in_slot {
            if let Some(wanted) = model.polarity_set() {
                if !wanted.contains(&classify(interaction.sentiment, thresholds)) {
                    continue;
                }
            }
            let target = edge_target(interaction, model);
            if !options.allow_self_loops && target == &interaction.initiator {
                continue;
            }
            *counts
                .entry((interaction.initiator.clone(), target.clone()))
                .or_insert(0) += 1;
        }
        for ((src, dst), count) in counts {
            graph.insert_edge(src, dst, count as f64);
        }
    }
    graph
}

/// What pruning removed, as counts and fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneStats {
    pub edges_total: usize,
    pub edges_removed: usize,
    pub nodes_total: usize,
    pub nodes_removed: usize,
    pub weight_total: f64,
    pub weight_removed: f64,
    pub edge_fraction_removed: f64,
    pub node_fraction_removed: f64,
    pub weight_fraction_removed: f64,
}

fn fraction(removed: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        removed / total
    }
}

/// Drops edges with weight below `w_min`, then nodes left without any
/// incident edge.
pub fn prune(graph: &SlotGraph, w_min: u32) -> (SlotGraph, PruneStats) {
    let w_min = w_min as f64;
    let mut pruned = SlotGraph::empty(graph.slot_index, graph.model);
    let mut kept_weight = 0.0;
    for ((src, dst), &w) in &graph.edges {
        if w >= w_min {
            pruned.insert_edge(src.clone(), dst.clone(), w);
            kept_weight += w;
        }
    }
    let weight_total: f64 = graph.edges.values().sum();
    let stats = PruneStats {
        edges_total: graph.edge_count(),
        edges_removed: graph.edge_count() - pruned.edge_count(),
        nodes_total: graph.node_count(),
        nodes_removed: graph.node_count() - pruned.node_count(),
        weight_total,
        weight_removed: weight_total - kept_weight,
        edge_fraction_removed: fraction(
            (graph.edge_count() - pruned.edge_count()) as f64,
            graph.edge_count() as f64,
        ),
        node_fraction_removed: fraction(
            (graph.node_count() - pruned.node_count()) as f64,
            graph.node_count() as f64,
        ),
        weight_fraction_removed: fraction(weight_total - kept_weight, weight_total),
    };
    (pruned, stats)
}

/// Restricts a graph to edges whose (src, dst) pair appears in `keep`.
/// Used for whole-period pruning: the survivor set is computed on the
/// period-aggregate graph and then applied to each slot.
pub fn restrict_edges(graph: &SlotGraph, keep: &BTreeSet<(UserId, UserId)>) -> SlotGraph {
    let mut out = SlotGraph::empty(graph.slot_index, graph.model);
    for ((src, dst), &w) in &graph.edges {
        if keep.contains(&(src.clone(), dst.clone())) {
            out.insert_edge(src.clone(), dst.clone(), w);
        }
    }
    out
}

/// Builds the one-graph-per-model aggregate over the whole period: every
/// interaction contributes once, regardless of how many slots cover it.
pub fn build_period_graph(
    interactions: &[Interaction],
    model: RelationModel,
    thresholds: &PolarityThresholds,
    options: &BuildOptions,
) -> SlotGraph {
    // Reuse the slot path by temporarily treating the whole period as one
    // slot: clone with a single synthetic slot id.
    let all: Vec<Interaction> = interactions
        .iter()
        .filter(|i| !i.slot_ids.is_empty())
        .map(|i| {
            let mut copy = i.clone();
            copy.slot_ids = vec![0];
            copy
        })
        .collect();
    build_graph(&all, 0, model, thresholds, options)
}

/// Canonical artifact name for one slot graph.
pub fn graph_file_name(slot_index: usize, model: RelationModel) -> String {
    format!("slot_{slot_index}_{model}.csv")
}

/// Writes the edge list as `src,dst,weight`, rows sorted lexicographically.
pub fn write_edge_csv<W: Write>(graph: &SlotGraph, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| Error::Domain(format!("edge csv write: {e}"));
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["src", "dst", "weight"]).map_err(io_err)?;
    for ((src, dst), w) in &graph.edges {
        wtr.write_record([src.as_str(), dst.as_str(), &w.to_string()])
            .map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Domain(format!("edge csv write: {e}")))?;
    Ok(())
}

/// Reads an edge list written by [`write_edge_csv`].
pub fn read_edge_csv<R: Read>(
    reader: R,
    slot_index: usize,
    model: RelationModel,
) -> Result<SlotGraph> {
    let mut graph = SlotGraph::empty(slot_index, model);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Domain(format!("edge csv read: {e}")))?;
        if headers != vec!["src", "dst", "weight"] {
            return Err(Error::Domain(format!(
                "edge csv: unexpected header {headers:?}"
            )));
        }
    }
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Domain(format!("edge csv row: {e}")))?;
        if record.len() != 3 {
            return Err(Error::Domain(format!(
                "edge csv: expected 3 fields, got {}",
                record.len()
            )));
        }
        let src = UserId::new(&record[0])?;
        let dst = UserId::new(&record[1])?;
        let weight: f64 = record[2]
            .parse()
            .map_err(|e| Error::Domain(format!("edge csv weight {:?}: {e}", &record[2])))?;
        graph.insert_edge(src, dst, weight);
    }
    Ok(graph)
}
