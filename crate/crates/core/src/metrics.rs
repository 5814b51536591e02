//! Group measures (density, stability, cohesion) and corpus statistics.
//!
//! * density: directed internal edges over `n(n-1)`;
//! * stability: mean cross-slot membership Jaccard along a chain;
//! * cohesion: mean internal edge weight over mean boundary edge weight,
//!   where a boundary edge has exactly one endpoint in the group.
//!
//! Corpus statistics aggregate these per (model, k): per-slot group counts
//! and membership multiplicity, a stable-group size histogram, and means
//! over all stable groups.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cpm::TemporaryGroup;
use crate::ingest::UserId;
use crate::relations::{RelationModel, SlotGraph};
use crate::sgci::{classical_jaccard, StableGroup};
use crate::{Error, Result};

/// Ratio of directed edges inside the group to the `n(n-1)` possible ones.
/// A bidirectional pair counts twice. Needs at least two members.
pub fn density(members: &[UserId], graph: &SlotGraph) -> Result<f64> {
    let n = members.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "density needs at least 2 members, got {n}"
        )));
    }
    let set: HashSet<&UserId> = members.iter().collect();
    for m in members {
        if !graph.nodes.contains(m) {
            return Err(Error::Domain(format!("member {m} not in graph")));
        }
    }
    let internal = graph
        .edges
        .keys()
        .filter(|(src, dst)| set.contains(src) && set.contains(dst))
        .count();
    Ok(internal as f64 / (n * (n - 1)) as f64)
}

/// Mean membership Jaccard over the chain's consecutive slot pairs.
/// Undefined (None) for single-slot chains.
pub fn stability(stable: &StableGroup) -> Option<f64> {
    if stable.chain.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut transitions = 0usize;
    for w in stable.chain.windows(2) {
        sum += classical_jaccard(&w[0].members, &w[1].members).ok()?;
        transitions += 1;
    }
    Some(sum / transitions as f64)
}

/// Cohesion outcome: a finite ratio, or a group with no boundary edges at
/// all (fully separated from the rest of the graph).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Cohesion {
    Finite(f64),
    Isolated,
}

impl Cohesion {
    pub fn finite(self) -> Option<f64> {
        match self {
            Cohesion::Finite(v) => Some(v),
            Cohesion::Isolated => None,
        }
    }
}

/// Mean internal edge weight over mean boundary edge weight. A group with
/// no internal edges scores 0; one with internal edges but no boundary
/// edges is flagged isolated.
pub fn cohesion(members: &[UserId], graph: &SlotGraph) -> Result<Cohesion> {
    let set: HashSet<&UserId> = members.iter().collect();
    for m in members {
        if !graph.nodes.contains(m) {
            return Err(Error::Domain(format!("member {m} not in graph")));
        }
    }
    let (mut internal_sum, mut internal_n) = (0.0, 0usize);
    let (mut boundary_sum, mut boundary_n) = (0.0, 0usize);
    for ((src, dst), &w) in &graph.edges {
        match (set.contains(src), set.contains(dst)) {
            (true, true) => {
                internal_sum += w;
                internal_n += 1;
            }
            (true, false) | (false, true) => {
                boundary_sum += w;
                boundary_n += 1;
            }
            (false, false) => {}
        }
    }
    if internal_n == 0 {
        return Ok(Cohesion::Finite(0.0));
    }
    if boundary_n == 0 {
        return Ok(Cohesion::Isolated);
    }
    let internal_mean = internal_sum / internal_n as f64;
    let boundary_mean = boundary_sum / boundary_n as f64;
    Ok(Cohesion::Finite(internal_mean / boundary_mean))
}

/// Measures for one stable group, aggregated over its chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub stable_id: String,
    /// Mean chain member count, rounded half-up.
    pub size: usize,
    pub lifespan: usize,
    /// Mean per-slot density along the chain.
    pub density: f64,
    pub stability: Option<f64>,
    /// Mean over the finite per-slot cohesion values; isolated when every
    /// slot is isolated.
    pub cohesion: Cohesion,
}

fn round_half_up_mean(total: usize, count: usize) -> usize {
    debug_assert!(count > 0);
    (2 * total + count) / (2 * count)
}

/// Aggregates density/stability/cohesion for one stable group against the
/// per-slot graphs (`graphs[slot_index]`).
pub fn stable_group_metrics(stable: &StableGroup, graphs: &[SlotGraph]) -> Result<GroupMetrics> {
    let mut density_sum = 0.0;
    let mut cohesion_sum = 0.0;
    let mut cohesion_n = 0usize;
    let mut member_total = 0usize;
    for entry in &stable.chain {
        let graph = graphs
            .get(entry.slot_index)
            .ok_or_else(|| Error::Domain(format!("no graph for slot {}", entry.slot_index)))?;
        density_sum += density(&entry.members, graph)?;
        if let Cohesion::Finite(v) = cohesion(&entry.members, graph)? {
            cohesion_sum += v;
            cohesion_n += 1;
        }
        member_total += entry.members.len();
    }
    let chain_len = stable.chain.len();
    Ok(GroupMetrics {
        stable_id: stable.stable_id.clone(),
        size: round_half_up_mean(member_total, chain_len),
        lifespan: stable.lifespan,
        density: density_sum / chain_len as f64,
        stability: stability(stable),
        cohesion: if cohesion_n == 0 {
            Cohesion::Isolated
        } else {
            Cohesion::Finite(cohesion_sum / cohesion_n as f64)
        },
    })
}

/// Histogram bin labels for stable-group sizes.
pub const SIZE_BIN_LABELS: [&str; 12] = [
    "3", "4", "5", "6", "7", "8", "9", "10", "11-50", "51-100", "101-200", ">200",
];

fn size_bin_index(size: usize) -> usize {
    match size {
        0..=3 => 0,
        4 => 1,
        5 => 2,
        6 => 3,
        7 => 4,
        8 => 5,
        9 => 6,
        10 => 7,
        11..=50 => 8,
        51..=100 => 9,
        101..=200 => 10,
        _ => 11,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub bins: Vec<HistogramBin>,
}

impl SizeHistogram {
    pub fn from_sizes<I: IntoIterator<Item = usize>>(sizes: I) -> Self {
        let mut counts = [0usize; 12];
        for size in sizes {
            counts[size_bin_index(size)] += 1;
        }
        SizeHistogram {
            bins: SIZE_BIN_LABELS
                .iter()
                .zip(counts)
                .map(|(label, count)| HistogramBin {
                    label: label.to_string(),
                    count,
                })
                .collect(),
        }
    }

    pub fn count(&self, label: &str) -> usize {
        self.bins
            .iter()
            .find(|b| b.label == label)
            .map(|b| b.count)
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Per-slot series entry: group counts and membership multiplicity.
///
/// The `members_in_*` buckets partition the slot graph's nodes by how many
/// stable groups contain the user in that slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotStats {
    pub slot_index: usize,
    pub temporary_groups: usize,
    pub stable_groups_active: usize,
    pub graph_nodes: usize,
    pub members_in_0: usize,
    pub members_in_1: usize,
    pub members_in_2: usize,
    pub members_in_3: usize,
    pub members_in_4_plus: usize,
    /// Percent of slot graph nodes in no stable group (0 for empty slots).
    pub pct_not_in_stable_group: f64,
}

/// The full statistics bundle for one (model, k) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub model: RelationModel,
    pub k: usize,
    /// Digest of the run inputs; comparisons require equal digests.
    pub input_digest: String,
    pub slot_count: usize,
    pub temporary_group_total: usize,
    pub stable_group_count: usize,
    /// Distinct users appearing in any stable group chain entry.
    pub users_in_any_stable_group: usize,
    pub mean_stability: Option<f64>,
    pub mean_density: Option<f64>,
    pub mean_cohesion: Option<f64>,
    pub size_histogram: SizeHistogram,
    pub slots: Vec<SlotStats>,
    pub groups: Vec<GroupMetrics>,
}

/// Computes the whole report. `graphs[i]` must be the (pruned) graph of
/// slot i; `per_slot_groups[i]` its temporary groups.
pub fn corpus_stats(
    per_slot_groups: &[Vec<TemporaryGroup>],
    stable: &[StableGroup],
    graphs: &[SlotGraph],
    model: RelationModel,
    k: usize,
    input_digest: &str,
) -> Result<StatsReport> {
    if per_slot_groups.len() != graphs.len() {
        return Err(Error::Domain(format!(
            "{} slot group lists vs {} graphs",
            per_slot_groups.len(),
            graphs.len()
        )));
    }
    for s in stable {
        if s.model != model || s.k != k {
            return Err(Error::Domain(format!(
                "stable group {} is for ({}, k={}), expected ({}, k={})",
                s.stable_id, s.model, s.k, model, k
            )));
        }
    }

    let slot_count = graphs.len();
    let mut slots = Vec::with_capacity(slot_count);
    for slot in 0..slot_count {
        let graph = &graphs[slot];
        // stable groups whose chain covers this slot, and per-user counts
        let mut active = 0usize;
        let mut per_user: HashMap<&UserId, usize> = HashMap::new();
        for s in stable {
            if let Some(entry) = s.entry_at(slot) {
                active += 1;
                for m in &entry.members {
                    *per_user.entry(m).or_insert(0) += 1;
                }
            }
        }
        let mut buckets = [0usize; 5]; // 0,1,2,3,4+
        for node in &graph.nodes {
            let count = per_user.get(node).copied().unwrap_or(0);
            buckets[count.min(4)] += 1;
        }
        let graph_nodes = graph.node_count();
        slots.push(SlotStats {
            slot_index: slot,
            temporary_groups: per_slot_groups[slot].len(),
            stable_groups_active: active,
            graph_nodes,
            members_in_0: buckets[0],
            members_in_1: buckets[1],
            members_in_2: buckets[2],
            members_in_3: buckets[3],
            members_in_4_plus: buckets[4],
            pct_not_in_stable_group: if graph_nodes == 0 {
                0.0
            } else {
                100.0 * buckets[0] as f64 / graph_nodes as f64
            },
        });
    }

    let groups: Vec<GroupMetrics> = stable
        .iter()
        .map(|s| stable_group_metrics(s, graphs))
        .collect::<Result<_>>()?;

    let mean = |values: Vec<f64>| -> Option<f64> {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let mut stable_users: BTreeSet<&UserId> = BTreeSet::new();
    for s in stable {
        for entry in &s.chain {
            stable_users.extend(entry.members.iter());
        }
    }

    Ok(StatsReport {
        model,
        k,
        input_digest: input_digest.to_string(),
        slot_count,
        temporary_group_total: per_slot_groups.iter().map(Vec::len).sum(),
        stable_group_count: stable.len(),
        users_in_any_stable_group: stable_users.len(),
        mean_stability: mean(groups.iter().filter_map(|g| g.stability).collect()),
        mean_density: mean(groups.iter().map(|g| g.density).collect()),
        mean_cohesion: mean(groups.iter().filter_map(|g| g.cohesion.finite()).collect()),
        size_histogram: SizeHistogram::from_sizes(groups.iter().map(|g| g.size)),
        slots,
        groups,
    })
}

pub fn report_json_name(model: RelationModel, k: usize) -> String {
    format!("report_{model}_k{k}.json")
}

pub fn report_csv_name(model: RelationModel, k: usize) -> String {
    format!("report_{model}_k{k}.csv")
}

pub fn series_csv_name(model: RelationModel, k: usize) -> String {
    format!("series_{model}_k{k}.csv")
}

pub fn write_report_json<W: Write>(report: &StatsReport, mut writer: W) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Domain(format!("report serialize: {e}")))?;
    writeln!(writer, "{text}").map_err(|e| Error::Domain(format!("report write: {e}")))
}

pub fn read_report_json<R: Read>(reader: R) -> Result<StatsReport> {
    serde_json::from_reader(reader).map_err(|e| Error::Domain(format!("report parse: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat `metric,value` table: headline counts, means, and the size
/// histogram, the side-by-side comparison shape.
pub fn write_report_csv<W: Write>(report: &StatsReport, mut writer: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Domain(format!("report csv write: {e}"));
    writeln!(writer, "metric,value").map_err(io_err)?;
    writeln!(writer, "model,{}", report.model).map_err(io_err)?;
    writeln!(writer, "k,{}", report.k).map_err(io_err)?;
    writeln!(writer, "slot_count,{}", report.slot_count).map_err(io_err)?;
    writeln!(
        writer,
        "temporary_group_total,{}",
        report.temporary_group_total
    )
    .map_err(io_err)?;
    writeln!(writer, "stable_group_count,{}", report.stable_group_count).map_err(io_err)?;
    writeln!(
        writer,
        "users_in_any_stable_group,{}",
        report.users_in_any_stable_group
    )
    .map_err(io_err)?;
    writeln!(writer, "mean_stability,{}", opt(report.mean_stability)).map_err(io_err)?;
    writeln!(writer, "mean_density,{}", opt(report.mean_density)).map_err(io_err)?;
    writeln!(writer, "mean_cohesion,{}", opt(report.mean_cohesion)).map_err(io_err)?;
    for bin in &report.size_histogram.bins {
        writeln!(writer, "size_{},{}", bin.label, bin.count).map_err(io_err)?;
    }
    Ok(())
}

/// Per-slot plotting series: group counts, membership buckets, and the
/// percentage outside stable groups.
pub fn write_series_csv<W: Write>(report: &StatsReport, mut writer: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Domain(format!("series csv write: {e}"));
    writeln!(
        writer,
        "slot_index,temporary_groups,stable_groups_active,graph_nodes,members_in_0,members_in_1,members_in_2,members_in_3,members_in_4_plus,pct_not_in_stable_group"
    )
    .map_err(io_err)?;
    for s in &report.slots {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{},{}",
            s.slot_index,
            s.temporary_groups,
            s.stable_groups_active,
            s.graph_nodes,
            s.members_in_0,
            s.members_in_1,
            s.members_in_2,
            s.members_in_3,
            s.members_in_4_plus,
            s.pct_not_in_stable_group
        )
        .map_err(io_err)?;
    }
    Ok(())
}
