//! End-to-end orchestration: stages, artifacts, manifest, and report
//! comparison.
//!
//! Each stage reads only the artifacts of earlier stages plus the
//! configuration, so stages can be re-run individually. Artifact contents
//! are fully rendered before anything is written; a failing stage removes
//! whatever it managed to write. All fan-out work is merged in canonical
//! order, which keeps every output byte-identical regardless of the worker
//! count.

pub mod config;

use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cpm::{self, CpmOptions, TemporaryGroup};
use crate::ingest::{self, Interaction};
use crate::metrics::{self, StatsReport};
use crate::relations::{self, RelationModel, SlotGraph};
use crate::sentiment::{Lexicon, Scorer};
use crate::sgci::{self, StableGroup};
use crate::{Error, Result};

pub use config::{RunConfig, ValidatedConfig};

/// The pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Ingest,
    BuildGraphs,
    Detect,
    Track,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::BuildGraphs,
        Stage::Detect,
        Stage::Track,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::BuildGraphs => "build-graphs",
            Stage::Detect => "detect",
            Stage::Track => "track",
            Stage::Report => "report",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .iter()
            .copied()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Wall time and outputs of one executed stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_ms: u64,
    pub outputs: Vec<String>,
}

/// Receipt for a full run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub input_digest: String,
    pub generated_at: String,
    pub stages: Vec<StageRecord>,
    /// Every artifact file, sorted.
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Copy with timing fields zeroed; two runs of the same config over the
    /// same inputs are equal under this view.
    pub fn normalized(&self) -> Self {
        let mut copy = self.clone();
        copy.generated_at = String::new();
        for stage in &mut copy.stages {
            stage.wall_ms = 0;
        }
        copy
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INTERACTIONS_FILE: &str = "interactions.ndjson";
pub const INGEST_STATS_FILE: &str = "ingest_stats.json";
pub const PRUNE_STATS_FILE: &str = "prune_stats.json";

/// A rendered output file, not yet on disk.
struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: String, bytes: Vec<u8>) -> Self {
        Self { name, bytes }
    }
}

fn write_artifacts(out_dir: &Path, artifacts: &[Artifact]) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for artifact in artifacts {
        let path = out_dir.join(&artifact.name);
        if let Err(e) = std::fs::write(&path, &artifact.bytes) {
            for partial in &written {
                let _ = std::fs::remove_file(partial);
            }
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(artifacts.iter().map(|a| a.name.clone()).collect())
}

fn open_artifact(out_dir: &Path, name: &str, produced_by: Stage) -> Result<std::fs::File> {
    let path = out_dir.join(name);
    std::fs::File::open(&path).map_err(|_| Error::Artifact {
        path,
        reason: format!("missing; run the `{}` stage first", produced_by.name()),
    })
}

/// SHA-256 over the raw input files (events, then lexicon when set).
pub fn input_digest(config: &ValidatedConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in std::iter::once(&config.events).chain(config.lexicon.iter()) {
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        hasher.update([0x1e]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn config_digest(config: &RunConfig) -> Result<String> {
    let canonical =
        serde_json::to_string(config).map_err(|e| Error::Config(format!("config digest: {e}")))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn load_scorer(config: &ValidatedConfig) -> Result<Scorer> {
    let lexicon = match &config.lexicon {
        Some(path) => {
            let load = Lexicon::from_csv_path(path)?;
            for warning in &load.warnings {
                eprintln!("warning: {warning}");
            }
            load.lexicon
        }
        None => Lexicon::new(),
    };
    Ok(Scorer::new(lexicon, config.combine))
}

fn slots_of(config: &ValidatedConfig) -> Result<Vec<ingest::TimeSlot>> {
    ingest::generate_slots(&config.slot_config)
}

// ---- stage implementations -------------------------------------------------

fn stage_ingest(config: &ValidatedConfig) -> Result<Vec<Artifact>> {
    let scorer = load_scorer(config)?;
    let slots = slots_of(config)?;
    let records = ingest::read_events_path(&config.events)?;
    let (interactions, stats) = ingest::resolve_interactions(records, &slots, &scorer);

    let mut ndjson = Vec::new();
    for interaction in &interactions {
        let line = serde_json::to_string(interaction)
            .map_err(|e| Error::Domain(format!("interaction serialize: {e}")))?;
        ndjson.extend_from_slice(line.as_bytes());
        ndjson.push(b'\n');
    }
    let stats_json = serde_json::to_vec_pretty(&stats)
        .map_err(|e| Error::Domain(format!("ingest stats serialize: {e}")))?;
    Ok(vec![
        Artifact::new(INTERACTIONS_FILE.into(), ndjson),
        Artifact::new(INGEST_STATS_FILE.into(), stats_json),
    ])
}

fn read_interactions(out_dir: &Path) -> Result<Vec<Interaction>> {
    use std::io::BufRead;
    let file = open_artifact(out_dir, INTERACTIONS_FILE, Stage::Ingest)?;
    let mut interactions = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Artifact {
            path: out_dir.join(INTERACTIONS_FILE),
            reason: format!("line {}: {e}", idx + 1),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        interactions.push(serde_json::from_str(&line).map_err(|e| Error::Artifact {
            path: out_dir.join(INTERACTIONS_FILE),
            reason: format!("line {}: {e}", idx + 1),
        })?);
    }
    Ok(interactions)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PruneRecord {
    slot_index: usize,
    model: RelationModel,
    stats: relations::PruneStats,
}

fn stage_build_graphs(config: &ValidatedConfig) -> Result<Vec<Artifact>> {
    let interactions = read_interactions(&config.out_dir)?;
    let slots = slots_of(config)?;

    // Survivor pair sets for whole-period pruning, one per model.
    let survivors: Vec<Option<BTreeSet<_>>> = config
        .models
        .par_iter()
        .map(|&model| {
            if !config.prune_whole_period {
                return None;
            }
            let period = relations::build_period_graph(
                &interactions,
                model,
                &config.thresholds,
                &config.build_options,
            );
            let (pruned, _) = relations::prune(&period, config.w_min);
            Some(pruned.edges.keys().cloned().collect())
        })
        .collect();

    let mut work: Vec<(usize, usize)> = Vec::new(); // (slot, model idx)
    for slot in 0..slots.len() {
        for model_idx in 0..config.models.len() {
            work.push((slot, model_idx));
        }
    }
    let mut results: Vec<((usize, RelationModel), Artifact, PruneRecord)> = work
        .into_par_iter()
        .map(|(slot, model_idx)| {
            let model = config.models[model_idx];
            let built = relations::build_graph(
                &interactions,
                slot,
                model,
                &config.thresholds,
                &config.build_options,
            );
            let (pruned, stats) = match &survivors[model_idx] {
                Some(keep) => {
                    let restricted = relations::restrict_edges(&built, keep);
                    // report what the restriction removed relative to the slot
                    let removed_edges = built.edge_count() - restricted.edge_count();
                    let removed_nodes = built.node_count() - restricted.node_count();
                    let total_w: f64 = built.edges.values().sum();
                    let kept_w: f64 = restricted.edges.values().sum();
                    let stats = relations::PruneStats {
                        edges_total: built.edge_count(),
                        edges_removed: removed_edges,
                        nodes_total: built.node_count(),
                        nodes_removed: removed_nodes,
                        weight_total: total_w,
                        weight_removed: total_w - kept_w,
                        edge_fraction_removed: if built.edge_count() == 0 {
                            0.0
                        } else {
                            removed_edges as f64 / built.edge_count() as f64
                        },
                        node_fraction_removed: if built.node_count() == 0 {
                            0.0
                        } else {
                            removed_nodes as f64 / built.node_count() as f64
                        },
                        weight_fraction_removed: if total_w == 0.0 {
                            0.0
                        } else {
                            (total_w - kept_w) / total_w
                        },
                    };
                    (restricted, stats)
                }
                None => relations::prune(&built, config.w_min),
            };
            let mut csv = Vec::new();
            relations::write_edge_csv(&pruned, &mut csv)?;
            Ok((
                (slot, model),
                Artifact::new(relations::graph_file_name(slot, model), csv),
                PruneRecord {
                    slot_index: slot,
                    model,
                    stats,
                },
            ))
        })
        .collect::<Result<_>>()?;

    results.sort_by_key(|(key, _, _)| *key);
    let mut artifacts: Vec<Artifact> = Vec::with_capacity(results.len() + 1);
    let mut prune_records = Vec::with_capacity(results.len());
    for (_, artifact, record) in results {
        artifacts.push(artifact);
        prune_records.push(record);
    }
    let prune_json = serde_json::to_vec_pretty(&prune_records)
        .map_err(|e| Error::Domain(format!("prune stats serialize: {e}")))?;
    artifacts.push(Artifact::new(PRUNE_STATS_FILE.into(), prune_json));
    Ok(artifacts)
}

fn read_slot_graph(out_dir: &Path, slot: usize, model: RelationModel) -> Result<SlotGraph> {
    let name = relations::graph_file_name(slot, model);
    let file = open_artifact(out_dir, &name, Stage::BuildGraphs)?;
    relations::read_edge_csv(file, slot, model).map_err(|e| Error::Artifact {
        path: out_dir.join(&name),
        reason: e.to_string(),
    })
}

fn stage_detect(config: &ValidatedConfig) -> Result<Vec<Artifact>> {
    let slots = slots_of(config)?;
    let options = CpmOptions {
        intensity_threshold: config.intensity,
    };
    let mut work: Vec<(usize, RelationModel, usize)> = Vec::new();
    for slot in 0..slots.len() {
        for &model in &config.models {
            for &k in &config.ks {
                work.push((slot, model, k));
            }
        }
    }
    let mut results: Vec<((usize, RelationModel, usize), Artifact)> = work
        .into_par_iter()
        .map(|(slot, model, k)| {
            let graph = read_slot_graph(&config.out_dir, slot, model)?;
            let groups = cpm::detect(&graph, k, &options)?;
            let mut bytes = Vec::new();
            cpm::write_groups_ndjson(&groups, &mut bytes)?;
            Ok((
                (slot, model, k),
                Artifact::new(cpm::groups_file_name(slot, model, k), bytes),
            ))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(key, _)| *key);
    Ok(results.into_iter().map(|(_, artifact)| artifact).collect())
}

fn read_slot_groups(
    out_dir: &Path,
    slot_count: usize,
    model: RelationModel,
    k: usize,
) -> Result<Vec<Vec<TemporaryGroup>>> {
    (0..slot_count)
        .map(|slot| {
            let name = cpm::groups_file_name(slot, model, k);
            let file = open_artifact(out_dir, &name, Stage::Detect)?;
            cpm::read_groups_ndjson(file).map_err(|e| Error::Artifact {
                path: out_dir.join(&name),
                reason: e.to_string(),
            })
        })
        .collect()
}

fn stage_track(config: &ValidatedConfig) -> Result<Vec<Artifact>> {
    let slot_count = slots_of(config)?.len();
    let mut work: Vec<(RelationModel, usize)> = Vec::new();
    for &model in &config.models {
        for &k in &config.ks {
            work.push((model, k));
        }
    }
    let mut results: Vec<((RelationModel, usize), Artifact)> = work
        .into_par_iter()
        .map(|(model, k)| {
            let per_slot = read_slot_groups(&config.out_dir, slot_count, model, k)?;
            let stable = sgci::build_stable_groups(&per_slot, &config.match_config, model, k)?;
            let mut bytes = Vec::new();
            sgci::write_stable_ndjson(&stable, &mut bytes)?;
            Ok((
                (model, k),
                Artifact::new(sgci::stable_file_name(model, k), bytes),
            ))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(key, _)| *key);
    Ok(results.into_iter().map(|(_, artifact)| artifact).collect())
}

fn read_stable_groups(out_dir: &Path, model: RelationModel, k: usize) -> Result<Vec<StableGroup>> {
    let name = sgci::stable_file_name(model, k);
    let file = open_artifact(out_dir, &name, Stage::Track)?;
    sgci::read_stable_ndjson(file).map_err(|e| Error::Artifact {
        path: out_dir.join(&name),
        reason: e.to_string(),
    })
}

fn stage_report(config: &ValidatedConfig) -> Result<Vec<Artifact>> {
    let slot_count = slots_of(config)?.len();
    let digest = input_digest(config)?;
    let mut work: Vec<(RelationModel, usize)> = Vec::new();
    for &model in &config.models {
        for &k in &config.ks {
            work.push((model, k));
        }
    }
    let mut results: Vec<((RelationModel, usize), Vec<Artifact>)> = work
        .into_par_iter()
        .map(|(model, k)| {
            let graphs: Vec<SlotGraph> = (0..slot_count)
                .map(|slot| read_slot_graph(&config.out_dir, slot, model))
                .collect::<Result<_>>()?;
            let per_slot = read_slot_groups(&config.out_dir, slot_count, model, k)?;
            let stable = read_stable_groups(&config.out_dir, model, k)?;
            let report = metrics::corpus_stats(&per_slot, &stable, &graphs, model, k, &digest)?;

            let mut json = Vec::new();
            metrics::write_report_json(&report, &mut json)?;
            let mut csv = Vec::new();
            metrics::write_report_csv(&report, &mut csv)?;
            let mut series = Vec::new();
            metrics::write_series_csv(&report, &mut series)?;
            Ok((
                (model, k),
                vec![
                    Artifact::new(metrics::report_json_name(model, k), json),
                    Artifact::new(metrics::report_csv_name(model, k), csv),
                    Artifact::new(metrics::series_csv_name(model, k), series),
                ],
            ))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(key, _)| *key);
    Ok(results
        .into_iter()
        .flat_map(|(_, artifacts)| artifacts)
        .collect())
}

// ---- public entry points ---------------------------------------------------

fn dispatch(config: &ValidatedConfig, stage: Stage) -> Result<Vec<Artifact>> {
    match stage {
        Stage::Ingest => stage_ingest(config),
        Stage::BuildGraphs => stage_build_graphs(config),
        Stage::Detect => stage_detect(config),
        Stage::Track => stage_track(config),
        Stage::Report => stage_report(config),
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

/// Runs one stage, returning the names of the files it wrote.
pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<Vec<String>> {
    let validated = config.validate()?;
    with_pool(validated.jobs, || {
        let artifacts = dispatch(&validated, stage).map_err(|e| e.in_stage(stage_name(stage)))?;
        write_artifacts(&validated.out_dir, &artifacts).map_err(|e| e.in_stage(stage_name(stage)))
    })
}

fn stage_name(stage: Stage) -> &'static str {
    stage.name()
}

/// Runs every stage in order and writes `manifest.json`.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    let validated = config.validate()?;
    let config_digest = config_digest(config)?;
    let input_digest = input_digest(&validated)?;
    // A manifest only ever describes a completed run; drop any stale one
    // before touching the directory.
    let _ = std::fs::remove_file(validated.out_dir.join(MANIFEST_FILE));

    with_pool(validated.jobs, || {
        let mut stages = Vec::new();
        let mut all_outputs: Vec<String> = Vec::new();
        for stage in Stage::ALL {
            let started = Instant::now();
            let artifacts =
                dispatch(&validated, stage).map_err(|e| e.in_stage(stage_name(stage)))?;
            let outputs = write_artifacts(&validated.out_dir, &artifacts)
                .map_err(|e| e.in_stage(stage_name(stage)))?;
            all_outputs.extend(outputs.iter().cloned());
            stages.push(StageRecord {
                name: stage.name().to_string(),
                wall_ms: started.elapsed().as_millis() as u64,
                outputs,
            });
        }
        all_outputs.sort();
        let manifest = RunManifest {
            config_digest: config_digest.clone(),
            input_digest: input_digest.clone(),
            generated_at: chrono::Utc::now().to_rfc3339(),
            stages,
            outputs: all_outputs,
        };
        let manifest_json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::Domain(format!("manifest serialize: {e}")))?;
        write_artifacts(
            &validated.out_dir,
            &[Artifact::new(MANIFEST_FILE.into(), manifest_json)],
        )?;
        Ok(manifest)
    })
}

// ---- report comparison -----------------------------------------------------

/// One metric side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// b - a when both sides are present.
    pub delta: Option<f64>,
}

/// Side-by-side deltas of two reports over the same corpus and k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub model_a: RelationModel,
    pub model_b: RelationModel,
    pub k: usize,
    pub rows: Vec<CompareRow>,
}

fn row(metric: &str, a: Option<f64>, b: Option<f64>) -> CompareRow {
    CompareRow {
        metric: metric.to_string(),
        a,
        b,
        delta: match (a, b) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        },
    }
}

/// Mean of the per-slot percentage outside stable groups, ignoring slots
/// with empty graphs.
pub fn mean_pct_not_in_group(report: &StatsReport) -> Option<f64> {
    let values: Vec<f64> = report
        .slots
        .iter()
        .filter(|s| s.graph_nodes > 0)
        .map(|s| s.pct_not_in_stable_group)
        .collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Compares two reports. They must come from the same corpus (equal input
/// digests) and the same k.
pub fn compare(a: &StatsReport, b: &StatsReport) -> Result<CompareReport> {
    if a.k != b.k {
        return Err(Error::Usage(format!(
            "reports have different k ({} vs {})",
            a.k, b.k
        )));
    }
    if a.input_digest != b.input_digest {
        return Err(Error::Usage(
            "reports were produced from different corpora (input digests differ)".into(),
        ));
    }
    let mut rows = vec![
        row(
            "temporary_group_total",
            Some(a.temporary_group_total as f64),
            Some(b.temporary_group_total as f64),
        ),
        row(
            "stable_group_count",
            Some(a.stable_group_count as f64),
            Some(b.stable_group_count as f64),
        ),
        row(
            "users_in_any_stable_group",
            Some(a.users_in_any_stable_group as f64),
            Some(b.users_in_any_stable_group as f64),
        ),
        row(
            "mean_pct_not_in_stable_group",
            mean_pct_not_in_group(a),
            mean_pct_not_in_group(b),
        ),
        row("mean_stability", a.mean_stability, b.mean_stability),
        row("mean_density", a.mean_density, b.mean_density),
        row("mean_cohesion", a.mean_cohesion, b.mean_cohesion),
    ];
    for (bin_a, bin_b) in a.size_histogram.bins.iter().zip(&b.size_histogram.bins) {
        rows.push(row(
            &format!("size_{}", bin_a.label),
            Some(bin_a.count as f64),
            Some(bin_b.count as f64),
        ));
    }
    Ok(CompareReport {
        model_a: a.model,
        model_b: b.model,
        k: a.k,
        rows,
    })
}

pub fn compare_files(path_a: &Path, path_b: &Path) -> Result<CompareReport> {
    let a =
        metrics::read_report_json(std::fs::File::open(path_a).map_err(|e| Error::io(path_a, e))?)?;
    let b =
        metrics::read_report_json(std::fs::File::open(path_b).map_err(|e| Error::io(path_b, e))?)?;
    compare(&a, &b)
}

impl CompareReport {
    /// Plain-text table, one metric per row.
    pub fn render_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<32} {:>14} {:>14} {:>14}\n",
            format!("metric (k={})", self.k),
            self.model_a.name(),
            self.model_b.name(),
            "delta"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<32} {:>14} {:>14} {:>14}\n",
                r.metric,
                fmt(r.a),
                fmt(r.b),
                fmt(r.delta)
            ));
        }
        out
    }
}
