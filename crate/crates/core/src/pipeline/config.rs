//! Declarative run configuration: TOML file, environment overrides, and
//! validation into the runtime parameter types.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::SlotConfig;
use crate::relations::{BuildOptions, RelationModel};
use crate::sentiment::{CombineRule, PolarityThresholds};
use crate::sgci::MatchConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    /// Event log, NDJSON or CSV by extension.
    pub events: Option<PathBuf>,
    /// `word,weight` sentiment lexicon; optional (no lexicon scores
    /// everything neutral).
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SlotsSection {
    /// RFC 3339 instants, e.g. "2008-01-01T00:00:00Z".
    pub period_start: Option<String>,
    pub period_end: Option<String>,
    pub slot_length_days: i64,
    pub overlap: f64,
}

impl Default for SlotsSection {
    fn default() -> Self {
        Self {
            period_start: None,
            period_end: None,
            slot_length_days: 30,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentSection {
    pub neutral_low: f64,
    pub neutral_high: f64,
    pub combine: CombineRule,
}

impl Default for SentimentSection {
    fn default() -> Self {
        Self {
            neutral_low: 0.0,
            neutral_high: 0.3,
            combine: CombineRule::MeanPolar,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RelationsSection {
    /// Model names; see `RelationModel`.
    pub models: Vec<String>,
    pub w_min: u32,
    /// Prune on the whole-period aggregate graph instead of per slot.
    pub prune_whole_period: bool,
    pub allow_self_loops: bool,
}

impl Default for RelationsSection {
    fn default() -> Self {
        Self {
            models: vec!["post".into(), "comment".into()],
            w_min: 2,
            prune_whole_period: false,
            allow_self_loops: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CpmSection {
    pub k: Vec<usize>,
    pub intensity: Option<f64>,
}

impl Default for CpmSection {
    fn default() -> Self {
        Self {
            k: vec![3],
            intensity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SgciSection {
    pub jaccard_threshold: f64,
    pub ltmin: usize,
}

impl Default for SgciSection {
    fn default() -> Self {
        Self {
            jaccard_threshold: 0.5,
            ltmin: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; absent or 0 means one per CPU.
    pub jobs: Option<usize>,
}

/// Full declarative configuration of a pipeline run.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: InputSection,
    pub slots: SlotsSection,
    pub sentiment: SentimentSection,
    pub relations: RelationsSection,
    pub cpm: CpmSection,
    pub sgci: SgciSection,
    pub output: OutputSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        // Relative input/output paths are resolved against the config file.
        if let Some(base) = path.parent() {
            if let Some(events) = &config.input.events {
                if events.is_relative() {
                    config.input.events = Some(base.join(events));
                }
            }
            if let Some(lexicon) = &config.input.lexicon {
                if lexicon.is_relative() {
                    config.input.lexicon = Some(base.join(lexicon));
                }
            }
            if config.output.dir.is_relative() {
                config.output.dir = base.join(&config.output.dir);
            }
        }
        Ok(config)
    }

    /// Applies `PERCOLATE_*` environment overrides. `lookup` abstracts
    /// `std::env::var` so overrides stay testable.
    pub fn apply_env_overrides<F>(&mut self, lookup: F) -> Result<()>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(v) = lookup("PERCOLATE_EVENTS") {
            self.input.events = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("PERCOLATE_LEXICON") {
            self.input.lexicon = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("PERCOLATE_OUTPUT_DIR") {
            self.output.dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("PERCOLATE_PERIOD_START") {
            self.slots.period_start = Some(v);
        }
        if let Some(v) = lookup("PERCOLATE_PERIOD_END") {
            self.slots.period_end = Some(v);
        }
        if let Some(v) = lookup("PERCOLATE_SLOT_DAYS") {
            self.slots.slot_length_days = parse_env("PERCOLATE_SLOT_DAYS", &v)?;
        }
        if let Some(v) = lookup("PERCOLATE_OVERLAP") {
            self.slots.overlap = parse_env("PERCOLATE_OVERLAP", &v)?;
        }
        if let Some(v) = lookup("PERCOLATE_THRESHOLDS") {
            let t: PolarityThresholds = v
                .parse()
                .map_err(|e| Error::Config(format!("PERCOLATE_THRESHOLDS: {e}")))?;
            self.sentiment.neutral_low = t.neutral_low;
            self.sentiment.neutral_high = t.neutral_high;
        }
        if let Some(v) = lookup("PERCOLATE_COMBINE") {
            self.sentiment.combine = v
                .parse()
                .map_err(|e| Error::Config(format!("PERCOLATE_COMBINE: {e}")))?;
        }
        if let Some(v) = lookup("PERCOLATE_MODELS") {
            self.relations.models = v.split(',').map(|m| m.trim().to_string()).collect();
        }
        if let Some(v) = lookup("PERCOLATE_W_MIN") {
            self.relations.w_min = parse_env("PERCOLATE_W_MIN", &v)?;
        }
        if let Some(v) = lookup("PERCOLATE_K") {
            self.cpm.k = v
                .split(',')
                .map(|part| parse_env("PERCOLATE_K", part.trim()))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = lookup("PERCOLATE_JACCARD_THRESHOLD") {
            self.sgci.jaccard_threshold = parse_env("PERCOLATE_JACCARD_THRESHOLD", &v)?;
        }
        if let Some(v) = lookup("PERCOLATE_LTMIN") {
            self.sgci.ltmin = parse_env("PERCOLATE_LTMIN", &v)?;
        }
        if let Some(v) = lookup("PERCOLATE_JOBS") {
            self.run.jobs = Some(parse_env("PERCOLATE_JOBS", &v)?);
        }
        Ok(())
    }

    /// Checks everything up front and resolves the runtime parameter set.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        let events = self
            .input
            .events
            .clone()
            .ok_or_else(|| Error::Config("input.events is required".into()))?;
        if !events.exists() {
            return Err(Error::Config(format!(
                "events file {} does not exist",
                events.display()
            )));
        }
        if let Some(lexicon) = &self.input.lexicon {
            if !lexicon.exists() {
                return Err(Error::Config(format!(
                    "lexicon file {} does not exist",
                    lexicon.display()
                )));
            }
        }

        let period_start = parse_instant(
            self.slots
                .period_start
                .as_deref()
                .ok_or_else(|| Error::Config("slots.period_start is required".into()))?,
        )?;
        let period_end = parse_instant(
            self.slots
                .period_end
                .as_deref()
                .ok_or_else(|| Error::Config("slots.period_end is required".into()))?,
        )?;
        let slot_config = SlotConfig::new(
            period_start,
            period_end,
            Duration::days(self.slots.slot_length_days),
            self.slots.overlap,
        )?;

        let thresholds =
            PolarityThresholds::new(self.sentiment.neutral_low, self.sentiment.neutral_high)?;

        if self.relations.models.is_empty() {
            return Err(Error::Config("relations.models must not be empty".into()));
        }
        let mut models = Vec::new();
        for name in &self.relations.models {
            let model: RelationModel = name.parse()?;
            if !models.contains(&model) {
                models.push(model);
            }
        }
        if self.relations.w_min < 1 {
            return Err(Error::Config("relations.w_min must be at least 1".into()));
        }

        if self.cpm.k.is_empty() {
            return Err(Error::Config("cpm.k must not be empty".into()));
        }
        let mut ks = self.cpm.k.clone();
        ks.sort_unstable();
        ks.dedup();
        for &k in &ks {
            if k < 3 {
                return Err(Error::Config(format!(
                    "cpm.k entries must be >= 3, got {k}"
                )));
            }
        }

        let match_config = MatchConfig {
            jaccard_threshold: self.sgci.jaccard_threshold,
            ltmin: self.sgci.ltmin,
        };
        match_config.validate()?;

        Ok(ValidatedConfig {
            events,
            lexicon: self.input.lexicon.clone(),
            slot_config,
            thresholds,
            combine: self.sentiment.combine,
            models,
            w_min: self.relations.w_min,
            prune_whole_period: self.relations.prune_whole_period,
            build_options: BuildOptions {
                allow_self_loops: self.relations.allow_self_loops,
            },
            ks,
            intensity: self.cpm.intensity,
            match_config,
            out_dir: self.output.dir.clone(),
            jobs: self.run.jobs.unwrap_or(0),
        })
    }
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{name}={value:?}: {e}")))
}

fn parse_instant(text: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Config(format!("bad RFC 3339 instant {text:?}: {e}")))
}

/// The checked, resolved parameters a run executes with.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub events: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub slot_config: SlotConfig,
    pub thresholds: PolarityThresholds,
    pub combine: CombineRule,
    pub models: Vec<RelationModel>,
    pub w_min: u32,
    pub prune_whole_period: bool,
    pub build_options: BuildOptions,
    pub ks: Vec<usize>,
    pub intensity: Option<f64>,
    pub match_config: MatchConfig,
    pub out_dir: PathBuf,
    /// 0 means one worker per CPU.
    pub jobs: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[input]
events = "/tmp/events.ndjson"

[slots]
period_start = "2008-01-01T00:00:00Z"
period_end = "2008-03-01T00:00:00Z"
"#;

    #[test]
    fn defaults_fill_in_unset_sections() {
        let config = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(config.slots.slot_length_days, 30);
        assert_eq!(config.slots.overlap, 0.5);
        assert_eq!(config.relations.w_min, 2);
        assert_eq!(config.sgci.ltmin, 3);
        assert_eq!(config.cpm.k, vec![3]);
        assert_eq!(config.relations.models, vec!["post", "comment"]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MINIMAL}\n[cpm]\nkk = [3]\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn validation_requires_events_and_period() {
        let config = RunConfig::default();
        assert!(matches!(config.validate(), Err(Error::Config(_))));

        let mut config = RunConfig::from_toml_str(MINIMAL).unwrap();
        config.slots.period_start = None;
        // missing events file fails first; give it an existing one
        config.input.events = Some(std::env::temp_dir());
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let events = dir.path().join("e.ndjson");
        std::fs::write(&events, "").unwrap();
        let mut config = RunConfig::from_toml_str(MINIMAL).unwrap();
        config.input.events = Some(events);

        let mut bad = config.clone();
        bad.cpm.k = vec![2];
        assert!(bad.validate().is_err());

        let mut bad = config.clone();
        bad.relations.models = vec!["bogus".into()];
        assert!(bad.validate().is_err());

        let mut bad = config.clone();
        bad.sgci.jaccard_threshold = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = config.clone();
        bad.relations.w_min = 0;
        assert!(bad.validate().is_err());

        assert!(config.validate().is_ok());
    }

    #[test]
    fn env_overrides_apply() {
        let mut config = RunConfig::from_toml_str(MINIMAL).unwrap();
        let env = |key: &str| -> Option<String> {
            match key {
                "PERCOLATE_K" => Some("3,4".into()),
                "PERCOLATE_W_MIN" => Some("5".into()),
                "PERCOLATE_MODELS" => Some("comment, mean_neutral".into()),
                "PERCOLATE_JOBS" => Some("2".into()),
                "PERCOLATE_THRESHOLDS" => Some("-0.1,0.2".into()),
                _ => None,
            }
        };
        config.apply_env_overrides(env).unwrap();
        assert_eq!(config.cpm.k, vec![3, 4]);
        assert_eq!(config.relations.w_min, 5);
        assert_eq!(config.relations.models, vec!["comment", "mean_neutral"]);
        assert_eq!(config.run.jobs, Some(2));
        assert_eq!(config.sentiment.neutral_low, -0.1);
        assert_eq!(config.sentiment.neutral_high, 0.2);
    }

    #[test]
    fn relative_paths_resolve_against_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("run.toml");
        std::fs::write(
            &config_path,
            r#"
[input]
events = "data/events.ndjson"

[output]
dir = "results"
"#,
        )
        .unwrap();
        let config = RunConfig::from_toml_path(&config_path).unwrap();
        assert_eq!(
            config.input.events,
            Some(dir.path().join("data/events.ndjson"))
        );
        assert_eq!(config.output.dir, dir.path().join("results"));
    }
}
