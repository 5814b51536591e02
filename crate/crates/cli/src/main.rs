//! `percolate` runs the group-analysis pipeline over an event log.
//!
//! Subcommands mirror the pipeline stages (`ingest`, `build-graphs`,
//! `detect`, `track`, `report`), `run` executes all of them, and `compare`
//! diffs two report files. Configuration comes from a TOML file, overridden
//! by `PERCOLATE_*` environment variables, overridden by flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use percolate_core::pipeline::{self, RunConfig, Stage};
use percolate_core::Error;

#[derive(Parser)]
#[command(
    name = "percolate",
    version,
    about = "Temporal social-graph group detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage end to end and write a manifest.
    Run(ConfigArgs),
    /// Parse events, score sentiment, and resolve interactions.
    Ingest(ConfigArgs),
    /// Build pruned per-slot relation graphs from interactions.
    #[command(name = "build-graphs")]
    BuildGraphs(ConfigArgs),
    /// Detect overlapping groups per slot by k-clique percolation.
    Detect(ConfigArgs),
    /// Chain per-slot groups into stable groups.
    Track(ConfigArgs),
    /// Compute statistics reports from graphs and groups.
    Report(ConfigArgs),
    /// Print side-by-side deltas of two report JSON files.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,

    /// Event log (NDJSON, or CSV by extension).
    #[arg(long)]
    events: Option<PathBuf>,

    /// Sentiment lexicon CSV (`word,weight`).
    #[arg(long)]
    lexicon: Option<PathBuf>,

    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Relation models, comma separated (e.g. `post,comment,mean_neutral`).
    #[arg(long)]
    models: Option<String>,

    /// Clique sizes: a comma list (`3,5`) or an inclusive range (`3..5`).
    #[arg(long)]
    k: Option<String>,

    /// Minimum edge weight kept by pruning.
    #[arg(long = "w-min")]
    w_min: Option<u32>,

    /// Polarity thresholds as `neutral_low,neutral_high`.
    #[arg(long)]
    thresholds: Option<String>,

    /// Minimum modified Jaccard similarity for group matching.
    #[arg(long = "jaccard-threshold")]
    jaccard_threshold: Option<f64>,

    /// Minimum chain length (slots) for a stable group.
    #[arg(long)]
    ltmin: Option<usize>,

    /// Analysis period start, RFC 3339.
    #[arg(long = "period-start")]
    period_start: Option<String>,

    /// Analysis period end, RFC 3339.
    #[arg(long = "period-end")]
    period_end: Option<String>,

    /// Slot length in days.
    #[arg(long = "slot-days")]
    slot_days: Option<i64>,

    /// Overlap fraction between consecutive slots, in [0, 1).
    #[arg(long)]
    overlap: Option<f64>,

    /// Worker threads (default: one per CPU).
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// First report JSON file.
    report_a: PathBuf,
    /// Second report JSON file.
    report_b: PathBuf,
    /// Emit the diff as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_k_spec(spec: &str) -> Result<Vec<usize>, Error> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad k range start {lo:?}: {e}")))?;
        let hi: usize = hi
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|e| Error::Config(format!("bad k range end {hi:?}: {e}")))?;
        if hi < lo {
            return Err(Error::Config(format!("empty k range {spec:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad k value {part:?}: {e}")))
        })
        .collect()
}

impl ConfigArgs {
    fn build_config(&self) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_toml_path(path)?,
            None => RunConfig::default(),
        };
        config.apply_env_overrides(|key| std::env::var(key).ok())?;

        if let Some(v) = &self.events {
            config.input.events = Some(v.clone());
        }
        if let Some(v) = &self.lexicon {
            config.input.lexicon = Some(v.clone());
        }
        if let Some(v) = &self.out {
            config.output.dir = v.clone();
        }
        if let Some(v) = &self.models {
            config.relations.models = v.split(',').map(|m| m.trim().to_string()).collect();
        }
        if let Some(v) = &self.k {
            config.cpm.k = parse_k_spec(v)?;
        }
        if let Some(v) = self.w_min {
            config.relations.w_min = v;
        }
        if let Some(v) = &self.thresholds {
            let t: percolate_core::sentiment::PolarityThresholds = v.parse()?;
            config.sentiment.neutral_low = t.neutral_low;
            config.sentiment.neutral_high = t.neutral_high;
        }
        if let Some(v) = self.jaccard_threshold {
            config.sgci.jaccard_threshold = v;
        }
        if let Some(v) = self.ltmin {
            config.sgci.ltmin = v;
        }
        if let Some(v) = &self.period_start {
            config.slots.period_start = Some(v.clone());
        }
        if let Some(v) = &self.period_end {
            config.slots.period_end = Some(v.clone());
        }
        if let Some(v) = self.slot_days {
            config.slots.slot_length_days = v;
        }
        if let Some(v) = self.overlap {
            config.slots.overlap = v;
        }
        if let Some(v) = self.jobs {
            config.run.jobs = Some(v);
        }
        Ok(config)
    }
}

fn run_full(args: &ConfigArgs) -> Result<(), Error> {
    let config = args.build_config()?;
    let manifest = pipeline::run(&config)?;
    for stage in &manifest.stages {
        eprintln!(
            "stage {:<13} {:>6} ms  {} file(s)",
            stage.name,
            stage.wall_ms,
            stage.outputs.len()
        );
    }
    println!(
        "wrote {} files to {}",
        manifest.outputs.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn run_one_stage(args: &ConfigArgs, stage: Stage) -> Result<(), Error> {
    let config = args.build_config()?;
    let outputs = pipeline::run_stage(&config, stage)?;
    println!(
        "stage {} wrote {} file(s) to {}",
        stage.name(),
        outputs.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), Error> {
    let diff = pipeline::compare_files(&args.report_a, &args.report_b)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&diff)
                .map_err(|e| Error::Domain(format!("diff serialize: {e}")))?
        );
    } else {
        print!("{}", diff.render_text());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => run_full(&args),
        Command::Ingest(args) => run_one_stage(&args, Stage::Ingest),
        Command::BuildGraphs(args) => run_one_stage(&args, Stage::BuildGraphs),
        Command::Detect(args) => run_one_stage(&args, Stage::Detect),
        Command::Track(args) => run_one_stage(&args, Stage::Track),
        Command::Report(args) => run_one_stage(&args, Stage::Report),
        Command::Compare(args) => run_compare(&args),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) => 2,
        Error::Stage { .. } => 3,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // every variant's Display already chains its cause
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
