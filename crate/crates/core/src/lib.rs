//! Group detection and tracking in temporal interaction networks.
//!
//! The crate turns a log of timestamped post/comment events into a series of
//! directed weighted relation graphs (one per sliding time slot and relation
//! model), detects overlapping groups in each slot with directed k-clique
//! percolation, chains similar groups across consecutive slots into stable
//! groups, and computes per-group and corpus-level statistics.
//!
//! The stages are independent modules wired together by [`pipeline`]:
//!
//! * [`ingest`]: event parsing, time-slot assignment, interaction resolution
//! * [`sentiment`]: lexicon scoring and polarity classification
//! * [`relations`]: per-slot directed weighted graphs under a relation model
//! * [`cpm`]: directed k-clique percolation (overlapping groups per slot)
//! * [`sgci`]: cross-slot group matching and stable-group chains
//! * [`metrics`]: density, stability, cohesion and corpus statistics
//! * [`pipeline`]: end-to-end runs, artifact files, manifests, comparisons

pub mod cpm;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod relations;
pub mod sentiment;
pub mod sgci;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
