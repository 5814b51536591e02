//! Event parsing, overlapping time-slot assignment, and interaction
//! resolution.
//!
//! Raw post/comment events arrive as NDJSON or CSV records. Comments become
//! [`Interaction`]s: the initiator is the comment author; the addressee is
//! the parent comment's author when one exists. Events are assigned to every
//! time slot covering their timestamp, which with overlapping slots is more
//! than one.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::sentiment::Scorer;
use crate::{Error, Result};

/// Opaque case-sensitive user identifier. Non-empty after trimming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct UserId(String);

// Deserialization funnels through the validating constructor, so blank ids
// in input records surface as per-record errors instead of empty nodes.
impl<'de> Deserialize<'de> for UserId {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = String::deserialize(deserializer)?;
        UserId::new(&raw).map_err(serde::de::Error::custom)
    }
}

impl UserId {
    pub fn new(raw: &str) -> Result<Self> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(Error::Domain("empty user id".into()));
        }
        Ok(UserId(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for UserId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UserId::new(s)
    }
}

/// What kind of event a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Post,
    CommentOnPost,
    CommentOnComment,
}

impl EventKind {
    pub fn is_comment(self) -> bool {
        matches!(self, EventKind::CommentOnPost | EventKind::CommentOnComment)
    }
}

/// One raw log record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub author: UserId,
    pub post_author: UserId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_comment_author: Option<UserId>,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub text: String,
}

impl RawEvent {
    /// Checks the structural invariants tying kind to the author fields.
    pub fn validate(&self) -> Result<()> {
        if self.event_id.trim().is_empty() {
            return Err(Error::Domain("empty event_id".into()));
        }
        match self.kind {
            EventKind::Post => {
                if self.author != self.post_author {
                    return Err(Error::Domain(format!(
                        "event {}: post author {} differs from post_author {}",
                        self.event_id, self.author, self.post_author
                    )));
                }
                if self.parent_comment_author.is_some() {
                    return Err(Error::Domain(format!(
                        "event {}: post with parent_comment_author",
                        self.event_id
                    )));
                }
            }
            EventKind::CommentOnComment => {
                if self.parent_comment_author.is_none() {
                    return Err(Error::Domain(format!(
                        "event {}: comment-on-comment without parent_comment_author",
                        self.event_id
                    )));
                }
            }
            EventKind::CommentOnPost => {}
        }
        Ok(())
    }
}

/// One resolved comment interaction. `slot_ids` lists every time slot the
/// event falls into, strictly increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Interaction {
    pub event_id: String,
    pub initiator: UserId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addressee: Option<UserId>,
    pub post_author: UserId,
    pub slot_ids: Vec<usize>,
    pub kind: EventKind,
    pub sentiment: f64,
    /// True when the author addressed their own post or comment; such
    /// interactions are kept here but skipped by default when building
    /// relation graphs.
    #[serde(default)]
    pub self_directed: bool,
}

/// Sliding-window layout over the analysis period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub period_start: DateTime<Utc>,
    pub period_end: DateTime<Utc>,
    /// Whole seconds per slot.
    pub slot_length_secs: i64,
    /// Fraction of a slot shared with its successor, in `[0, 1)`.
    pub overlap_fraction: f64,
}

impl SlotConfig {
    pub fn new(
        period_start: DateTime<Utc>,
        period_end: DateTime<Utc>,
        slot_length: Duration,
        overlap_fraction: f64,
    ) -> Result<Self> {
        let cfg = Self {
            period_start,
            period_end,
            slot_length_secs: slot_length.num_seconds(),
            overlap_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_start >= self.period_end {
            return Err(Error::Config(format!(
                "period_start {} is not before period_end {}",
                self.period_start, self.period_end
            )));
        }
        if self.slot_length_secs <= 0 {
            return Err(Error::Config("slot_length must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap_fraction {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        if self.step_secs() < 1 {
            return Err(Error::Config(
                "slot step rounds to zero; reduce overlap or lengthen slots".into(),
            ));
        }
        Ok(())
    }

    pub fn slot_length(&self) -> Duration {
        Duration::seconds(self.slot_length_secs)
    }

    /// Distance between consecutive slot starts, in whole seconds.
    pub fn step_secs(&self) -> i64 {
        ((self.slot_length_secs as f64) * (1.0 - self.overlap_fraction)).round() as i64
    }

    pub fn step(&self) -> Duration {
        Duration::seconds(self.step_secs())
    }
}

/// One analysis window: `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSlot {
    pub index: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeSlot {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

const MAX_SLOTS: usize = 1_000_000;

/// Lays out the slots: starts at `period_start + i * step` for every `i`
/// with a start strictly before `period_end`. The last slot may extend past
/// the period end.
pub fn generate_slots(config: &SlotConfig) -> Result<Vec<TimeSlot>> {
    config.validate()?;
    let step = config.step();
    let length = config.slot_length();
    let mut slots = Vec::new();
    let mut start = config.period_start;
    while start < config.period_end {
        if slots.len() >= MAX_SLOTS {
            return Err(Error::Config(format!(
                "slot layout exceeds {MAX_SLOTS} slots; check slot_length and overlap"
            )));
        }
        slots.push(TimeSlot {
            index: slots.len(),
            start,
            end: start + length,
        });
        start += step;
    }
    Ok(slots)
}

/// Returns every slot index whose window covers `timestamp`, ascending.
/// Outside all slots the result is empty.
pub fn assign_slots(timestamp: DateTime<Utc>, slots: &[TimeSlot]) -> Vec<usize> {
    // Slot starts and ends both increase with the index, so the covering
    // slots form one contiguous run ending just before the first slot that
    // starts after the timestamp.
    let upper = slots.partition_point(|s| s.start <= timestamp);
    let mut found: Vec<usize> = slots[..upper]
        .iter()
        .rev()
        .take_while(|s| timestamp < s.end)
        .map(|s| s.index)
        .collect();
    found.reverse();
    found
}

/// Per-slot comment counts used for the response-fraction series.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SlotResponseStats {
    pub slot_index: usize,
    pub comments: usize,
    pub comment_on_comment: usize,
    pub response_fraction: f64,
}

/// Counters accumulated while resolving a corpus.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestStats {
    /// Records read, including ones that failed to parse.
    pub total_records: usize,
    pub posts: usize,
    /// Structurally valid comment events, in or out of period.
    pub comments: usize,
    pub comment_on_comment: usize,
    /// Interactions produced (comments inside the period).
    pub interactions: usize,
    pub dropped_out_of_period: usize,
    pub malformed: usize,
    pub duplicate_ids: usize,
    pub self_directed: usize,
    /// Distinct users seen in any role.
    pub known_users: usize,
    /// Comment-on-comment share of all comments (0 when there are none).
    pub comment_response_fraction: f64,
    pub per_slot: Vec<SlotResponseStats>,
    /// First error messages encountered (capped; `malformed` has the full count).
    pub errors: Vec<String>,
}

const MAX_RECORDED_ERRORS: usize = 100;

impl IngestStats {
    fn record_error(&mut self, msg: String) {
        self.malformed += 1;
        self.push_error(msg);
    }

    fn push_error(&mut self, msg: String) {
        if self.errors.len() < MAX_RECORDED_ERRORS {
            self.errors.push(msg);
        }
    }
}

/// Resolves a stream of parsed-or-failed records into interactions.
///
/// Malformed records are counted and skipped. Posts register their author
/// but yield no interaction. Comments outside every slot are dropped and
/// counted. The output is sorted by `event_id`, so the result does not
/// depend on input order.
pub fn resolve_interactions<I>(
    events: I,
    slots: &[TimeSlot],
    scorer: &Scorer,
) -> (Vec<Interaction>, IngestStats)
where
    I: IntoIterator<Item = std::result::Result<RawEvent, String>>,
{
    let mut stats = IngestStats::default();
    let mut interactions = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut users: HashSet<UserId> = HashSet::new();

    for item in events {
        stats.total_records += 1;
        let event = match item {
            Ok(e) => e,
            Err(msg) => {
                stats.record_error(msg);
                continue;
            }
        };
        if let Err(e) = event.validate() {
            stats.record_error(e.to_string());
            continue;
        }
        if !seen_ids.insert(event.event_id.clone()) {
            stats.duplicate_ids += 1;
            stats.push_error(format!("event {}: duplicate event_id", event.event_id));
            continue;
        }

        users.insert(event.author.clone());
        users.insert(event.post_author.clone());
        if let Some(parent) = &event.parent_comment_author {
            users.insert(parent.clone());
        }

        match event.kind {
            EventKind::Post => {
                stats.posts += 1;
            }
            EventKind::CommentOnPost | EventKind::CommentOnComment => {
                stats.comments += 1;
                if event.kind == EventKind::CommentOnComment {
                    stats.comment_on_comment += 1;
                }
                let slot_ids = assign_slots(event.timestamp, slots);
                if slot_ids.is_empty() {
                    stats.dropped_out_of_period += 1;
                    continue;
                }
                let addressee = match event.kind {
                    EventKind::CommentOnComment => event.parent_comment_author.clone(),
                    _ => None,
                };
                let self_directed =
                    addressee.as_ref() == Some(&event.author) || event.post_author == event.author;
                if self_directed {
                    stats.self_directed += 1;
                }
                interactions.push(Interaction {
                    event_id: event.event_id,
                    initiator: event.author,
                    addressee,
                    post_author: event.post_author,
                    slot_ids,
                    kind: event.kind,
                    sentiment: scorer.score(&event.text),
                    self_directed,
                });
            }
        }
    }

    interactions.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    stats.interactions = interactions.len();
    stats.known_users = users.len();
    stats.comment_response_fraction = if stats.comments == 0 {
        0.0
    } else {
        stats.comment_on_comment as f64 / stats.comments as f64
    };
    stats.per_slot = per_slot_response(&interactions, slots.len());
    (interactions, stats)
}

fn per_slot_response(interactions: &[Interaction], slot_count: usize) -> Vec<SlotResponseStats> {
    let mut per_slot: Vec<SlotResponseStats> = (0..slot_count)
        .map(|slot_index| SlotResponseStats {
            slot_index,
            ..Default::default()
        })
        .collect();
    for interaction in interactions {
        for &slot in &interaction.slot_ids {
            let entry = &mut per_slot[slot];
            entry.comments += 1;
            if interaction.kind == EventKind::CommentOnComment {
                entry.comment_on_comment += 1;
            }
        }
    }
    for entry in &mut per_slot {
        entry.response_fraction = if entry.comments == 0 {
            0.0
        } else {
            entry.comment_on_comment as f64 / entry.comments as f64
        };
    }
    per_slot
}

/// Reads NDJSON events: one JSON object per line, blank lines skipped.
pub fn read_events_ndjson<R: Read>(reader: R) -> Vec<std::result::Result<RawEvent, String>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| {
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(format!("line {}: {e}", idx + 1))),
            };
            if line.trim().is_empty() {
                return None;
            }
            Some(
                serde_json::from_str::<RawEvent>(&line)
                    .map_err(|e| format!("line {}: {e}", idx + 1)),
            )
        })
        .collect()
}

/// Reads CSV events with the header
/// `event_id,kind,author,post_author,parent_comment_author,timestamp,text`.
pub fn read_events_csv<R: Read>(reader: R) -> Vec<std::result::Result<RawEvent, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    rdr.deserialize::<RawEvent>()
        .enumerate()
        .map(|(idx, rec)| rec.map_err(|e| format!("record {}: {e}", idx + 1)))
        .collect()
}

/// Reads an event file, picking the format from the extension
/// (`.csv` is CSV; everything else is treated as NDJSON).
pub fn read_events_path(path: &Path) -> Result<Vec<std::result::Result<RawEvent, String>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .map(|ext| ext.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    Ok(if is_csv {
        read_events_csv(file)
    } else {
        read_events_ndjson(file)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn days(n: i64) -> Duration {
        Duration::days(n)
    }

    fn config(start: &str, end: &str, len_days: i64, overlap: f64) -> SlotConfig {
        SlotConfig::new(ts(start), ts(end), days(len_days), overlap).unwrap()
    }

    #[test]
    fn slots_with_half_overlap() {
        // 60-day period, 30-day slots, 15-day step: starts at days 0/15/30/45.
        let cfg = config("2008-01-01T00:00:00Z", "2008-03-01T00:00:00Z", 30, 0.5);
        let slots = generate_slots(&cfg).unwrap();
        assert_eq!(slots.len(), 4);
        for (i, slot) in slots.iter().enumerate() {
            assert_eq!(slot.index, i);
            assert_eq!(slot.start, cfg.period_start + days(15 * i as i64));
            assert_eq!(slot.end - slot.start, days(30));
        }
    }

    #[test]
    fn slots_without_overlap_tile_the_period() {
        let cfg = config("2008-01-01T00:00:00Z", "2008-03-01T00:00:00Z", 30, 0.0);
        let slots = generate_slots(&cfg).unwrap();
        assert_eq!(slots.len(), 2);
        assert_eq!(slots[1].start, slots[0].end);
    }

    #[test]
    fn reference_period_has_104_slots_under_both_end_conventions() {
        // 2008-01-01 through 2012-03-31, 30-day slots, 50% overlap. The
        // count is stable whether the final day is treated as midnight
        // inclusive or exclusive.
        for end in ["2012-03-31T00:00:00Z", "2012-04-01T00:00:00Z"] {
            let cfg = config("2008-01-01T00:00:00Z", end, 30, 0.5);
            let slots = generate_slots(&cfg).unwrap();
            assert_eq!(slots.len(), 104, "period end {end}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let start = ts("2008-01-01T00:00:00Z");
        assert!(SlotConfig::new(start, start, days(30), 0.5).is_err());
        assert!(SlotConfig::new(start, start + days(10), days(0), 0.5).is_err());
        assert!(SlotConfig::new(start, start + days(10), days(30), 1.0).is_err());
        assert!(SlotConfig::new(start, start + days(10), days(30), -0.1).is_err());
    }

    #[test]
    fn assign_slots_edges() {
        let cfg = config("2008-01-01T00:00:00Z", "2008-03-01T00:00:00Z", 30, 0.5);
        let slots = generate_slots(&cfg).unwrap();
        assert_eq!(assign_slots(cfg.period_start, &slots), vec![0]);
        assert_eq!(
            assign_slots(cfg.period_start + days(20), &slots),
            vec![0, 1]
        );
        assert_eq!(
            assign_slots(cfg.period_end + days(30), &slots),
            Vec::<usize>::new()
        );
        assert_eq!(
            assign_slots(cfg.period_start - Duration::seconds(1), &slots),
            Vec::<usize>::new()
        );
        // Last slot extends past period_end: day 74 is still covered.
        assert_eq!(assign_slots(cfg.period_start + days(74), &slots), vec![3]);
    }

    fn post(id: &str, author: &str, t: &str) -> RawEvent {
        RawEvent {
            event_id: id.into(),
            kind: EventKind::Post,
            author: UserId::new(author).unwrap(),
            post_author: UserId::new(author).unwrap(),
            parent_comment_author: None,
            timestamp: ts(t),
            text: String::new(),
        }
    }

    fn comment(
        id: &str,
        author: &str,
        post_author: &str,
        parent: Option<&str>,
        t: &str,
    ) -> RawEvent {
        RawEvent {
            event_id: id.into(),
            kind: if parent.is_some() {
                EventKind::CommentOnComment
            } else {
                EventKind::CommentOnPost
            },
            author: UserId::new(author).unwrap(),
            post_author: UserId::new(post_author).unwrap(),
            parent_comment_author: parent.map(|p| UserId::new(p).unwrap()),
            timestamp: ts(t),
            text: String::new(),
        }
    }

    fn fixture_slots() -> Vec<TimeSlot> {
        let cfg = config("2008-01-01T00:00:00Z", "2008-03-01T00:00:00Z", 30, 0.5);
        generate_slots(&cfg).unwrap()
    }

    #[test]
    fn comment_addressing() {
        let slots = fixture_slots();
        let events = vec![
            Ok(comment("e1", "a", "c", Some("b"), "2008-01-02T00:00:00Z")),
            Ok(comment("e2", "a", "c", None, "2008-01-02T00:00:00Z")),
        ];
        let (interactions, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert_eq!(interactions.len(), 2);
        let coc = &interactions[0];
        assert_eq!(coc.addressee, Some(UserId::new("b").unwrap()));
        assert_eq!(coc.post_author, UserId::new("c").unwrap());
        let cop = &interactions[1];
        assert_eq!(cop.addressee, None);
        assert_eq!(stats.comment_response_fraction, 0.5);
    }

    #[test]
    fn response_fraction_half() {
        let slots = fixture_slots();
        let events = vec![
            Ok(comment("e1", "a", "c", None, "2008-01-02T00:00:00Z")),
            Ok(comment("e2", "b", "c", None, "2008-01-02T00:00:00Z")),
            Ok(comment("e3", "a", "c", Some("b"), "2008-01-02T00:00:00Z")),
            Ok(comment("e4", "b", "c", Some("a"), "2008-01-02T00:00:00Z")),
        ];
        let (_, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert_eq!(stats.comments, 4);
        assert_eq!(stats.comment_response_fraction, 0.5);
    }

    #[test]
    fn posts_register_but_produce_no_interaction() {
        let slots = fixture_slots();
        let events = vec![Ok(post("p1", "c", "2008-01-02T00:00:00Z"))];
        let (interactions, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert!(interactions.is_empty());
        assert_eq!(stats.posts, 1);
        assert_eq!(stats.known_users, 1);
    }

    #[test]
    fn out_of_period_events_dropped_and_counted() {
        let slots = fixture_slots();
        let events = vec![
            Ok(comment("e1", "a", "c", None, "2007-12-01T00:00:00Z")),
            Ok(comment("e2", "a", "c", None, "2008-01-02T00:00:00Z")),
        ];
        let (interactions, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert_eq!(interactions.len(), 1);
        assert_eq!(stats.dropped_out_of_period, 1);
        assert_eq!(stats.interactions, 1);
        assert_eq!(
            stats.interactions,
            stats.comments - stats.dropped_out_of_period
        );
    }

    #[test]
    fn malformed_and_duplicate_records_fail_soft() {
        let slots = fixture_slots();
        let mut bad_post = post("p1", "a", "2008-01-02T00:00:00Z");
        bad_post.post_author = UserId::new("someone-else").unwrap();
        let events = vec![
            Err("line 1: not json".to_string()),
            Ok(bad_post),
            Ok(comment("e2", "a", "c", None, "2008-01-02T00:00:00Z")),
            Ok(comment("e2", "a", "c", None, "2008-01-03T00:00:00Z")),
            // comment-on-comment without parent author
            Ok(RawEvent {
                parent_comment_author: None,
                ..comment("e3", "a", "c", Some("b"), "2008-01-02T00:00:00Z")
            }),
        ];
        let (interactions, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert_eq!(interactions.len(), 1);
        assert_eq!(stats.total_records, 5);
        assert_eq!(stats.malformed, 3);
        assert_eq!(stats.duplicate_ids, 1);
        assert_eq!(stats.errors.len(), 4);
    }

    #[test]
    fn self_directed_flagged() {
        let slots = fixture_slots();
        let events = vec![
            Ok(comment("e1", "a", "a", None, "2008-01-02T00:00:00Z")),
            Ok(comment("e2", "a", "c", Some("a"), "2008-01-02T00:00:00Z")),
            Ok(comment("e3", "a", "c", Some("b"), "2008-01-02T00:00:00Z")),
        ];
        let (interactions, stats) = resolve_interactions(events, &slots, &Scorer::default());
        assert_eq!(stats.self_directed, 2);
        assert!(interactions[0].self_directed);
        assert!(interactions[1].self_directed);
        assert!(!interactions[2].self_directed);
    }

    #[test]
    fn output_sorted_by_event_id_regardless_of_input_order() {
        let slots = fixture_slots();
        let forward = vec![
            Ok(comment("a1", "a", "c", None, "2008-01-02T00:00:00Z")),
            Ok(comment("b2", "b", "c", None, "2008-01-05T00:00:00Z")),
        ];
        let backward = vec![
            Ok(comment("b2", "b", "c", None, "2008-01-05T00:00:00Z")),
            Ok(comment("a1", "a", "c", None, "2008-01-02T00:00:00Z")),
        ];
        let (fwd, _) = resolve_interactions(forward, &slots, &Scorer::default());
        let (bwd, _) = resolve_interactions(backward, &slots, &Scorer::default());
        let ids: Vec<&str> = fwd.iter().map(|i| i.event_id.as_str()).collect();
        let ids2: Vec<&str> = bwd.iter().map(|i| i.event_id.as_str()).collect();
        assert_eq!(ids, ids2);
        assert_eq!(ids, vec!["a1", "b2"]);
    }

    #[test]
    fn ndjson_round_trip_and_errors() {
        let line = r#"{"event_id":"e1","kind":"CommentOnComment","author":"a","post_author":"c","parent_comment_author":"b","timestamp":"2008-01-02T00:00:00Z","text":"hi"}"#;
        let blank_author = r#"{"event_id":"e2","kind":"Post","author":"  ","post_author":"  ","timestamp":"2008-01-02T00:00:00Z","text":""}"#;
        let input = format!("{line}\n\nnot-json\n{blank_author}\n");
        let records = read_events_ndjson(input.as_bytes());
        assert_eq!(records.len(), 3);
        assert!(records[0].is_ok());
        assert!(records[1].is_err());
        assert!(records[2].is_err(), "blank user id must not parse");
        let e = records[0].as_ref().unwrap();
        assert_eq!(e.kind, EventKind::CommentOnComment);
        assert_eq!(e.parent_comment_author, Some(UserId::new("b").unwrap()));
    }

    #[test]
    fn csv_round_trip() {
        let input = "event_id,kind,author,post_author,parent_comment_author,timestamp,text\n\
                     e1,CommentOnPost,a,c,,2008-01-02T00:00:00Z,hello\n\
                     e2,CommentOnComment,a,c,b,2008-01-03T00:00:00Z,\"good, stuff\"\n";
        let records = read_events_csv(input.as_bytes());
        assert_eq!(records.len(), 2);
        let e1 = records[0].as_ref().unwrap();
        assert_eq!(e1.parent_comment_author, None);
        let e2 = records[1].as_ref().unwrap();
        assert_eq!(e2.parent_comment_author, Some(UserId::new("b").unwrap()));
        assert_eq!(e2.text, "good, stuff");
    }

    #[test]
    fn user_id_requires_content() {
        assert!(UserId::new("  ").is_err());
        assert_eq!(UserId::new(" bob ").unwrap().as_str(), "bob");
        assert_ne!(UserId::new("Bob").unwrap(), UserId::new("bob").unwrap());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Every instant inside the period is covered by at least one
            /// slot; past the first half-slot, exactly two (50% overlap).
            #[test]
            fn coverage_with_half_overlap(offset_secs in 0i64..5_184_000) {
                let cfg = config("2008-01-01T00:00:00Z", "2008-03-01T00:00:00Z", 30, 0.5);
                let slots = generate_slots(&cfg).unwrap();
                let t = cfg.period_start + Duration::seconds(offset_secs);
                let assigned = assign_slots(t, &slots);
                if t < cfg.period_end {
                    prop_assert!(!assigned.is_empty());
                    let half_slot = Duration::seconds(cfg.slot_length_secs / 2);
                    if t >= cfg.period_start + half_slot {
                        prop_assert_eq!(assigned.len(), 2);
                    }
                }
                // Against the straightforward scan.
                let scanned: Vec<usize> = slots
                    .iter()
                    .filter(|s| s.contains(t))
                    .map(|s| s.index)
                    .collect();
                prop_assert_eq!(assigned, scanned);
            }

            #[test]
            fn assign_matches_scan_for_arbitrary_overlap(
                offset_secs in -100_000i64..6_000_000,
                overlap in 0.0f64..0.95,
                len_days in 1i64..40,
            ) {
                let cfg = SlotConfig::new(
                    ts("2008-01-01T00:00:00Z"),
                    ts("2008-03-01T00:00:00Z"),
                    days(len_days),
                    overlap,
                );
                prop_assume!(cfg.is_ok());
                let cfg = cfg.unwrap();
                let slots = generate_slots(&cfg).unwrap();
                let t = cfg.period_start + Duration::seconds(offset_secs);
                let scanned: Vec<usize> = slots
                    .iter()
                    .filter(|s| s.contains(t))
                    .map(|s| s.index)
                    .collect();
                prop_assert_eq!(assign_slots(t, &slots), scanned);
            }
        }
    }
}
