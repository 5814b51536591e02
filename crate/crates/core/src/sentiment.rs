//! Lexicon-based sentiment scoring and polarity classification.
//!
//! A [`Lexicon`] maps canonical word forms to weights in `[-1, 1]`. Scoring
//! tokenizes a text on Unicode word boundaries, looks every token up, and
//! combines the matched weights with a configurable [`CombineRule`]. The
//! resulting score is classified into [`Polarity`] buckets by a pair of
//! thresholds.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use crate::{Error, Result};

/// Word-weight dictionary. Weights are in `[-1, 1]`; zero-weight entries are
/// "known but neutral" and carry no polar signal.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

/// Outcome of loading a lexicon file: the lexicon plus non-fatal warnings
/// (duplicate words, clamped weights).
#[derive(Debug)]
pub struct LexiconLoad {
    pub lexicon: Lexicon,
    pub warnings: Vec<String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a word under its canonical form (lowercased, Unicode NFC).
    /// Weights outside `[-1, 1]` are rejected.
    pub fn insert(&mut self, word: &str, weight: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&weight) || weight.is_nan() {
            return Err(Error::Domain(format!(
                "lexicon weight {weight} for {word:?} outside [-1, 1]"
            )));
        }
        self.entries.insert(canonical(word), weight);
        Ok(())
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.entries.get(&canonical(token)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads a `word,weight` CSV (UTF-8, one entry per line, no header).
    /// Duplicate words keep the last occurrence and produce a warning.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<LexiconLoad> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut lexicon = Lexicon::new();
        let mut warnings = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record =
                record.map_err(|e| Error::Domain(format!("lexicon line {}: {e}", line + 1)))?;
            if record.len() < 2 || record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let word = &record[0];
            let weight: f64 = record[1].parse().map_err(|e| {
                Error::Domain(format!("lexicon line {}: bad weight: {e}", line + 1))
            })?;
            let key = canonical(word);
            if lexicon.entries.contains_key(&key) {
                warnings.push(format!(
                    "lexicon line {}: duplicate word {word:?}, last entry wins",
                    line + 1
                ));
            }
            lexicon.insert(word, weight)?;
        }
        Ok(LexiconLoad { lexicon, warnings })
    }

    pub fn from_csv_path(path: &Path) -> Result<LexiconLoad> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }
}

fn canonical(word: &str) -> String {
    word.nfc().collect::<String>().to_lowercase()
}

/// Three-way polarity of an interaction or a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

/// Score thresholds separating the three polarity buckets.
///
/// `score < neutral_low` is negative, `score > neutral_high` is positive,
/// everything in between (boundaries included) is neutral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityThresholds {
    pub neutral_low: f64,
    pub neutral_high: f64,
}

impl Default for PolarityThresholds {
    fn default() -> Self {
        Self {
            neutral_low: 0.0,
            neutral_high: 0.3,
        }
    }
}

impl PolarityThresholds {
    pub fn new(neutral_low: f64, neutral_high: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&neutral_low)
            || !(-1.0..=1.0).contains(&neutral_high)
            || neutral_low > neutral_high
        {
            return Err(Error::Config(format!(
                "polarity thresholds must satisfy -1 <= low <= high <= 1, got {neutral_low},{neutral_high}"
            )));
        }
        Ok(Self {
            neutral_low,
            neutral_high,
        })
    }
}

impl FromStr for PolarityThresholds {
    type Err = Error;

    /// Parses the `low,high` form used on the command line.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "expected thresholds as `neutral_low,neutral_high`, got {s:?}"
            )));
        }
        let low: f64 = parts[0]
            .parse()
            .map_err(|e| Error::Config(format!("bad neutral_low {:?}: {e}", parts[0])))?;
        let high: f64 = parts[1]
            .parse()
            .map_err(|e| Error::Config(format!("bad neutral_high {:?}: {e}", parts[1])))?;
        Self::new(low, high)
    }
}

/// Classifies a score into exactly one polarity bucket.
pub fn classify(score: f64, thresholds: &PolarityThresholds) -> Polarity {
    if score < thresholds.neutral_low {
        Polarity::Negative
    } else if score > thresholds.neutral_high {
        Polarity::Positive
    } else {
        Polarity::Neutral
    }
}

/// How matched word weights combine into one text score. All rules clamp the
/// final value into `[-1, 1]` and return 0 when no polar word matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Sum of matched weights divided by the number of matched polar words.
    #[default]
    MeanPolar,
    /// Raw sum of matched weights, clamped.
    ClampedSum,
    /// Sum divided by the square root of the number of matched polar words.
    SumOverSqrt,
}

impl fmt::Display for CombineRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CombineRule::MeanPolar => "mean_polar",
            CombineRule::ClampedSum => "clamped_sum",
            CombineRule::SumOverSqrt => "sum_over_sqrt",
        };
        f.write_str(name)
    }
}

impl FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_polar" => Ok(CombineRule::MeanPolar),
            "clamped_sum" => Ok(CombineRule::ClampedSum),
            "sum_over_sqrt" => Ok(CombineRule::SumOverSqrt),
            other => Err(Error::Config(format!("unknown combine rule {other:?}"))),
        }
    }
}

/// Lexicon plus combine rule; the unit handed to the ingest stage.
#[derive(Debug, Clone, Default)]
pub struct Scorer {
    pub lexicon: Lexicon,
    pub rule: CombineRule,
}

impl Scorer {
    pub fn new(lexicon: Lexicon, rule: CombineRule) -> Self {
        Self { lexicon, rule }
    }

    pub fn score(&self, text: &str) -> f64 {
        score_text(text, &self.lexicon, self.rule)
    }
}

/// Scores a text against a lexicon.
///
/// Tokens come from Unicode word segmentation, lowercased. With `P` matched
/// positive-weight words, `N` matched negative-weight words and `S` the sum
/// of all matched weights, the default rule returns `clamp(S / (P + N))`,
/// or 0 when `P + N = 0`. Zero-weight matches contribute nothing to either
/// count or sum.
pub fn score_text(text: &str, lexicon: &Lexicon, rule: CombineRule) -> f64 {
    let mut sum = 0.0;
    let mut polar = 0u32;
    for token in text.unicode_words() {
        if let Some(w) = lexicon.weight(token) {
            sum += w;
            if w != 0.0 {
                polar += 1;
            }
        }
    }
    if polar == 0 {
        return 0.0;
    }
    let raw = match rule {
        CombineRule::MeanPolar => sum / polar as f64,
        CombineRule::ClampedSum => sum,
        CombineRule::SumOverSqrt => sum / (polar as f64).sqrt(),
    };
    raw.clamp(-1.0, 1.0)
}
