//! Dataset loading and canonical storage.
//!
//! Two source formats are supported: the triplet text format used by the
//! SemEval ASTE-V2 releases (`<sentence>####<triplet list>`) and the MAMS
//! ATSA XML format. Both parse into the same in-memory [`Dataset`] shape and
//! round-trip through a canonical JSONL form.

mod aste_v2;
mod canonical;
mod mams;

pub use aste_v2::parse_aste_v2;
pub use canonical::{from_canonical_jsonl, to_canonical_jsonl};
pub use mams::parse_mams_atsa;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("canonical line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("xml: {0}")]
    Xml(String),
    #[error("sentence {sentence:?}: aspect term {term:?} does not align to token boundaries")]
    Alignment { sentence: String, term: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Inclusive token-index span `(start, end)` with `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn valid_for(&self, token_count: usize) -> bool {
        self.start <= self.end && self.end < token_count
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "POS")]
    Pos,
    #[serde(rename = "NEU")]
    Neu,
    #[serde(rename = "NEG")]
    Neg,
}

impl Polarity {
    /// Lowercase word used in prompt text and reports.
    pub fn word(&self) -> &'static str {
        match self {
            Polarity::Pos => "positive",
            Polarity::Neu => "neutral",
            Polarity::Neg => "negative",
        }
    }

    /// Canonical three-letter code used in files.
    pub fn code(&self) -> &'static str {
        match self {
            Polarity::Pos => "POS",
            Polarity::Neu => "NEU",
            Polarity::Neg => "NEG",
        }
    }
}

/// One gold annotation: aspect span, opinion span (absent for MAMS-derived
/// data, which annotates aspects only), and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub aspect: Span,
    pub opinion: Option<Span>,
    pub polarity: Polarity,
}

/// A single annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    /// Stable id of the form `datasetName/split/lineNumber`.
    pub id: String,
    pub tokens: Vec<String>,
    pub raw_text: String,
    pub triplets: Vec<Triplet>,
}

impl Example {
    /// Surface string of a span: tokens joined with single spaces.
    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    /// Distinct aspect spans in ascending `(start, end)` order.
    pub fn distinct_aspect_spans(&self) -> Vec<Span> {
        let set: BTreeSet<Span> = self.triplets.iter().map(|t| t.aspect).collect();
        set.into_iter().collect()
    }

    pub fn has_opinion_spans(&self) -> bool {
        self.triplets.iter().all(|t| t.opinion.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn label(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Known benchmark dataset names, plus `Custom` for locally bundled data
/// such as the test fixture.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Lap14,
    Res14,
    Res15,
    Res16,
    Mams,
    Custom(String),
}

impl DatasetName {
    pub fn parse(s: &str) -> DatasetName {
        match s.to_ascii_uppercase().as_str() {
            "LAP14" => DatasetName::Lap14,
            "RES14" => DatasetName::Res14,
            "RES15" => DatasetName::Res15,
            "RES16" => DatasetName::Res16,
            "MAMS" => DatasetName::Mams,
            _ => DatasetName::Custom(s.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            DatasetName::Lap14 => "LAP14",
            DatasetName::Res14 => "RES14",
            DatasetName::Res15 => "RES15",
            DatasetName::Res16 => "RES16",
            DatasetName::Mams => "MAMS",
            DatasetName::Custom(s) => s,
        }
    }

    /// Review domain of the dataset. Restaurant for the RES* sets and MAMS,
    /// laptop otherwise.
    pub fn domain(&self) -> Domain {
        let l = self.label().to_ascii_lowercase();
        if l.contains("res") || l.contains("mams") {
            Domain::Restaurant
        } else {
            Domain::Laptop
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Laptop,
    Restaurant,
}

/// An immutable loaded dataset with train/dev/test splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: DatasetName,
    pub domain: Domain,
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn new(name: DatasetName) -> Self {
        let domain = name.domain();
        Dataset {
            name,
            domain,
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
        }
    }

    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<Example> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    pub fn all_examples(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(self.dev.iter()).chain(self.test.iter())
    }

    pub fn find(&self, id: &str) -> Option<&Example> {
        self.all_examples().find(|e| e.id == id)
    }

    /// True when every triplet in every split carries an opinion span.
    /// MAMS-derived datasets return false unless they are annotation-free.
    pub fn has_opinion_spans(&self) -> bool {
        self.all_examples().all(Example::has_opinion_spans)
    }

    /// Per-split sentence and aspect counts. The aspect count sums the
    /// number of distinct aspect spans over the examples of the split.
    pub fn stats(&self) -> DatasetStats {
        let count = |examples: &[Example]| SplitStats {
            sentences: examples.len(),
            aspects: examples.iter().map(|e| e.distinct_aspect_spans().len()).sum(),
        };
        DatasetStats {
            dataset: self.name.label().to_string(),
            train: count(&self.train),
            dev: count(&self.dev),
            test: count(&self.test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub sentences: usize,
    pub aspects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub train: SplitStats,
    pub dev: SplitStats,
    pub test: SplitStats,
}

impl DatasetStats {
    pub fn for_split(&self, split: Split) -> SplitStats {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }
}

/// Validates example-level invariants shared by all parsers: non-empty
/// tokens, spans in range, and unique (aspect, opinion) pairs.
pub(crate) fn validate_example(example: &Example, line: usize) -> Result<(), CorpusError> {
    if example.tokens.is_empty() {
        return Err(CorpusError::Validation {
            line,
            message: format!("example {} has no tokens", example.id),
        });
    }
    let n = example.tokens.len();
    let mut seen_pairs = BTreeSet::new();
    for t in &example.triplets {
        if !t.aspect.valid_for(n) {
            return Err(CorpusError::Validation {
                line,
                message: format!(
                    "aspect span {} out of range for {} tokens in {}",
                    t.aspect, n, example.id
                ),
            });
        }
        if let Some(op) = t.opinion {
            if !op.valid_for(n) {
                return Err(CorpusError::Validation {
                    line,
                    message: format!(
                        "opinion span {} out of range for {} tokens in {}",
                        op, n, example.id
                    ),
                });
            }
        }
        if !seen_pairs.insert((t.aspect, t.opinion)) {
            return Err(CorpusError::Validation {
                line,
                message: format!(
                    "duplicate (aspect, opinion) pair {} with conflicting polarity in {}",
                    t.aspect, example.id
                ),
            });
        }
    }
    Ok(())
}

/// Removes exact duplicate triplets, keeping first occurrences in order.
pub(crate) fn dedup_triplets(triplets: Vec<Triplet>) -> Vec<Triplet> {
    let mut seen = BTreeSet::new();
    triplets.into_iter().filter(|t| seen.insert(*t)).collect()
}
