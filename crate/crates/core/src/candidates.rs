//! Candidate answers: rough per-example predictions produced by an external
//! backbone model and ingested from JSONL files.
//!
//! File layout: the first line is a header `{"backbone", "dataset", "task"}`,
//! every following line one record `{"id", "task", "items", "scores"?}`.
//! Item shapes follow the task: a polarity string for ALSC, `[aspect,
//! opinion]` for AOPE, `[aspect, opinion, polarity]` for ASTE. Terms are
//! canonicalized and deduplicated on load.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Dataset;
use crate::normalize::{canonicalize, polarity_from_str};
use crate::task::{AnswerItem, TaskKind};

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("candidate line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("candidate file is for task {found}, run expects {expected}")]
    TaskMismatch { expected: TaskKind, found: TaskKind },
    #[error("candidate file is for dataset {found:?}, run expects {expected:?}")]
    DatasetMismatch { expected: String, found: String },
    #[error("candidate ids not present in dataset: {}", offenders.join(", "))]
    UnknownIds { offenders: Vec<String> },
    #[error("duplicate candidate record for {0}")]
    DuplicateRecord(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One candidate item with its optional backbone confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub item: AnswerItem,
    pub score: Option<f64>,
}

/// All candidate items for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub example_id: String,
    pub task: TaskKind,
    pub items: Vec<ScoredItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateHeader {
    pub backbone: String,
    pub dataset: String,
    pub task: TaskKind,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    task: TaskKind,
    items: Vec<Value>,
    #[serde(default)]
    scores: Option<Vec<f64>>,
}

/// Read-only lookup of candidate sets by example id.
#[derive(Debug, Default)]
pub struct CandidateStore {
    headers: Vec<CandidateHeader>,
    by_id: HashMap<String, CandidateSet>,
}

/// Selection knobs for `select_meaningful`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    /// Items with a confidence below this are dropped; unscored items are
    /// always kept. 0.0 keeps everything non-negative.
    pub min_confidence: f64,
    pub max_items: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            min_confidence: 0.0,
            max_items: 5,
        }
    }
}

impl CandidateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses one candidate file and merges it into the store, validating the
    /// header and every record id against `dataset`.
    pub fn load(
        &mut self,
        content: &str,
        dataset: &Dataset,
        task: TaskKind,
    ) -> Result<(), CandidateError> {
        let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines.next().ok_or(CandidateError::Schema {
            line: 1,
            message: "empty candidate file (missing header line)".into(),
        })?;
        let header: CandidateHeader =
            serde_json::from_str(header_line).map_err(|e| CandidateError::Schema {
                line: 1,
                message: format!("bad header: {e}"),
            })?;
        if header.task != task {
            return Err(CandidateError::TaskMismatch {
                expected: task,
                found: header.task,
            });
        }
        if header.dataset != dataset.name.label() {
            return Err(CandidateError::DatasetMismatch {
                expected: dataset.name.label().to_string(),
                found: header.dataset,
            });
        }

        let known_ids: std::collections::HashSet<&str> =
            dataset.all_examples().map(|e| e.id.as_str()).collect();
        let mut unknown = Vec::new();
        for (line_no, raw) in lines {
            let line = line_no + 1;
            let record: RawRecord =
                serde_json::from_str(raw).map_err(|e| CandidateError::Schema {
                    line,
                    message: e.to_string(),
                })?;
            if record.task != task {
                return Err(CandidateError::TaskMismatch {
                    expected: task,
                    found: record.task,
                });
            }
            if let Some(scores) = &record.scores {
                if scores.len() != record.items.len() {
                    return Err(CandidateError::Schema {
                        line,
                        message: format!(
                            "{} scores for {} items",
                            scores.len(),
                            record.items.len()
                        ),
                    });
                }
            }
            if !known_ids.contains(record.id.as_str()) {
                unknown.push(record.id.clone());
                continue;
            }

            let mut items = Vec::with_capacity(record.items.len());
            for (i, value) in record.items.iter().enumerate() {
                let item = parse_item(value, task).map_err(|message| CandidateError::Schema {
                    line,
                    message: format!("item {i}: {message}"),
                })?;
                let score = record.scores.as_ref().map(|s| s[i]);
                // dedupe after canonicalization, first occurrence wins
                if !items.iter().any(|existing: &ScoredItem| existing.item == item) {
                    items.push(ScoredItem { item, score });
                }
            }

            let set = CandidateSet {
                example_id: record.id.clone(),
                task,
                items,
            };
            if self.by_id.insert(record.id.clone(), set).is_some() {
                return Err(CandidateError::DuplicateRecord(record.id));
            }
        }
        if !unknown.is_empty() {
            return Err(CandidateError::UnknownIds { offenders: unknown });
        }
        self.headers.push(header);
        Ok(())
    }

    pub fn from_str(
        content: &str,
        dataset: &Dataset,
        task: TaskKind,
    ) -> Result<Self, CandidateError> {
        let mut store = Self::new();
        store.load(content, dataset, task)?;
        Ok(store)
    }

    pub fn get(&self, example_id: &str) -> Option<&CandidateSet> {
        self.by_id.get(example_id)
    }

    pub fn headers(&self) -> &[CandidateHeader] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Fraction of train/test examples of `dataset` that have a candidate
    /// record.
    pub fn coverage(&self, dataset: &Dataset) -> CoverageReport {
        let frac = |examples: &[crate::corpus::Example]| {
            if examples.is_empty() {
                0.0
            } else {
                let covered = examples
                    .iter()
                    .filter(|e| self.by_id.contains_key(&e.id))
                    .count();
                covered as f64 / examples.len() as f64
            }
        };
        CoverageReport {
            train: frac(&dataset.train),
            test: frac(&dataset.test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub train: f64,
    pub test: f64,
}

fn parse_item(value: &Value, task: TaskKind) -> Result<AnswerItem, String> {
    let as_term = |v: &Value, slot: &str| -> Result<String, String> {
        let s = v
            .as_str()
            .ok_or_else(|| format!("{slot} is not a string"))?;
        let c = canonicalize(s);
        if c.is_empty() {
            return Err(format!("{slot} is empty after canonicalization"));
        }
        Ok(c)
    };
    match task {
        TaskKind::Alsc => {
            let s = value.as_str().ok_or("ALSC item must be a polarity string")?;
            polarity_from_str(s)
                .map(AnswerItem::Polarity)
                .ok_or_else(|| format!("unknown polarity {s:?}"))
        }
        TaskKind::Aope => {
            let arr = value.as_array().ok_or("AOPE item must be [aspect, opinion]")?;
            if arr.len() != 2 {
                return Err(format!("AOPE item has {} fields, expected 2", arr.len()));
            }
            Ok(AnswerItem::Pair {
                aspect: as_term(&arr[0], "aspect")?,
                opinion: as_term(&arr[1], "opinion")?,
            })
        }
        TaskKind::Aste => {
            let arr = value
                .as_array()
                .ok_or("ASTE item must be [aspect, opinion, polarity]")?;
            if arr.len() != 3 {
                return Err(format!("ASTE item has {} fields, expected 3", arr.len()));
            }
            let pol_str = arr[2].as_str().ok_or("polarity is not a string")?;
            let polarity =
                polarity_from_str(pol_str).ok_or_else(|| format!("unknown polarity {pol_str:?}"))?;
            Ok(AnswerItem::Triple {
                aspect: as_term(&arr[0], "aspect")?,
                opinion: as_term(&arr[1], "opinion")?,
                polarity,
            })
        }
    }
}

/// Applies the confidence threshold, sorts scored items by descending
/// confidence (stable; unscored items keep file order after the scored
/// ones), and truncates to `max_items`.
pub fn select_meaningful(candidates: &CandidateSet, config: SelectConfig) -> CandidateSet {
    let mut kept: Vec<ScoredItem> = candidates
        .items
        .iter()
        .filter(|s| s.score.is_none_or(|v| v >= config.min_confidence))
        .cloned()
        .collect();
    let all_unscored = kept.iter().all(|s| s.score.is_none());
    if !all_unscored {
        kept.sort_by(|a, b| {
            let ka = a.score.unwrap_or(f64::NEG_INFINITY);
            let kb = b.score.unwrap_or(f64::NEG_INFINITY);
            kb.partial_cmp(&ka).unwrap_or(std::cmp::Ordering::Equal)
        });
    }
    kept.truncate(config.max_items);
    CandidateSet {
        example_id: candidates.example_id.clone(),
        task: candidates.task,
        items: kept,
    }
}
