//! Micro precision/recall/F1 over per-instance prediction and gold sets.
//!
//! Counts are aggregated corpus-wide: TP sums the per-instance intersection
//! sizes, `predicted` and `gold` sum the set sizes. Matching is exact set
//! membership of canonicalized items. Percentages render half-up at two
//! decimals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::NormalizedPrediction;
use crate::task::{GoldTarget, TaskKind};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("prediction and gold keying differ: {0}")]
    KeyMismatch(String),
    #[error("task mismatch: scoring {expected} but found {found} for {instance_id}")]
    TaskMismatch {
        expected: TaskKind,
        found: TaskKind,
        instance_id: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Corpus-level metrics with the per-instance breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub counts: MatchCounts,
    /// Percentages rounded half-up to two decimals.
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub per_example: Vec<ExampleScore>,
}

/// Rounds a percentage half-up to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Precision/recall as percentages from raw counts, guarding empty sides.
pub fn precision_recall(counts: MatchCounts) -> (f64, f64) {
    let p = if counts.predicted == 0 {
        0.0
    } else {
        100.0 * counts.tp as f64 / counts.predicted as f64
    };
    let r = if counts.gold == 0 {
        0.0
    } else {
        100.0 * counts.tp as f64 / counts.gold as f64
    };
    (p, r)
}

/// Harmonic mean of precision and recall (inputs and output in percent),
/// 0 when both are 0.
pub fn f1_from(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores predictions against golds. Both maps must be keyed by the same
/// instance ids; a mismatch is a contract error, not a zero.
pub fn score(
    predictions: &BTreeMap<String, NormalizedPrediction>,
    golds: &BTreeMap<String, GoldTarget>,
    task: TaskKind,
) -> Result<MetricsReport, ScoreError> {
    if predictions.len() != golds.len()
        || !predictions.keys().eq(golds.keys())
    {
        let missing: Vec<&String> = golds.keys().filter(|k| !predictions.contains_key(*k)).collect();
        let extra: Vec<&String> = predictions.keys().filter(|k| !golds.contains_key(*k)).collect();
        return Err(ScoreError::KeyMismatch(format!(
            "{} gold ids without predictions (first: {:?}), {} predictions without gold (first: {:?})",
            missing.len(),
            missing.first(),
            extra.len(),
            extra.first()
        )));
    }

    let mut counts = MatchCounts::default();
    let mut per_example = Vec::with_capacity(golds.len());
    for (id, gold) in golds {
        let pred = &predictions[id];
        if pred.task != task {
            return Err(ScoreError::TaskMismatch {
                expected: task,
                found: pred.task,
                instance_id: id.clone(),
            });
        }
        if gold.task != task {
            return Err(ScoreError::TaskMismatch {
                expected: task,
                found: gold.task,
                instance_id: id.clone(),
            });
        }
        let tp = pred.items.intersection(&gold.items).count();
        counts.tp += tp;
        counts.predicted += pred.items.len();
        counts.gold += gold.items.len();
        per_example.push(ExampleScore {
            id: id.clone(),
            tp,
            predicted: pred.items.len(),
            gold: gold.items.len(),
        });
    }

    let (p, r) = precision_recall(counts);
    let f1 = f1_from(p, r);
    Ok(MetricsReport {
        task,
        counts,
        p: round2(p),
        r: round2(r),
        f1: round2(f1),
        per_example,
    })
}
