//! Response normalization: canonicalize terms, parse raw model text into
//! structured predictions, align predictions to the source sentence, and
//! aggregate multi-query ensemble groups.
//!
//! `parse_output` is total: lines it cannot interpret are kept verbatim as
//! diagnostics instead of failing the run.

use std::collections::BTreeMap;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Example, Polarity};
use crate::task::{AnswerItem, ItemSet, TaskKind};

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("union_ensemble requires at least one group prediction")]
    EmptyEnsemble,
}

/// Canonical term form: NFC, lowercase, single internal spaces, with outer
/// quote/bracket characters and trailing sentence punctuation stripped.
/// Total and idempotent.
pub fn canonicalize(term: &str) -> String {
    let mut s: String = term.nfc().collect::<String>().to_lowercase();
    s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let trimmed = s
            .trim()
            .trim_matches(|c| "\"'()[]".contains(c))
            .trim_end_matches(|c| ".,;:!?".contains(c));
        if trimmed == s {
            break;
        }
        s = trimmed.to_string();
    }
    s
}

/// Maps a polarity word or synonym to its canonical value.
pub fn polarity_from_str(s: &str) -> Option<Polarity> {
    match canonicalize(s).as_str() {
        "positive" | "pos" | "+" => Some(Polarity::Pos),
        "negative" | "neg" | "-" => Some(Polarity::Neg),
        "neutral" | "neu" => Some(Polarity::Neu),
        _ => None,
    }
}

/// A parsed, canonicalized prediction for one task instance, with parse
/// diagnostics preserved for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedPrediction {
    pub task: TaskKind,
    pub instance_id: String,
    pub items: ItemSet,
    /// Lines that produced an item or an explicit empty marker.
    pub lines_consumed: usize,
    /// Lines that could not be interpreted, kept verbatim.
    pub lines_rejected: Vec<String>,
    /// Alignment notes from `align_to_sentence`.
    pub flags: Vec<String>,
}

impl NormalizedPrediction {
    pub fn empty(task: TaskKind, instance_id: impl Into<String>) -> Self {
        NormalizedPrediction {
            task,
            instance_id: instance_id.into(),
            items: ItemSet::new(),
            lines_consumed: 0,
            lines_rejected: Vec::new(),
            flags: Vec::new(),
        }
    }
}

/// Parses raw model output with a tolerant line grammar: tuple lines wrapped
/// in `()`/`[]`/`{}` or bare, split on the first of `,`/`;`/`|` that yields
/// the task arity; `polarity:`-prefixed or bare polarity words for ALSC;
/// `none`/`no pairs` (or empty output) for the empty set.
pub fn parse_output(raw: &str, task: TaskKind, instance_id: &str) -> NormalizedPrediction {
    let mut pred = NormalizedPrediction::empty(task, instance_id);
    for raw_line in raw.lines() {
        let mut line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        // Tolerate an echoed answer label.
        if let Some(rest) = strip_prefix_ci(line, "answer:") {
            line = rest.trim();
            if line.is_empty() {
                continue;
            }
        }
        let lowered = canonicalize(line);
        if lowered == "none" || lowered == "no pairs" {
            pred.lines_consumed += 1;
            continue;
        }
        match parse_line(line, task) {
            Some(item) => {
                pred.lines_consumed += 1;
                pred.items.insert(item);
            }
            None => pred.lines_rejected.push(raw_line.to_string()),
        }
    }
    pred
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

fn parse_line(line: &str, task: TaskKind) -> Option<AnswerItem> {
    match task {
        TaskKind::Alsc => {
            let value = strip_prefix_ci(line, "polarity:").unwrap_or(line);
            polarity_from_str(value).map(AnswerItem::Polarity)
        }
        TaskKind::Aope | TaskKind::Aste => {
            let inner = strip_wrapper(line.trim());
            let arity = task.arity();
            for delim in [',', ';', '|'] {
                let parts: Vec<&str> = inner.split(delim).collect();
                if parts.len() != arity {
                    continue;
                }
                let terms: Vec<String> = parts.iter().map(|p| canonicalize(p)).collect();
                if task == TaskKind::Aste {
                    let Some(polarity) = polarity_from_str(parts[2]) else {
                        continue;
                    };
                    if terms[0].is_empty() || terms[1].is_empty() {
                        return None;
                    }
                    return Some(AnswerItem::Triple {
                        aspect: terms[0].clone(),
                        opinion: terms[1].clone(),
                        polarity,
                    });
                }
                if terms[0].is_empty() || terms[1].is_empty() {
                    return None;
                }
                return Some(AnswerItem::Pair {
                    aspect: terms[0].clone(),
                    opinion: terms[1].clone(),
                });
            }
            None
        }
    }
}

/// Strips one layer of matching wrapper brackets.
fn strip_wrapper(s: &str) -> &str {
    let bytes = s.as_bytes();
    if bytes.len() >= 2 {
        let pair = (bytes[0], bytes[bytes.len() - 1]);
        if matches!(pair, (b'(', b')') | (b'[', b']') | (b'{', b'}')) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    /// Keep non-occurring terms but flag them (default).
    #[default]
    String,
    /// Drop items whose aspect or opinion is not a token subsequence of the
    /// sentence.
    StrictSpan,
}

impl std::str::FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "string" => Ok(AlignMode::String),
            "strict-span" => Ok(AlignMode::StrictSpan),
            other => Err(format!("unknown alignment mode {other:?}")),
        }
    }
}

/// Checks each predicted term against the sentence (case-insensitive
/// contiguous token subsequence over canonicalized tokens). In `String` mode
/// non-occurring terms are flagged and kept; in `StrictSpan` mode they are
/// dropped.
pub fn align_to_sentence(
    mut prediction: NormalizedPrediction,
    example: &Example,
    mode: AlignMode,
) -> NormalizedPrediction {
    let hay: Vec<String> = example.tokens.iter().map(|t| canonicalize(t)).collect();
    let occurs = |term: &str| -> bool {
        let needle: Vec<String> = term.split(' ').map(str::to_string).collect();
        if needle.is_empty() || needle.len() > hay.len() {
            return false;
        }
        hay.windows(needle.len()).any(|w| w == needle.as_slice())
    };

    let mut kept = ItemSet::new();
    let mut flags = Vec::new();
    for item in &prediction.items {
        let missing: Vec<(&str, &str)> = match item {
            AnswerItem::Polarity(_) => Vec::new(),
            AnswerItem::Pair { aspect, opinion }
            | AnswerItem::Triple {
                aspect, opinion, ..
            } => [("aspect", aspect.as_str()), ("opinion", opinion.as_str())]
                .into_iter()
                .filter(|(_, term)| !occurs(term))
                .collect(),
        };
        if missing.is_empty() {
            kept.insert(item.clone());
        } else {
            for (role, term) in &missing {
                flags.push(format!(
                    "{} {role} {term:?} not found in sentence ({})",
                    match mode {
                        AlignMode::String => "kept",
                        AlignMode::StrictSpan => "dropped",
                    },
                    prediction.instance_id
                ));
            }
            if mode == AlignMode::String {
                kept.insert(item.clone());
            }
        }
    }
    prediction.items = kept;
    prediction.flags.extend(flags);
    prediction
}

/// Aggregates per-group predictions into the final one: set union for the
/// extraction tasks, plurality vote (ties resolved by the lowest group
/// index, i.e. the highest-similarity group) for ALSC.
pub fn union_ensemble(
    groups: &[NormalizedPrediction],
    task: TaskKind,
) -> Result<NormalizedPrediction, NormalizeError> {
    let first = groups.first().ok_or(NormalizeError::EmptyEnsemble)?;
    let mut merged = NormalizedPrediction::empty(task, first.instance_id.clone());
    for g in groups {
        merged.lines_consumed += g.lines_consumed;
        merged.lines_rejected.extend(g.lines_rejected.iter().cloned());
        merged.flags.extend(g.flags.iter().cloned());
    }
    match task {
        TaskKind::Aope | TaskKind::Aste => {
            for g in groups {
                merged.items.extend(g.items.iter().cloned());
            }
        }
        TaskKind::Alsc => {
            let mut votes: BTreeMap<Polarity, usize> = BTreeMap::new();
            for g in groups {
                for item in &g.items {
                    if let AnswerItem::Polarity(p) = item {
                        *votes.entry(*p).or_insert(0) += 1;
                    }
                }
            }
            if let Some(&best) = votes.values().max() {
                let tied: Vec<Polarity> = votes
                    .iter()
                    .filter(|(_, &count)| count == best)
                    .map(|(p, _)| *p)
                    .collect();
                let winner = if tied.len() == 1 {
                    tied[0]
                } else {
                    // First group (in index order) holding any tied polarity
                    // decides.
                    groups
                        .iter()
                        .find_map(|g| {
                            g.items.iter().find_map(|item| match item {
                                AnswerItem::Polarity(p) if tied.contains(p) => Some(*p),
                                _ => None,
                            })
                        })
                        .expect("a tied polarity exists in some group")
                };
                merged.items.insert(AnswerItem::Polarity(winner));
            }
        }
    }
    Ok(merged)
}
