//! Canonical JSONL form: one example per line, fields `id`, `tokens`,
//! `triplets` (each `{aspect: [s, e], opinion: [s, e] | null, polarity}`).
//! Split membership is recovered from the id's middle segment.

use serde::{Deserialize, Serialize};

use super::{
    validate_example, CorpusError, Dataset, DatasetName, Example, Polarity, Span, Split, Triplet,
};

#[derive(Serialize, Deserialize)]
struct CanonicalExample {
    id: String,
    tokens: Vec<String>,
    triplets: Vec<CanonicalTriplet>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalTriplet {
    aspect: [usize; 2],
    opinion: Option<[usize; 2]>,
    polarity: Polarity,
}

/// Serializes all splits (train, dev, test order) to JSONL with LF endings.
pub fn to_canonical_jsonl(dataset: &Dataset) -> String {
    let mut out = String::new();
    for example in dataset.all_examples() {
        let line = CanonicalExample {
            id: example.id.clone(),
            tokens: example.tokens.clone(),
            triplets: example
                .triplets
                .iter()
                .map(|t| CanonicalTriplet {
                    aspect: [t.aspect.start, t.aspect.end],
                    opinion: t.opinion.map(|o| [o.start, o.end]),
                    polarity: t.polarity,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("canonical example serializes"));
        out.push('\n');
    }
    out
}

/// Parses canonical JSONL back into a Dataset. The dataset name is taken
/// from the first id segment and the raw text is reconstructed as the
/// single-space token join (the canonical sentence form).
pub fn from_canonical_jsonl(text: &str) -> Result<Dataset, CorpusError> {
    let mut dataset: Option<Dataset> = None;
    for (line_no, raw_line) in text.lines().enumerate() {
        let line = line_no + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let parsed: CanonicalExample =
            serde_json::from_str(raw_line).map_err(|e| CorpusError::Schema {
                line,
                message: e.to_string(),
            })?;
        let mut segments = parsed.id.split('/');
        let (name_part, split_part) = match (segments.next(), segments.next(), segments.next()) {
            (Some(n), Some(s), Some(_)) if !n.is_empty() => (n, s),
            _ => {
                return Err(CorpusError::Schema {
                    line,
                    message: format!("id {:?} is not of the form name/split/index", parsed.id),
                })
            }
        };
        let split: Split = split_part.parse().map_err(|e| CorpusError::Schema {
            line,
            message: e,
        })?;

        let dataset = dataset.get_or_insert_with(|| Dataset::new(DatasetName::parse(name_part)));
        if dataset.name.label() != name_part {
            return Err(CorpusError::Schema {
                line,
                message: format!(
                    "id {:?} does not belong to dataset {}",
                    parsed.id, dataset.name
                ),
            });
        }

        let example = Example {
            id: parsed.id,
            raw_text: parsed.tokens.join(" "),
            tokens: parsed.tokens,
            triplets: parsed
                .triplets
                .into_iter()
                .map(|t| Triplet {
                    aspect: Span::new(t.aspect[0], t.aspect[1]),
                    opinion: t.opinion.map(|o| Span::new(o[0], o[1])),
                    polarity: t.polarity,
                })
                .collect(),
        };
        validate_example(&example, line)?;
        let target = dataset.split_mut(split);
        if target.iter().any(|e| e.id == example.id) {
            return Err(CorpusError::Schema {
                line,
                message: format!("duplicate example id {:?}", example.id),
            });
        }
        target.push(example);
    }
    dataset.ok_or_else(|| CorpusError::Schema {
        line: 0,
        message: "canonical input contains no examples".into(),
    })
}
