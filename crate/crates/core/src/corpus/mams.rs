//! Parser for the MAMS ATSA XML format.
//!
//! Sentences carry a `<text>` child and zero or more `<aspectTerm>` children
//! with `term`, `polarity`, and character offsets `from`/`to`. Character
//! offsets are resolved to whitespace-token spans; offsets that do not land
//! on token boundaries are alignment errors. MAMS annotates no opinion terms,
//! so parsed triplets carry `opinion: None`.

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{
    dedup_triplets, validate_example, CorpusError, Example, Polarity, Span, Split, Triplet,
};

pub fn parse_mams_atsa(content: &str, split: Split) -> Result<Vec<Example>, CorpusError> {
    let mut reader = Reader::from_str(content);
    reader.config_mut().trim_text(true);

    let mut examples = Vec::new();
    let mut index = 0usize;
    let mut current: Option<PendingSentence> = None;
    let mut in_text = false;

    loop {
        match reader.read_event().map_err(|e| CorpusError::Xml(e.to_string()))? {
            Event::Start(e) => match e.name().as_ref() {
                b"sentence" => current = Some(PendingSentence::default()),
                b"text" => in_text = current.is_some(),
                b"aspectTerm" => {
                    if let Some(p) = current.as_mut() {
                        p.terms.push(read_aspect_term(&e)?);
                    }
                }
                _ => {}
            },
            Event::Empty(e) => {
                if e.name().as_ref() == b"aspectTerm" {
                    if let Some(p) = current.as_mut() {
                        p.terms.push(read_aspect_term(&e)?);
                    }
                }
            }
            Event::Text(t) => {
                if in_text {
                    if let Some(p) = current.as_mut() {
                        p.text.push_str(
                            &t.unescape().map_err(|e| CorpusError::Xml(e.to_string()))?,
                        );
                    }
                }
            }
            Event::End(e) => match e.name().as_ref() {
                b"text" => in_text = false,
                b"sentence" => {
                    if let Some(p) = current.take() {
                        examples.push(p.into_example(split, index)?);
                        index += 1;
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(examples)
}

#[derive(Default)]
struct PendingSentence {
    text: String,
    terms: Vec<RawTerm>,
}

struct RawTerm {
    term: String,
    polarity: String,
    from: usize,
    to: usize,
}

fn read_aspect_term(e: &quick_xml::events::BytesStart<'_>) -> Result<RawTerm, CorpusError> {
    let mut term = None;
    let mut polarity = None;
    let mut from = None;
    let mut to = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|e| CorpusError::Xml(e.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|e| CorpusError::Xml(e.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"term" => term = Some(value),
            b"polarity" => polarity = Some(value),
            b"from" => from = Some(parse_offset(&value)?),
            b"to" => to = Some(parse_offset(&value)?),
            _ => {}
        }
    }
    match (term, polarity, from, to) {
        (Some(term), Some(polarity), Some(from), Some(to)) => Ok(RawTerm {
            term,
            polarity,
            from,
            to,
        }),
        _ => Err(CorpusError::Xml(
            "aspectTerm missing term/polarity/from/to attribute".into(),
        )),
    }
}

fn parse_offset(s: &str) -> Result<usize, CorpusError> {
    s.parse()
        .map_err(|_| CorpusError::Xml(format!("bad character offset {s:?}")))
}

impl PendingSentence {
    fn into_example(self, split: Split, index: usize) -> Result<Example, CorpusError> {
        let text = self.text;
        // Token char ranges: [start, end) over character (not byte) offsets,
        // matching the offsets used by the XML annotations.
        let mut tokens = Vec::new();
        let mut ranges = Vec::new();
        let mut token_start = None;
        let mut chars = 0usize;
        for (ci, ch) in text.chars().enumerate() {
            chars = ci + 1;
            if ch.is_whitespace() {
                if let Some(s) = token_start.take() {
                    ranges.push((s, ci));
                }
            } else if token_start.is_none() {
                token_start = Some(ci);
            }
        }
        if let Some(s) = token_start {
            ranges.push((s, chars));
        }
        for &(s, e) in &ranges {
            tokens.push(text.chars().skip(s).take(e - s).collect::<String>());
        }

        let mut triplets = Vec::new();
        for raw in &self.terms {
            let polarity = match raw.polarity.to_ascii_lowercase().as_str() {
                "positive" => Polarity::Pos,
                "neutral" => Polarity::Neu,
                "negative" => Polarity::Neg,
                other => {
                    return Err(CorpusError::Validation {
                        line: index + 1,
                        message: format!("unknown polarity {other:?} for term {:?}", raw.term),
                    })
                }
            };
            let start = ranges.iter().position(|&(s, _)| s == raw.from);
            let end = ranges.iter().position(|&(_, e)| e == raw.to);
            let (start, end) = match (start, end) {
                (Some(s), Some(e)) if s <= e => (s, e),
                _ => {
                    return Err(CorpusError::Alignment {
                        sentence: text.clone(),
                        term: raw.term.clone(),
                    })
                }
            };
            triplets.push(Triplet {
                aspect: Span::new(start, end),
                opinion: None,
                polarity,
            });
        }

        let example = Example {
            id: format!("MAMS/{}/{}", split.label(), index),
            tokens,
            raw_text: text,
            triplets: dedup_triplets(triplets),
        };
        validate_example(&example, index + 1)?;
        Ok(example)
    }
}
