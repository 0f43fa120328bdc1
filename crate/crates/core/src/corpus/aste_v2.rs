//! Parser for the ASTE-V2 triplet text format.
//!
//! Each non-empty line has the shape `<sentence>####<triplet-list>` where the
//! sentence is pre-tokenized (single spaces) and the triplet list looks like
//! `[([1, 2], [0], 'POS'), ...]`: two contiguous ascending token-index lists
//! (aspect, opinion) and a quoted polarity code.

use super::{
    dedup_triplets, validate_example, CorpusError, DatasetName, Example, Polarity, Span, Split,
    Triplet,
};

/// Parses one split file. Line numbers in errors are 1-based positions in the
/// input; example ids use the 0-based index among non-blank lines so that the
/// k-th parsed example is `name/split/k`.
pub fn parse_aste_v2(
    content: &str,
    name: &DatasetName,
    split: Split,
) -> Result<Vec<Example>, CorpusError> {
    let mut examples = Vec::new();
    let mut index = 0usize;
    for (line_no, raw_line) in content.lines().enumerate() {
        let line = line_no + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let example = parse_line(raw_line, name, split, index, line)?;
        validate_example(&example, line)?;
        examples.push(example);
        index += 1;
    }
    Ok(examples)
}

fn parse_line(
    raw: &str,
    name: &DatasetName,
    split: Split,
    index: usize,
    line: usize,
) -> Result<Example, CorpusError> {
    let sep = raw.find("####").ok_or_else(|| CorpusError::Parse {
        line,
        column: raw.len() + 1,
        message: "missing '####' separator".into(),
    })?;
    let sentence = &raw[..sep];
    let triplet_src = &raw[sep + 4..];

    let sentence = sentence.trim_end();
    if sentence.is_empty() {
        return Err(CorpusError::Parse {
            line,
            column: 1,
            message: "empty sentence before '####'".into(),
        });
    }
    let tokens: Vec<String> = sentence.split(' ').map(str::to_string).collect();
    if tokens.iter().any(String::is_empty) {
        return Err(CorpusError::Parse {
            line,
            column: 1,
            message: "sentence contains consecutive or leading spaces".into(),
        });
    }

    let mut parser = TripletListParser {
        src: triplet_src.as_bytes(),
        pos: 0,
        line,
        // column offsets are relative to the whole line
        base: sep + 4,
    };
    let raw_triplets = parser.parse_list()?;
    let token_count = tokens.len();
    let mut triplets = Vec::with_capacity(raw_triplets.len());
    for (aspect, opinion, polarity) in raw_triplets {
        let aspect = span_from_indices(&aspect, token_count, line, "aspect")?;
        let opinion = span_from_indices(&opinion, token_count, line, "opinion")?;
        triplets.push(Triplet {
            aspect,
            opinion: Some(opinion),
            polarity,
        });
    }

    Ok(Example {
        id: format!("{}/{}/{}", name.label(), split.label(), index),
        raw_text: sentence.to_string(),
        tokens,
        triplets: dedup_triplets(triplets),
    })
}

fn span_from_indices(
    indices: &[usize],
    token_count: usize,
    line: usize,
    role: &str,
) -> Result<Span, CorpusError> {
    if indices.is_empty() {
        return Err(CorpusError::Validation {
            line,
            message: format!("{role} index list is empty"),
        });
    }
    for pair in indices.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(CorpusError::Validation {
                line,
                message: format!("{role} index list {indices:?} is not contiguous ascending"),
            });
        }
    }
    let span = Span::new(indices[0], indices[indices.len() - 1]);
    if !span.valid_for(token_count) {
        return Err(CorpusError::Validation {
            line,
            message: format!("{role} span {span} out of range for {token_count} tokens"),
        });
    }
    Ok(span)
}

/// Recursive-descent parser for `[([i, ...], [j, ...], 'POL'), ...]`.
struct TripletListParser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    base: usize,
}

type RawTriplet = (Vec<usize>, Vec<usize>, Polarity);

impl<'a> TripletListParser<'a> {
    fn error(&self, message: impl Into<String>) -> CorpusError {
        CorpusError::Parse {
            line: self.line,
            column: self.base + self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<(), CorpusError> {
        self.skip_ws();
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {:?}", byte as char)))
        }
    }

    fn parse_list(&mut self) -> Result<Vec<RawTriplet>, CorpusError> {
        self.expect(b'[')?;
        let mut entries = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
        } else {
            loop {
                entries.push(self.parse_entry()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                    }
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected ',' or ']' in triplet list")),
                }
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.error("trailing input after triplet list"));
        }
        Ok(entries)
    }

    fn parse_entry(&mut self) -> Result<RawTriplet, CorpusError> {
        self.expect(b'(')?;
        let aspect = self.parse_index_list()?;
        self.expect(b',')?;
        let opinion = self.parse_index_list()?;
        self.expect(b',')?;
        let polarity = self.parse_polarity()?;
        self.expect(b')')?;
        Ok((aspect, opinion, polarity))
    }

    fn parse_index_list(&mut self) -> Result<Vec<usize>, CorpusError> {
        self.expect(b'[')?;
        let mut indices = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.error("expected token index"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
            let value: usize = text
                .parse()
                .map_err(|_| self.error(format!("token index {text} out of range")))?;
            indices.push(value);
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                }
                Some(b']') => {
                    self.pos += 1;
                    return Ok(indices);
                }
                _ => return Err(self.error("expected ',' or ']' in index list")),
            }
        }
    }

    fn parse_polarity(&mut self) -> Result<Polarity, CorpusError> {
        self.skip_ws();
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.error("expected quoted polarity")),
        };
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|b| b != quote) {
            self.pos += 1;
        }
        if self.peek() != Some(quote) {
            return Err(self.error("unterminated polarity string"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).map_err(|_| {
            self.error("polarity string is not valid UTF-8")
        })?;
        let polarity = match text {
            "POS" => Polarity::Pos,
            "NEU" => Polarity::Neu,
            "NEG" => Polarity::Neg,
            other => return Err(self.error(format!("unknown polarity {other:?}"))),
        };
        self.pos += 1;
        Ok(polarity)
    }
}
