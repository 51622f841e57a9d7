//! Parser and canonical writer for perception-loop responses.
//!
//! A response has the shape
//!
//! ```text
//! <think> ... <start="1.0",end="3.5",desc="a man runs"> ... </think><answer> ... </answer>
//! ```
//!
//! Block delimiters are matched literally. Evidence tags are lexed
//! leniently (bare or quoted timestamps, integer or decimal, whitespace
//! around `=` and `,`) but the attribute order `start`, `end`, `desc` is
//! fixed and `desc` must be a double-quoted string without embedded quotes.
//! Only tags inside the think block become [`Evidence`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

/// One timestamped perception result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub start_s: f64,
    pub end_s: f64,
    pub desc: String,
}

impl Evidence {
    pub fn new(start_s: f64, end_s: f64, desc: impl Into<String>) -> Result<Self, TagError> {
        let desc = desc.into();
        if !start_s.is_finite() || !end_s.is_finite() || start_s < 0.0 || end_s < 0.0 {
            return Err(TagError::UnparseableTimestamp);
        }
        if start_s > end_s {
            return Err(TagError::StartAfterEnd);
        }
        if crate::text::tokenize(&desc).is_empty() {
            return Err(TagError::EmptyDescription);
        }
        Ok(Self {
            start_s,
            end_s,
            desc,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }
}

/// Renders an evidence tag in canonical form: quoted timestamps with one
/// decimal place and double quotes removed from the description.
pub fn canonicalize_evidence(e: &Evidence) -> String {
    let desc: String = e.desc.chars().filter(|&c| c != '"').collect();
    format!(
        "<start=\"{:.1}\",end=\"{:.1}\",desc=\"{}\">",
        e.start_s, e.end_s, desc
    )
}

/// A fully parsed response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlrResponse {
    pub think_text: String,
    pub answer_text: String,
    pub evidence: Vec<Evidence>,
}

impl PlrResponse {
    /// Writes the response back out as `<think>..</think><answer>..</answer>`.
    pub fn to_text(&self) -> String {
        format!(
            "{THINK_OPEN}{}{THINK_CLOSE}{ANSWER_OPEN}{}{ANSWER_CLOSE}",
            self.think_text, self.answer_text
        )
    }
}

/// Why an evidence tag was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("unparseable timestamp")]
    UnparseableTimestamp,
    #[error("missing attribute `{0}`")]
    MissingAttribute(&'static str),
    #[error("attribute `{found}` where `{expected}` was expected")]
    AttributeOrder {
        expected: &'static str,
        found: &'static str,
    },
    #[error("start is after end")]
    StartAfterEnd,
    #[error("empty description")]
    EmptyDescription,
    #[error("double quote inside description")]
    QuoteInDescription,
    #[error("unexpected character")]
    UnexpectedCharacter,
    #[error("tag is not terminated")]
    Unterminated,
}

/// First grammar rule a response violates, with the byte offset where
/// the violation was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing or unclosed think block (offset {offset})")]
    MissingThinkBlock { offset: usize },
    #[error("missing or unclosed answer block (offset {offset})")]
    MissingAnswerBlock { offset: usize },
    #[error("`{delimiter}` appears more than once (offset {offset})")]
    DuplicateBlock {
        delimiter: &'static str,
        offset: usize,
    },
    #[error("block delimiters out of order (offset {offset})")]
    BlockOrderViolation { offset: usize },
    #[error("content before the think block (offset {offset})")]
    LeadingContent { offset: usize },
    #[error("content between the think and answer blocks (offset {offset})")]
    InterBlockContent { offset: usize },
    #[error("content after the answer block (offset {offset})")]
    TrailingContent { offset: usize },
    #[error("malformed evidence tag at offset {offset}: {reason}")]
    MalformedEvidenceTag { offset: usize, reason: TagError },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match *self {
            ParseError::MissingThinkBlock { offset }
            | ParseError::MissingAnswerBlock { offset }
            | ParseError::DuplicateBlock { offset, .. }
            | ParseError::BlockOrderViolation { offset }
            | ParseError::LeadingContent { offset }
            | ParseError::InterBlockContent { offset }
            | ParseError::TrailingContent { offset }
            | ParseError::MalformedEvidenceTag { offset, .. } => offset,
        }
    }
}

/// Byte spans of the two block bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub think: (usize, usize),
    pub answer: (usize, usize),
}

fn positions(text: &str, pat: &str) -> Vec<usize> {
    text.match_indices(pat).map(|(i, _)| i).collect()
}

fn first_non_ws(text: &str, from: usize, to: usize) -> Option<usize> {
    text[from..to]
        .char_indices()
        .find(|(_, c)| !c.is_whitespace())
        .map(|(i, _)| from + i)
}

/// Checks the block-level grammar only; evidence tags are not inspected.
pub fn parse_blocks(text: &str) -> Result<Blocks, ParseError> {
    let think_open = positions(text, THINK_OPEN);
    let think_close = positions(text, THINK_CLOSE);
    let answer_open = positions(text, ANSWER_OPEN);
    let answer_close = positions(text, ANSWER_CLOSE);

    if think_open.is_empty() || think_close.is_empty() {
        let offset = think_open.first().copied().unwrap_or(0);
        return Err(ParseError::MissingThinkBlock { offset });
    }
    if answer_open.is_empty() || answer_close.is_empty() {
        let offset = answer_open.first().copied().unwrap_or(text.len());
        return Err(ParseError::MissingAnswerBlock { offset });
    }
    for (delimiter, found) in [
        (THINK_OPEN, &think_open),
        (THINK_CLOSE, &think_close),
        (ANSWER_OPEN, &answer_open),
        (ANSWER_CLOSE, &answer_close),
    ] {
        if found.len() > 1 {
            return Err(ParseError::DuplicateBlock {
                delimiter,
                offset: found[1],
            });
        }
    }

    let (to, tc, ao, ac) = (
        think_open[0],
        think_close[0],
        answer_open[0],
        answer_close[0],
    );
    if tc < to + THINK_OPEN.len() {
        return Err(ParseError::BlockOrderViolation { offset: tc });
    }
    if ao < tc + THINK_CLOSE.len() {
        return Err(ParseError::BlockOrderViolation { offset: ao });
    }
    if ac < ao + ANSWER_OPEN.len() {
        return Err(ParseError::BlockOrderViolation { offset: ac });
    }

    if let Some(offset) = first_non_ws(text, 0, to) {
        return Err(ParseError::LeadingContent { offset });
    }
    if let Some(offset) = first_non_ws(text, tc + THINK_CLOSE.len(), ao) {
        return Err(ParseError::InterBlockContent { offset });
    }
    let tail = ac + ANSWER_CLOSE.len();
    if let Some(offset) = first_non_ws(text, tail, text.len()) {
        return Err(ParseError::TrailingContent { offset });
    }

    Ok(Blocks {
        think: (to + THINK_OPEN.len(), tc),
        answer: (ao + ANSWER_OPEN.len(), ac),
    })
}

/// Parses a complete response, including every evidence tag in the think
/// block.
pub fn parse_response(text: &str) -> Result<PlrResponse, ParseError> {
    let blocks = parse_blocks(text)?;
    let (ts, te) = blocks.think;
    let mut evidence = Vec::new();
    for found in scan_tags(text, ts, te) {
        match found.result {
            Ok(e) => evidence.push(e),
            Err(reason) => {
                return Err(ParseError::MalformedEvidenceTag {
                    offset: found.offset,
                    reason,
                })
            }
        }
    }
    Ok(PlrResponse {
        think_text: text[ts..te].to_owned(),
        answer_text: text[blocks.answer.0..blocks.answer.1].to_owned(),
        evidence,
    })
}

/// 1 when the block structure is well formed, 0 otherwise.
pub fn think_format_reward(text: &str) -> u8 {
    u8::from(parse_blocks(text).is_ok())
}

/// 1 when every evidence tag in the document is well formed and the think
/// region holds at least one of them (or `allow_empty` is set).
pub fn evidence_format_reward(text: &str, allow_empty: bool) -> u8 {
    let mut all_valid = true;
    let (ts, te) = think_region(text);
    let mut in_think = 0usize;
    for found in scan_tags(text, 0, text.len()) {
        if found.result.is_err() {
            all_valid = false;
            break;
        }
        if found.offset >= ts && found.offset < te {
            in_think += 1;
        }
    }
    u8::from(all_valid && (in_think > 0 || allow_empty))
}

/// Byte span of the think region, located leniently so that tags can be
/// scored even when the block structure is broken: from the first
/// `<think>` (or the document start) up to the next `</think>`, else the
/// next `<answer>`, else the end of the document.
pub fn think_region(text: &str) -> (usize, usize) {
    let start = text
        .find(THINK_OPEN)
        .map(|i| i + THINK_OPEN.len())
        .unwrap_or(0);
    let rest = &text[start..];
    let end = rest
        .find(THINK_CLOSE)
        .or_else(|| rest.find(ANSWER_OPEN))
        .map(|i| start + i)
        .unwrap_or(text.len());
    (start, end)
}

/// Body of the first `<answer>...</answer>` pair, if any.
pub fn answer_region(text: &str) -> Option<&str> {
    let open = text.find(ANSWER_OPEN)? + ANSWER_OPEN.len();
    let close = text[open..].find(ANSWER_CLOSE)?;
    Some(&text[open..open + close])
}

/// An evidence tag candidate found while scanning.
#[derive(Debug, Clone, PartialEq)]
pub struct FoundTag {
    pub offset: usize,
    pub result: Result<Evidence, TagError>,
}

/// Well-formed evidence from the think region, skipping malformed tags.
pub fn lenient_evidence(text: &str) -> Vec<Evidence> {
    let (ts, te) = think_region(text);
    scan_tags(text, ts, te)
        .into_iter()
        .filter_map(|t| t.result.ok())
        .collect()
}

/// Finds every evidence tag candidate in `text[from..to]`.
///
/// A candidate is a `<` followed (after optional whitespace) by one of the
/// attribute names and `=`. Other angle brackets are prose.
pub fn scan_tags(text: &str, from: usize, to: usize) -> Vec<FoundTag> {
    let region = &text.as_bytes()[..to];
    let mut out = Vec::new();
    let mut i = from;
    while i < to {
        if region[i] == b'<' && is_tag_candidate(region, i) {
            let mut cur = Cursor {
                bytes: region,
                pos: i + 1,
            };
            let result = parse_tag_body(&mut cur, text);
            out.push(FoundTag { offset: i, result });
            i = if out.last().is_some_and(|t| t.result.is_ok()) {
                cur.pos
            } else {
                i + 1
            };
        } else {
            i += 1;
        }
    }
    out
}

const ATTRS: [&str; 3] = ["start", "end", "desc"];

fn is_tag_candidate(bytes: &[u8], lt: usize) -> bool {
    let mut cur = Cursor { bytes, pos: lt + 1 };
    cur.skip_ws();
    let ident = cur.ident();
    if !ATTRS.contains(&ident) {
        return false;
    }
    cur.skip_ws();
    cur.peek() == Some(b'=')
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        // ASCII-only span, always valid UTF-8.
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - start
    }
}

fn attribute(cur: &mut Cursor<'_>, expected: &'static str) -> Result<(), TagError> {
    cur.skip_ws();
    let ident = cur.ident();
    if ident.is_empty() {
        return Err(match cur.peek() {
            None => TagError::Unterminated,
            _ => TagError::MissingAttribute(expected),
        });
    }
    if ident != expected {
        return Err(match ATTRS.iter().find(|a| **a == ident) {
            Some(found) => TagError::AttributeOrder { expected, found },
            None => TagError::MissingAttribute(expected),
        });
    }
    cur.skip_ws();
    if !cur.eat(b'=') {
        return Err(TagError::UnexpectedCharacter);
    }
    cur.skip_ws();
    Ok(())
}

fn timestamp(cur: &mut Cursor<'_>, text: &str) -> Result<f64, TagError> {
    let quoted = cur.eat(b'"');
    if quoted {
        cur.skip_ws();
    }
    let start = cur.pos;
    if cur.digits() == 0 {
        return Err(TagError::UnparseableTimestamp);
    }
    if cur.eat(b'.') && cur.digits() == 0 {
        return Err(TagError::UnparseableTimestamp);
    }
    let value: f64 = text[start..cur.pos]
        .parse()
        .map_err(|_| TagError::UnparseableTimestamp)?;
    if !value.is_finite() {
        return Err(TagError::UnparseableTimestamp);
    }
    if quoted {
        cur.skip_ws();
        if !cur.eat(b'"') {
            return Err(TagError::UnparseableTimestamp);
        }
    }
    Ok(value)
}

fn separator(cur: &mut Cursor<'_>, next: &'static str) -> Result<(), TagError> {
    cur.skip_ws();
    match cur.peek() {
        Some(b',') => {
            cur.pos += 1;
            Ok(())
        }
        Some(b'>') => Err(TagError::MissingAttribute(next)),
        None => Err(TagError::Unterminated),
        Some(_) => Err(TagError::UnexpectedCharacter),
    }
}

fn parse_tag_body(cur: &mut Cursor<'_>, text: &str) -> Result<Evidence, TagError> {
    attribute(cur, "start")?;
    let start_s = timestamp(cur, text)?;
    separator(cur, "end")?;
    attribute(cur, "end")?;
    let end_s = timestamp(cur, text)?;
    separator(cur, "desc")?;
    attribute(cur, "desc")?;
    if !cur.eat(b'"') {
        return Err(TagError::UnexpectedCharacter);
    }
    let desc_start = cur.pos;
    while cur.peek().is_some_and(|b| b != b'"') {
        cur.pos += 1;
    }
    if cur.peek().is_none() {
        return Err(TagError::Unterminated);
    }
    let desc = &text[desc_start..cur.pos];
    cur.pos += 1;
    cur.skip_ws();
    match cur.peek() {
        Some(b'>') => cur.pos += 1,
        None => return Err(TagError::Unterminated),
        Some(_) => return Err(TagError::QuoteInDescription),
    }
    Evidence::new(start_s, end_s, desc)
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&canonicalize_evidence(self))
    }
}
