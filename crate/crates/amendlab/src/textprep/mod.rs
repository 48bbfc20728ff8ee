//! Criterion segmentation, normalization, and tokenization shared by the
//! diffing, labeling, and masking stages.

mod wordpiece;

pub use wordpiece::{tokenize_wordpiece, Vocab, VocabError};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Eligibility criteria split into per-criterion units.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionList {
    pub inclusion: Vec<String>,
    pub exclusion: Vec<String>,
    /// Text not under a recognized section header.
    pub unclassified: Vec<String>,
}

impl CriterionList {
    pub fn is_empty(&self) -> bool {
        self.inclusion.is_empty() && self.exclusion.is_empty() && self.unclassified.is_empty()
    }

    pub fn all_items(&self) -> impl Iterator<Item = &str> {
        self.inclusion
            .iter()
            .chain(self.exclusion.iter())
            .chain(self.unclassified.iter())
            .map(String::as_str)
    }
}

/// A token stream with byte offsets into the source text.
///
/// Offsets are non-overlapping and monotonically increasing; slicing the
/// source with an offset pair reproduces the covered span exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub offsets: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Section headers and item markers recognized by [`segment_criteria`].
///
/// The registry never standardized criterion formatting, so both lists are
/// configurable; defaults cover the common layouts.
#[derive(Debug, Clone)]
pub struct SegmentConfig {
    pub inclusion_headers: Vec<String>,
    pub exclusion_headers: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            inclusion_headers: vec![
                "inclusion criteria".into(),
                "key inclusion criteria".into(),
                "main inclusion criteria".into(),
            ],
            exclusion_headers: vec![
                "exclusion criteria".into(),
                "key exclusion criteria".into(),
                "main exclusion criteria".into(),
            ],
        }
    }
}

/// Apply Unicode NFC so downstream offsets are deterministic.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Inclusion,
    Exclusion,
}

/// Split eligibility-criteria text into inclusion / exclusion / unclassified
/// items on recognized headers and leading item markers. Multi-line items are
/// joined with a single space.
pub fn segment_criteria(ec_text: &str) -> CriterionList {
    segment_criteria_with(ec_text, &SegmentConfig::default())
}

pub fn segment_criteria_with(ec_text: &str, config: &SegmentConfig) -> CriterionList {
    let mut out = CriterionList::default();
    let mut section = Section::None;
    let mut current: Option<String> = None;

    fn flush(out: &mut CriterionList, section: Section, current: &mut Option<String>) {
        if let Some(item) = current.take() {
            let item = item.trim().to_string();
            if !item.is_empty() {
                match section {
                    Section::Inclusion => out.inclusion.push(item),
                    Section::Exclusion => out.exclusion.push(item),
                    Section::None => out.unclassified.push(item),
                }
            }
        }
    }

    for raw_line in ec_text.replace("\r\n", "\n").lines() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let lowered = line.to_lowercase();
        let header = lowered.trim_end_matches(':').trim();
        if config.inclusion_headers.iter().any(|h| h == header) {
            flush(&mut out, section, &mut current);
            section = Section::Inclusion;
            continue;
        }
        if config.exclusion_headers.iter().any(|h| h == header) {
            flush(&mut out, section, &mut current);
            section = Section::Exclusion;
            continue;
        }
        if let Some(rest) = strip_item_marker(line) {
            flush(&mut out, section, &mut current);
            current = Some(rest.to_string());
        } else {
            match current.as_mut() {
                Some(item) => {
                    item.push(' ');
                    item.push_str(line);
                }
                None => current = Some(line.to_string()),
            }
        }
    }
    flush(&mut out, section, &mut current);
    out
}

/// Strip one leading item marker (`-`, `*`, `•`, `N.`, `N)`), returning the
/// remainder, or `None` when the line carries no marker.
fn strip_item_marker(line: &str) -> Option<&str> {
    let line = line.trim_start();
    let mut chars = line.char_indices();
    match chars.next() {
        Some((_, '-')) | Some((_, '*')) | Some((_, '•')) => {
            let rest = &line[chars.next().map(|(i, _)| i).unwrap_or(line.len())..];
            // a bare "-" with no following space is content, not a marker
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                Some(rest.trim_start())
            } else {
                None
            }
        }
        Some((_, c)) if c.is_ascii_digit() => {
            let digits_end = line
                .char_indices()
                .find(|(_, c)| !c.is_ascii_digit())
                .map(|(i, _)| i)?;
            let rest = &line[digits_end..];
            if let Some(tail) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                if tail.is_empty() || tail.starts_with(char::is_whitespace) {
                    return Some(tail.trim_start());
                }
            }
            None
        }
        _ => None,
    }
}

/// Canonical form for criterion comparison: NFC, case-fold, unicode dashes
/// and quotes mapped to ASCII, leading item markers stripped, whitespace
/// collapsed, terminal punctuation dropped. Idempotent.
pub fn normalize(criterion: &str) -> String {
    // terminal-punctuation stripping can expose a fresh item marker
    // (e.g. "*:" -> "*"), so run the pass to a fixpoint
    let mut current = normalize_once(criterion);
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn normalize_once(criterion: &str) -> String {
    let folded: String = criterion
        .nfc()
        .flat_map(char::to_lowercase)
        .map(map_unicode_char)
        .collect();

    let mut s = folded.trim().to_string();
    loop {
        match strip_item_marker(&s) {
            Some(rest) if rest.len() < s.len() => s = rest.to_string(),
            _ => break,
        }
    }

    let mut collapsed = String::with_capacity(s.len());
    let mut last_ws = false;
    for c in s.trim().chars() {
        if c.is_whitespace() {
            if !last_ws {
                collapsed.push(' ');
            }
            last_ws = true;
        } else {
            collapsed.push(c);
            last_ws = false;
        }
    }

    while collapsed
        .chars()
        .last()
        .is_some_and(|c| matches!(c, '.' | ',' | ';' | ':' | '!' | '?') || c.is_whitespace())
    {
        collapsed.pop();
    }
    collapsed
}

fn map_unicode_char(c: char) -> char {
    match c {
        '\u{2013}' | '\u{2014}' | '\u{2212}' => '-',
        '\u{2018}' | '\u{2019}' => '\'',
        '\u{201C}' | '\u{201D}' => '"',
        '\u{00A0}' => ' ',
        other => other,
    }
}

const OPERATOR_CHARS: &[char] = &[
    '<', '>', '=', '+', '~', '^', '&', '|', '%', '/', '\\', '≤', '≥', '≠',
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Whitespace-and-punctuation tokenizer with exact byte offsets.
///
/// Words are maximal alphanumeric runs; decimals like `2.5` stay intact;
/// operator runs (`>=`, `≤`) group into one token; any other non-whitespace
/// character is its own token.
pub fn tokenize_basic(text: &str) -> TokenSequence {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut offsets = Vec::new();
    let mut i = 0;

    let push = |start: usize, end: usize, tokens: &mut Vec<String>, offsets: &mut Vec<(usize, usize)>| {
        tokens.push(text[start..end].to_string());
        offsets.push((start, end));
    };

    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if cj == '.'
                    && chars[j - 1].1.is_ascii_digit()
                    && chars.get(j + 1).is_some_and(|&(_, n)| n.is_ascii_digit())
                {
                    // decimal point inside a number
                    j += 1;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map(|&(b, _)| b).unwrap_or(text.len());
            push(start, end, &mut tokens, &mut offsets);
            i = j;
        } else if OPERATOR_CHARS.contains(&c) {
            let mut j = i + 1;
            while j < chars.len() && OPERATOR_CHARS.contains(&chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map(|&(b, _)| b).unwrap_or(text.len());
            push(start, end, &mut tokens, &mut offsets);
            i = j;
        } else {
            let end = chars.get(i + 1).map(|&(b, _)| b).unwrap_or(text.len());
            push(start, end, &mut tokens, &mut offsets);
            i += 1;
        }
    }

    TokenSequence { tokens, offsets }
}
