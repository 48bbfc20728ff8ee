//! Sequence matching between eligibility-criteria versions.
//!
//! The matcher is the recursive longest-matching-block (Ratcliff–Obershelp
//! family) algorithm with junk heuristics disabled: among equal-length
//! longest blocks the one with the smallest a-start, then smallest b-start,
//! wins. This keeps opcodes deterministic and oracle-checkable.

mod render;

pub use render::{render_unified, split_lines, split_lines_for_prompt, DEFAULT_CONTEXT_LINES};

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("operation requires {expected:?} granularity, got {actual:?}")]
    WrongGranularity {
        expected: Granularity,
        actual: Granularity,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Token,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpTag {
    Equal,
    Replace,
    Delete,
    Insert,
}

/// One segment of a diff alignment. Ranges are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub tag: OpTag,
    #[serde(rename = "a0")]
    pub a_start: usize,
    #[serde(rename = "a1")]
    pub a_end: usize,
    #[serde(rename = "b0")]
    pub b_start: usize,
    #[serde(rename = "b1")]
    pub b_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffResult {
    pub granularity: Granularity,
    #[serde(rename = "ratio")]
    pub similarity_ratio: f64,
    pub opcodes: Vec<Opcode>,
}

/// Token ranges of the earlier version that were deleted or replaced in the
/// final version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnstableSpanSet {
    pub spans: Vec<(usize, usize)>,
}

impl UnstableSpanSet {
    pub fn contains(&self, position: usize) -> bool {
        self.spans.iter().any(|&(s, e)| s <= position && position < e)
    }

    pub fn token_count(&self) -> usize {
        self.spans.iter().map(|&(s, e)| e - s).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// Longest matching block within `a[alo..ahi]` x `b[blo..bhi]`.
fn find_longest_match<T: Eq + Hash>(
    a: &[T],
    b2j: &HashMap<&T, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut besti, mut bestj, mut bestsize) = (alo, blo, 0);
    let mut j2len: HashMap<usize, usize> = HashMap::new();
    for (i, item) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut newj2len: HashMap<usize, usize> = HashMap::new();
        if let Some(indices) = b2j.get(item) {
            for &j in indices {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = j.checked_sub(1).and_then(|p| j2len.get(&p)).copied().unwrap_or(0) + 1;
                newj2len.insert(j, k);
                if k > bestsize {
                    besti = i + 1 - k;
                    bestj = j + 1 - k;
                    bestsize = k;
                }
            }
        }
        j2len = newj2len;
    }
    (besti, bestj, bestsize)
}

fn matching_blocks<T: Eq + Hash>(a: &[T], b: &[T]) -> Vec<(usize, usize, usize)> {
    let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, item) in b.iter().enumerate() {
        b2j.entry(item).or_default().push(j);
    }

    let mut queue = vec![(0usize, a.len(), 0usize, b.len())];
    let mut blocks = Vec::new();
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let (i, j, k) = find_longest_match(a, &b2j, alo, ahi, blo, bhi);
        if k > 0 {
            blocks.push((i, j, k));
            queue.push((alo, i, blo, j));
            queue.push((i + k, ahi, j + k, bhi));
        }
    }
    blocks.sort_unstable();

    // merge adjacent blocks so no two `equal` opcodes touch
    let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(blocks.len() + 1);
    for (i, j, k) in blocks {
        match merged.last_mut() {
            Some(last) if last.0 + last.2 == i && last.1 + last.2 == j => last.2 += k,
            _ => merged.push((i, j, k)),
        }
    }
    merged.push((a.len(), b.len(), 0));
    merged
}

/// Compute the opcode alignment of `a` and `b`.
pub fn diff<T: Eq + Hash>(a: &[T], b: &[T], granularity: Granularity) -> DiffResult {
    let blocks = matching_blocks(a, b);
    let mut opcodes = Vec::new();
    let (mut ai, mut bj) = (0usize, 0usize);
    let mut matched = 0usize;
    for (i, j, k) in blocks {
        let tag = match (ai < i, bj < j) {
            (true, true) => Some(OpTag::Replace),
            (true, false) => Some(OpTag::Delete),
            (false, true) => Some(OpTag::Insert),
            (false, false) => None,
        };
        if let Some(tag) = tag {
            opcodes.push(Opcode {
                tag,
                a_start: ai,
                a_end: i,
                b_start: bj,
                b_end: j,
            });
        }
        if k > 0 {
            opcodes.push(Opcode {
                tag: OpTag::Equal,
                a_start: i,
                a_end: i + k,
                b_start: j,
                b_end: j + k,
            });
            matched += k;
        }
        ai = i + k;
        bj = j + k;
    }

    let denom = a.len() + b.len();
    let similarity_ratio = if denom == 0 {
        1.0
    } else {
        2.0 * matched as f64 / denom as f64
    };

    DiffResult {
        granularity,
        similarity_ratio,
        opcodes,
    }
}

/// The a-ranges of `replace` and `delete` opcodes of a token-level diff.
pub fn unstable_spans(diff: &DiffResult) -> Result<UnstableSpanSet, DiffError> {
    if diff.granularity != Granularity::Token {
        return Err(DiffError::WrongGranularity {
            expected: Granularity::Token,
            actual: diff.granularity,
        });
    }
    let spans = diff
        .opcodes
        .iter()
        .filter(|op| matches!(op.tag, OpTag::Replace | OpTag::Delete))
        .map(|op| (op.a_start, op.a_end))
        .collect();
    Ok(UnstableSpanSet { spans })
}
