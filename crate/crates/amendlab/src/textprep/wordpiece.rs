//! Greedy longest-match-first subword tokenization over a fixed vocabulary
//! with `##` continuation prefixes.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use super::{tokenize_basic, TokenSequence};

pub const UNK_TOKEN: &str = "[UNK]";
pub const MASK_TOKEN: &str = "[MASK]";
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("failed to read vocabulary file: {0}")]
    Io(#[from] std::io::Error),
    #[error("vocabulary is missing required token {0}")]
    MissingSpecial(&'static str),
}

/// WordPiece vocabulary: one token per line, `##` prefix for continuations.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: HashSet<String>,
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: HashSet<String> = tokens.into_iter().map(Into::into).collect();
        for special in [UNK_TOKEN, MASK_TOKEN] {
            if !tokens.contains(special) {
                return Err(VocabError::MissingSpecial(if special == UNK_TOKEN {
                    UNK_TOKEN
                } else {
                    MASK_TOKEN
                }));
            }
        }
        Ok(Self { tokens })
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let content = std::fs::read_to_string(path)?;
        Self::from_tokens(content.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Tokenize `text` into WordPiece subwords.
///
/// Words come from [`tokenize_basic`]; each is split greedily longest-match
/// first. Words longer than 100 characters or with no coverable prefix become
/// `[UNK]` spanning the whole word.
pub fn tokenize_wordpiece(text: &str, vocab: &Vocab) -> TokenSequence {
    let basic = tokenize_basic(text);
    let mut tokens = Vec::new();
    let mut offsets = Vec::new();

    for (word, &(start, end)) in basic.tokens.iter().zip(&basic.offsets) {
        match split_word(word, vocab) {
            Some(pieces) => {
                let mut byte = start;
                for (k, piece) in pieces.iter().enumerate() {
                    let surface_len = if k == 0 { piece.len() } else { piece.len() - 2 };
                    tokens.push(piece.clone());
                    offsets.push((byte, byte + surface_len));
                    byte += surface_len;
                }
                debug_assert_eq!(byte, end);
            }
            None => {
                tokens.push(UNK_TOKEN.to_string());
                offsets.push((start, end));
            }
        }
    }

    TokenSequence { tokens, offsets }
}

fn split_word(word: &str, vocab: &Vocab) -> Option<Vec<String>> {
    if word.chars().count() > MAX_WORD_CHARS {
        return None;
    }
    let mut pieces = Vec::new();
    let mut pos = 0;
    while pos < word.len() {
        let rest = &word[pos..];
        let mut matched = None;
        // candidate end positions, longest first
        let mut ends: Vec<usize> = rest.char_indices().map(|(i, _)| i).skip(1).collect();
        ends.push(rest.len());
        for &e in ends.iter().rev() {
            let candidate = if pos == 0 {
                rest[..e].to_string()
            } else {
                format!("##{}", &rest[..e])
            };
            if vocab.contains(&candidate) {
                matched = Some((candidate, e));
                break;
            }
        }
        let (piece, consumed) = matched?;
        pieces.push(piece);
        pos += consumed;
    }
    Some(pieces)
}
