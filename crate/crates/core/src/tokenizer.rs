//! WordPiece-style subword tokenizer with word ↔ token span tracking.
//!
//! Text is lowercased and split on whitespace; every punctuation character
//! becomes a word of its own. Each word is then decomposed greedily into the
//! longest vocabulary pieces, non-initial pieces carrying the continuation
//! prefix (`##` by default). Phrase spans are defined over words, so the
//! sequence keeps the token range of every word.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Default prefix marking a non-initial subword piece.
pub const CONTINUATION_PREFIX: &str = "##";

/// Immutable token vocabulary. Ids are zero-based line numbers of the source.
#[derive(Debug, Clone)]
pub struct Vocab {
    entries: HashMap<String, usize>,
    tokens: Vec<String>,
    pub pad_id: usize,
    pub unk_id: usize,
    pub cls_id: usize,
    pub sep_id: usize,
    pub continuation_prefix: String,
}

impl Vocab {
    /// Parses a vocabulary with one token per line.
    ///
    /// A trailing newline is tolerated; blank lines in the middle are not, since
    /// they would shift every later id.
    pub fn load(source: &str) -> Result<Self> {
        let body = source.strip_suffix('\n').unwrap_or(source);
        let body = body.strip_suffix('\r').unwrap_or(body);
        if body.trim().is_empty() {
            return Err(Error::EmptyInput("vocabulary source"));
        }
        let mut entries = HashMap::new();
        let mut tokens = Vec::new();
        for (line, raw) in body.split('\n').enumerate() {
            let token = raw.strip_suffix('\r').unwrap_or(raw);
            if token.is_empty() {
                return Err(Error::Parse {
                    context: format!("vocabulary line {}", line + 1),
                    message: "blank line".into(),
                });
            }
            if entries.insert(token.to_string(), line).is_some() {
                return Err(Error::DuplicateEntry {
                    entry: token.to_string(),
                    line: line + 1,
                });
            }
            tokens.push(token.to_string());
        }
        let special = |name: &str| {
            entries
                .get(name)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocabulary is missing special token {name}")))
        };
        Ok(Self {
            pad_id: special(PAD)?,
            unk_id: special(UNK)?,
            cls_id: special(CLS)?,
            sep_id: special(SEP)?,
            entries,
            tokens,
            continuation_prefix: CONTINUATION_PREFIX.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.entries.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn is_special(&self, id: usize) -> bool {
        id == self.pad_id || id == self.unk_id || id == self.cls_id || id == self.sep_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub text: String,
    /// Source word, `None` for `[CLS]` and `[SEP]`.
    pub word_index: Option<usize>,
    pub is_continuation: bool,
}

/// Tokenized sentence framed by `[CLS]` ... `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    /// Lowercased, punctuation-split words of the input.
    pub words: Vec<String>,
    /// Inclusive token range of each word.
    pub word_spans: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn ids(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Token indices strictly between `[CLS]` and `[SEP]`.
    pub fn content_range(&self) -> RangeInclusive<usize> {
        1..=self.tokens.len() - 2
    }

    /// Projects an inclusive word range onto the inclusive token range it occupies.
    pub fn tokens_for_word_range(&self, word_start: usize, word_end: usize) -> Result<(usize, usize)> {
        if word_start > word_end || word_end >= self.words.len() {
            return Err(Error::Bounds(format!(
                "word range ({word_start}, {word_end}) on a {}-word sentence",
                self.words.len()
            )));
        }
        Ok((self.word_spans[word_start].0, self.word_spans[word_end].1))
    }
}

/// Lowercases and splits text into words; punctuation characters stand alone.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Greedy longest-match decomposition of one word. `None` if some residue has
/// no matching piece.
fn word_pieces(word: &str, vocab: &Vocab) -> Option<Vec<(usize, String)>> {
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            let mut piece: String = chars[start..end].iter().collect();
            if start > 0 {
                piece.insert_str(0, &vocab.continuation_prefix);
            }
            if let Some(id) = vocab.id(&piece) {
                found = Some((id, piece));
                break;
            }
            end -= 1;
        }
        pieces.push(found?);
        start = end;
    }
    Some(pieces)
}

pub fn tokenize(text: &str, vocab: &Vocab) -> Result<TokenSequence> {
    let words = split_words(text);
    if words.is_empty() {
        return Err(Error::EmptyInput("text to tokenize"));
    }
    let mut tokens = vec![Token {
        id: vocab.cls_id,
        text: CLS.to_string(),
        word_index: None,
        is_continuation: false,
    }];
    let mut word_spans = Vec::with_capacity(words.len());
    for (word_index, word) in words.iter().enumerate() {
        let first = tokens.len();
        match word_pieces(word, vocab) {
            Some(pieces) => {
                for (k, (id, text)) in pieces.into_iter().enumerate() {
                    tokens.push(Token {
                        id,
                        text,
                        word_index: Some(word_index),
                        is_continuation: k > 0,
                    });
                }
            }
            None => tokens.push(Token {
                id: vocab.unk_id,
                text: UNK.to_string(),
                word_index: Some(word_index),
                is_continuation: false,
            }),
        }
        word_spans.push((first, tokens.len() - 1));
    }
    tokens.push(Token {
        id: vocab.sep_id,
        text: SEP.to_string(),
        word_index: None,
        is_continuation: false,
    });
    Ok(TokenSequence {
        tokens,
        words,
        word_spans,
    })
}
