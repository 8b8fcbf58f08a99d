//! Phrase segmentation: the players of the coalition game.
//!
//! A small rule-based tagger assigns one [`PosTag`] per word, and a chunk
//! grammar applied longest-match, left to right, yields noun, verb, adjective
//! and prepositional phrases plus simple clauses. Spans may nest. Users with a
//! real parser can bypass all of this through [`load_external_phrases`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::split_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Det,
    Adj,
    Noun,
    Verb,
    Adv,
    Prep,
    Pron,
    Conj,
    Intj,
    Punct,
    Other,
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "DET" => PosTag::Det,
            "ADJ" => PosTag::Adj,
            "NOUN" => PosTag::Noun,
            "VERB" => PosTag::Verb,
            "ADV" => PosTag::Adv,
            "PREP" => PosTag::Prep,
            "PRON" => PosTag::Pron,
            "CONJ" => PosTag::Conj,
            "INTJ" => PosTag::Intj,
            "PUNCT" => PosTag::Punct,
            "OTHER" => PosTag::Other,
            other => {
                return Err(Error::Parse {
                    context: "part-of-speech tag".into(),
                    message: format!("unknown tag {other:?}"),
                })
            }
        })
    }
}

/// Word → tag lookup table.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, PosTag>,
}

impl Lexicon {
    /// Parses `word TAG` lines; blank lines and `#` comments are skipped.
    pub fn load(source: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (n, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(word), Some(tag), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    context: format!("lexicon line {}", n + 1),
                    message: "expected `word TAG`".into(),
                });
            };
            let tag = tag.parse().map_err(|_| Error::Parse {
                context: format!("lexicon line {}", n + 1),
                message: format!("unknown tag {tag:?}"),
            })?;
            entries.insert(word.to_lowercase(), tag);
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, word: &str, tag: PosTag) {
        self.entries.insert(word.to_lowercase(), tag);
    }

    pub fn get(&self, word: &str) -> Option<PosTag> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedWord {
    pub word: String,
    pub tag: PosTag,
}

/// Lexicon first, then suffix rules, then NOUN.
pub fn pos_tag(words: &[String], lexicon: &Lexicon) -> Vec<TaggedWord> {
    words
        .iter()
        .map(|word| {
            let tag = lexicon.get(word).unwrap_or_else(|| {
                let mut chars = word.chars();
                let first = chars.next();
                if first.is_some_and(|c| !c.is_alphanumeric()) {
                    PosTag::Punct
                } else if word.chars().all(|c| c.is_ascii_digit()) {
                    PosTag::Other
                } else if word.len() > 4 && (word.ends_with("ing") || word.ends_with("ed")) {
                    PosTag::Verb
                } else if word.len() > 3 && word.ends_with("ly") {
                    PosTag::Adv
                } else {
                    PosTag::Noun
                }
            });
            TaggedWord {
                word: word.clone(),
                tag,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PhraseKind {
    Sent,
    Np,
    Vp,
    Adjp,
    Pp,
    Clause,
}

impl fmt::Display for PhraseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhraseKind::Sent => "SENT",
            PhraseKind::Np => "NP",
            PhraseKind::Vp => "VP",
            PhraseKind::Adjp => "ADJP",
            PhraseKind::Pp => "PP",
            PhraseKind::Clause => "CLAUSE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub kind: PhraseKind,
    pub word_start: usize,
    /// Inclusive.
    pub word_end: usize,
    pub text: String,
}

impl PhraseSpan {
    pub fn new(kind: PhraseKind, word_start: usize, word_end: usize, words: &[String]) -> Self {
        Self {
            kind,
            word_start,
            word_end,
            text: join_words(&words[word_start..=word_end]),
        }
    }

    pub fn len(&self) -> usize {
        self.word_end - self.word_start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Joins words with single spaces, attaching closing punctuation to the
/// preceding word: `["a", "fresh", ",", "quirky"]` → `"a fresh, quirky"`.
pub fn join_words(words: &[String]) -> String {
    let mut out = String::new();
    for word in words {
        let attaches = matches!(word.as_str(), "," | "." | "!" | "?" | ";" | ":" | ")" | "%");
        if !out.is_empty() && !attaches {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// A longest match starting at some word: its end plus every span it emits.
struct Match {
    end: usize,
    spans: Vec<(PhraseKind, usize, usize)>,
}

struct Chunker<'a> {
    tags: Vec<PosTag>,
    words: Vec<&'a str>,
}

impl Chunker<'_> {
    fn tag(&self, i: usize) -> Option<PosTag> {
        self.tags.get(i).copied()
    }

    fn is_comma(&self, i: usize) -> bool {
        self.words.get(i) == Some(&",")
    }

    /// `DET? (ADJ (","? ADJ)*)? NOUN+ | PRON`
    fn np(&self, i: usize) -> Option<Match> {
        if self.tag(i) == Some(PosTag::Pron) {
            return Some(Match {
                end: i,
                spans: vec![(PhraseKind::Np, i, i)],
            });
        }
        let mut j = i;
        if self.tag(j) == Some(PosTag::Det) {
            j += 1;
        }
        let nouns_from = |k: usize| {
            let mut end = None;
            let mut k = k;
            while self.tag(k) == Some(PosTag::Noun) {
                end = Some(k);
                k += 1;
            }
            end
        };
        let mut candidates = Vec::new();
        if self.tag(j) == Some(PosTag::Adj) {
            let mut k = j + 1;
            loop {
                if self.tag(k) == Some(PosTag::Adj) {
                    k += 1;
                } else if self.is_comma(k) && self.tag(k + 1) == Some(PosTag::Adj) {
                    k += 2;
                } else {
                    break;
                }
            }
            candidates.push(k);
        }
        candidates.push(j);
        let end = candidates.into_iter().find_map(nouns_from)?;
        Some(Match {
            end,
            spans: vec![(PhraseKind::Np, i, end)],
        })
    }

    /// `ADV? ADJ+`
    fn adjp(&self, i: usize) -> Option<Match> {
        let mut j = i;
        if self.tag(j) == Some(PosTag::Adv) {
            j += 1;
        }
        if self.tag(j) != Some(PosTag::Adj) {
            return None;
        }
        while self.tag(j + 1) == Some(PosTag::Adj) {
            j += 1;
        }
        Some(Match {
            end: j,
            spans: vec![(PhraseKind::Adjp, i, j)],
        })
    }

    /// `PREP NP`
    fn pp(&self, i: usize) -> Option<Match> {
        if self.tag(i) != Some(PosTag::Prep) {
            return None;
        }
        let np = self.np(i + 1)?;
        let mut spans = vec![(PhraseKind::Pp, i, np.end)];
        spans.extend(np.spans);
        Some(Match { end: np.end, spans })
    }

    /// `VERB+ (NP | ADJP)?`
    fn vp(&self, i: usize) -> Option<Match> {
        if self.tag(i) != Some(PosTag::Verb) {
            return None;
        }
        let mut j = i;
        while self.tag(j + 1) == Some(PosTag::Verb) {
            j += 1;
        }
        let object = self.np(j + 1).or_else(|| self.adjp(j + 1));
        let end = object.as_ref().map_or(j, |m| m.end);
        let mut spans = vec![(PhraseKind::Vp, i, end)];
        if let Some(object) = object {
            spans.extend(object.spans);
        }
        Some(Match { end, spans })
    }

    /// `NP VP PP?`
    fn clause(&self, i: usize) -> Option<Match> {
        let np = self.np(i)?;
        let vp = self.vp(np.end + 1)?;
        let pp = self.pp(vp.end + 1);
        let end = pp.as_ref().map_or(vp.end, |m| m.end);
        let mut spans = vec![(PhraseKind::Clause, i, end)];
        spans.extend(np.spans);
        spans.extend(vp.spans);
        if let Some(pp) = pp {
            spans.extend(pp.spans);
        }
        Some(Match { end, spans })
    }

    fn best_at(&self, i: usize) -> Option<Match> {
        // Earlier rules win ties.
        [self.clause(i), self.vp(i), self.pp(i), self.np(i), self.adjp(i)]
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Match>, m| match best {
                Some(b) if b.end >= m.end => Some(b),
                _ => Some(m),
            })
    }
}

/// Applies the chunk grammar to tagged words.
pub fn chunk(tagged: &[TaggedWord]) -> Vec<PhraseSpan> {
    let chunker = Chunker {
        tags: tagged.iter().map(|t| t.tag).collect(),
        words: tagged.iter().map(|t| t.word.as_str()).collect(),
    };
    let words: Vec<String> = tagged.iter().map(|t| t.word.clone()).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tagged.len() {
        match chunker.best_at(i) {
            Some(m) => {
                spans.extend(
                    m.spans
                        .into_iter()
                        .map(|(kind, start, end)| PhraseSpan::new(kind, start, end, &words)),
                );
                i = m.end + 1;
            }
            None => i += 1,
        }
    }
    spans
}

/// Ordered phrase players; index 0 is always the whole sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhraseSet {
    pub sentence: String,
    pub words: Vec<String>,
    pub phrases: Vec<PhraseSpan>,
}

impl PhraseSet {
    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.phrases.iter().map(|p| p.text.as_str()).collect()
    }

    /// Keeps the sentence plus the phrases accepted by `keep`, in order.
    pub fn filtered(&self, mut keep: impl FnMut(&PhraseSpan) -> bool) -> PhraseSet {
        let mut phrases = vec![self.phrases[0].clone()];
        phrases.extend(self.phrases[1..].iter().filter(|p| keep(p)).cloned());
        PhraseSet {
            sentence: self.sentence.clone(),
            words: self.words.clone(),
            phrases,
        }
    }
}

/// Prepends the sentence span, drops duplicate ranges and sorts the rest by
/// start ascending, then length descending.
pub fn build_phrase_set(sentence: &str, spans: &[PhraseSpan]) -> Result<PhraseSet> {
    let words = split_words(sentence);
    if words.is_empty() {
        return Err(Error::EmptyInput("sentence"));
    }
    let last = words.len() - 1;
    let mut seen = HashSet::from([(0, last)]);
    let mut rest = Vec::new();
    for span in spans {
        if span.word_start > span.word_end {
            return Err(Error::Validation(format!(
                "phrase end {} precedes start {}",
                span.word_end, span.word_start
            )));
        }
        if span.word_end > last {
            return Err(Error::Bounds(format!(
                "phrase ({}, {}) on a {}-word sentence",
                span.word_start,
                span.word_end,
                words.len()
            )));
        }
        if span.kind == PhraseKind::Sent {
            continue;
        }
        if seen.insert((span.word_start, span.word_end)) {
            rest.push(PhraseSpan::new(span.kind, span.word_start, span.word_end, &words));
        }
    }
    rest.sort_by(|a, b| a.word_start.cmp(&b.word_start).then(b.word_end.cmp(&a.word_end)));
    let mut phrases = vec![PhraseSpan::new(PhraseKind::Sent, 0, last, &words)];
    phrases.extend(rest);
    Ok(PhraseSet {
        sentence: sentence.to_string(),
        words,
        phrases,
    })
}

/// Tag, chunk and build the phrase set for a sentence.
pub fn extract_phrases(sentence: &str, lexicon: &Lexicon) -> Result<PhraseSet> {
    let words = split_words(sentence);
    let spans = chunk(&pos_tag(&words, lexicon));
    build_phrase_set(sentence, &spans)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalDocument {
    sentence: String,
    phrases: Vec<ExternalSpan>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalSpan {
    kind: PhraseKind,
    word_start: usize,
    word_end: usize,
}

/// Reads an externally produced phrase document:
///
/// ```json
/// {"sentence": "read the book, forget the movie!",
///  "phrases": [{"kind": "NP", "word_start": 1, "word_end": 2}]}
/// ```
pub fn load_external_phrases(source: &str) -> Result<PhraseSet> {
    let doc: ExternalDocument = serde_json::from_str(source).map_err(|e| Error::Parse {
        context: format!("phrase document line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let spans: Vec<PhraseSpan> = doc
        .phrases
        .iter()
        .map(|s| PhraseSpan {
            kind: s.kind,
            word_start: s.word_start,
            word_end: s.word_end,
            text: String::new(),
        })
        .collect();
    build_phrase_set(&doc.sentence, &spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        let mut lex = Lexicon::default();
        for (w, t) in [
            ("the", PosTag::Det),
            ("a", PosTag::Det),
            ("read", PosTag::Verb),
            ("forget", PosTag::Verb),
            ("they", PosTag::Pron),
            ("fresh", PosTag::Adj),
            ("quirky", PosTag::Adj),
            ("very", PosTag::Adv),
            ("to", PosTag::Prep),
            (",", PosTag::Punct),
            ("!", PosTag::Punct),
        ] {
            lex.insert(w, t);
        }
        lex
    }

    fn words(s: &str) -> Vec<String> {
        split_words(s)
    }

    #[test]
    fn tagger_rules() {
        let lex = lexicon();
        let tags: Vec<_> = pos_tag(&words("the parker waiting quickly"), &lex)
            .into_iter()
            .map(|t| t.tag)
            .collect();
        assert_eq!(tags, [PosTag::Det, PosTag::Noun, PosTag::Verb, PosTag::Adv]);
    }

    #[test]
    fn lexicon_parsing() {
        let lex = Lexicon::load("# comment\nthe DET\n\nrun VERB\n").unwrap();
        assert_eq!(lex.get("the"), Some(PosTag::Det));
        assert_eq!(lex.len(), 2);
        assert!(Lexicon::load("the DETERMINER").is_err());
        assert!(Lexicon::load("the").is_err());
    }

    #[test]
    fn pronoun_is_noun_phrase() {
        let spans = chunk(&pos_tag(&words("they"), &lexicon()));
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].kind, spans[0].text.as_str()), (PhraseKind::Np, "they"));
    }

    #[test]
    fn comma_separated_adjectives_stay_in_noun_phrase() {
        let spans = chunk(&pos_tag(&words("a fresh , quirky charm"), &lexicon()));
        assert_eq!(spans[0].text, "a fresh, quirky charm");
        assert_eq!(spans.len(), 1);
    }

    #[test]
    fn standalone_adjective_phrase() {
        let spans = chunk(&pos_tag(&words("very fresh"), &lexicon()));
        assert_eq!(spans[0].kind, PhraseKind::Adjp);
    }

    #[test]
    fn verb_phrases_nest_their_objects() {
        let set = extract_phrases("Read the book, forget the movie!", &lexicon()).unwrap();
        assert_eq!(
            set.texts(),
            [
                "read the book, forget the movie!",
                "read the book",
                "the book",
                "forget the movie",
                "the movie"
            ]
        );
    }

    #[test]
    fn figure_ordering_from_explicit_spans() {
        let w = words("Read the book, forget the movie!");
        let spans = [
            PhraseSpan::new(PhraseKind::Vp, 4, 6, &w),
            PhraseSpan::new(PhraseKind::Np, 5, 6, &w),
            PhraseSpan::new(PhraseKind::Np, 1, 2, &w),
        ];
        let set = build_phrase_set("Read the book, forget the movie!", &spans).unwrap();
        assert_eq!(
            set.texts(),
            [
                "read the book, forget the movie!",
                "the book",
                "forget the movie",
                "the movie"
            ]
        );
    }

    #[test]
    fn empty_and_duplicate_spans() {
        let set = build_phrase_set("the book", &[]).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.phrases[0].kind, PhraseKind::Sent);

        let w = words("the book is good");
        let np = PhraseSpan::new(PhraseKind::Np, 0, 1, &w);
        let set = build_phrase_set("the book is good", &[np.clone(), np]).unwrap();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn out_of_bounds_span() {
        let span = PhraseSpan {
            kind: PhraseKind::Np,
            word_start: 1,
            word_end: 9,
            text: String::new(),
        };
        assert!(matches!(build_phrase_set("the book", &[span]), Err(Error::Bounds(_))));
    }

    #[test]
    fn external_documents() {
        let doc = r#"{"sentence": "Read the book, forget the movie!",
            "phrases": [{"kind": "NP", "word_start": 1, "word_end": 2},
                        {"kind": "VP", "word_start": 4, "word_end": 6},
                        {"kind": "NP", "word_start": 5, "word_end": 6},
                        {"kind": "VP", "word_start": 0, "word_end": 2}]}"#;
        let set = load_external_phrases(doc).unwrap();
        assert_eq!(
            set,
            extract_phrases("Read the book, forget the movie!", &lexicon()).unwrap()
        );

        let reversed = r#"{"sentence": "the book", "phrases": [{"kind": "NP", "word_start": 1, "word_end": 0}]}"#;
        assert!(matches!(load_external_phrases(reversed), Err(Error::Validation(_))));

        let missing = r#"{"phrases": []}"#;
        match load_external_phrases(missing) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("sentence")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
