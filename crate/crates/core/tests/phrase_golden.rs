mod common;

use layerlens::assets::{self, S1, S2};
use layerlens::phrase::{build_phrase_set, extract_phrases, load_external_phrases, PhraseKind};

#[test]
fn s2_sub_phrases_are_exact() {
    let lexicon = assets::lexicon().unwrap();
    let set = extract_phrases(S2, &lexicon).unwrap();
    assert_eq!(set.phrases[0].kind, PhraseKind::Sent);
    assert_eq!(set.phrases[0].text, "read the book, forget the movie!");
    let mut rest: Vec<&str> = set.texts()[1..].to_vec();
    rest.sort_unstable();
    assert_eq!(rest, ["forget the movie", "read the book", "the book", "the movie"]);
}

#[test]
fn s2_index_mapping_without_leading_verb_phrase() {
    let lexicon = assets::lexicon().unwrap();
    let set = extract_phrases(S2, &lexicon)
        .unwrap()
        .filtered(|p| !(p.kind == PhraseKind::Vp && p.word_start == 0));
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
fn s1_contains_named_phrases() {
    let lexicon = assets::lexicon().unwrap();
    let set = extract_phrases(S1, &lexicon).unwrap();
    let texts: Vec<String> = set.texts().iter().map(|t| t.to_lowercase()).collect();
    for want in [
        "neither parker",
        "a typical romantic lead",
        "they",
        "a fresh, quirky charm",
        "to the formula",
        "the formula",
    ] {
        assert!(texts.iter().any(|t| t == want), "missing {want:?} in {texts:?}");
    }
    assert!(
        set.len() <= 12,
        "S1 should fit exact enumeration, got {} phrases",
        set.len()
    );
}

#[test]
fn external_document_matches_builtin_path() {
    let lexicon = assets::lexicon().unwrap();
    let builtin = extract_phrases(S2, &lexicon).unwrap();
    let doc = r#"{
        "sentence": "read the book , forget the movie !",
        "phrases": [
            {"kind": "NP", "word_start": 5, "word_end": 6},
            {"kind": "VP", "word_start": 0, "word_end": 2},
            {"kind": "VP", "word_start": 4, "word_end": 6},
            {"kind": "NP", "word_start": 1, "word_end": 2}
        ]
    }"#;
    assert_eq!(load_external_phrases(doc).unwrap(), builtin);
}

#[test]
fn ordering_ignores_input_order() {
    let lexicon = assets::lexicon().unwrap();
    let set = extract_phrases(S1, &lexicon).unwrap();
    let mut spans = set.phrases[1..].to_vec();
    spans.reverse();
    assert_eq!(build_phrase_set(S1, &spans).unwrap(), set);
}
