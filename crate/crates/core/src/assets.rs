//! Offline assets shipped with the crate: vocabulary, POS lexicon, toy
//! sentiment corpus, pre-trained weights, and the three demo sentences.

use crate::error::Result;
use crate::model::{self, LabeledSentence, Model};
use crate::phrase::Lexicon;
use crate::report::{build_report, render_outputs, OutputFile, OutputFormats};
use crate::shap::{Explainer, ExplainerConfig, LayerTarget};
use crate::tokenizer::Vocab;

pub const VOCAB: &str = include_str!("../assets/vocab.txt");
pub const LEXICON: &str = include_str!("../assets/lexicon.txt");
pub const CORPUS: &str = include_str!("../assets/corpus.tsv");
pub const WEIGHTS: &str = include_str!("../assets/model.weights");

/// Seed the bundled weights were trained with.
pub const TRAIN_SEED: u64 = 42;

pub const S1: &str =
    "neither parker nor donovan is a typical romantic lead , but they bring a fresh , quirky charm to the formula .";
pub const S2: &str = "read the book , forget the movie !";
pub const S3: &str =
    "Oh great, another email. I just love waiting an extra week for something I ordered two months ago.";

/// `(slug, sentence)` pairs processed by the demo.
pub const DEMO_SENTENCES: [(&str, &str); 3] = [("s1", S1), ("s2", S2), ("s3", S3)];

pub fn vocab() -> Result<Vocab> {
    Vocab::load(VOCAB)
}

pub fn lexicon() -> Result<Lexicon> {
    Lexicon::load(LEXICON)
}

pub fn corpus() -> Result<Vec<LabeledSentence>> {
    model::load_corpus(CORPUS)
}

pub fn model() -> Result<Model> {
    model::load_weights(WEIGHTS)
}

/// Explains the three demo sentences with baseline and attention, returning
/// every report and figure. Without explicit layer targets the demo covers the
/// embedding and every encoder block.
pub fn demo_outputs(
    model: &Model,
    vocab: &Vocab,
    lexicon: &Lexicon,
    mut config: ExplainerConfig,
) -> Result<Vec<OutputFile>> {
    if config.layer_targets.is_none() {
        config.layer_targets = Some(LayerTarget::all(model.config.n_layers));
    }
    let explainer = Explainer::new(model, vocab, lexicon, config)?;
    let mut files = Vec::new();
    for (slug, sentence) in DEMO_SENTENCES {
        let phrases = explainer.phrases(sentence)?;
        let report = build_report(&explainer, phrases, true, Some(&Default::default()))?;
        files.extend(render_outputs(slug, &report, OutputFormats::default())?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::tokenize;

    #[test]
    fn bundled_text_assets_load() {
        let vocab = vocab().unwrap();
        assert!((2000..=5000).contains(&vocab.len()));
        assert!(lexicon().unwrap().len() >= 200);
        let corpus = corpus().unwrap();
        assert_eq!(corpus.len(), 64);
    }

    #[test]
    fn quirky_splits_in_bundled_vocab() {
        let vocab = vocab().unwrap();
        let seq = tokenize("quirky", &vocab).unwrap();
        let texts: Vec<&str> = seq.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["[CLS]", "qui", "##rky", "[SEP]"]);
    }

    #[test]
    fn demo_words_are_in_vocab() {
        let vocab = vocab().unwrap();
        for (_, s) in DEMO_SENTENCES {
            let seq = tokenize(s, &vocab).unwrap();
            assert!(seq.tokens.iter().all(|t| t.text != crate::tokenizer::UNK), "{s}");
        }
    }
}
