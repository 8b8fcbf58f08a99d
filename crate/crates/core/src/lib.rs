//! Layer-wise, phrase-level Shapley explanations for a transformer sentiment
//! classifier.
//!
//! The pipeline tokenizes a sentence, segments it into phrases, and treats
//! those phrases as players of a coalition game whose value is the model's
//! positive-class score with absent phrases replaced by padding. The game is
//! played separately at the token-id input, at the embedding output, and at
//! the hidden states of an encoder block; per-layer attributions are then summed
//! into one aggregated explanation. A token-level baseline, phrase-to-phrase
//! attention pooling, and report/SVG emitters round out the crate.

pub mod assets;
pub mod attention;
pub mod error;
pub mod model;
pub mod phrase;
pub mod report;
pub mod shap;
pub mod tokenizer;

pub use error::{Error, Result};
