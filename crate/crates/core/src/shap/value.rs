//! Value functions: the model's positive-class score with some tokens masked,
//! where "masked" is realized at a chosen layer.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::game::{Coalition, Game, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::model::{ForwardTrace, Model};
use crate::phrase::PhraseSet;
use crate::tokenizer::TokenSequence;

/// Where absence is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerTarget {
    /// Masked token ids are replaced by `[PAD]`.
    Input,
    /// Masked rows of the embedding output are replaced by the `[PAD]`
    /// embedding at the same position.
    Embedding,
    /// Masked rows of the output of encoder block `l` are replaced by a
    /// baseline hidden state.
    Encoder(usize),
}

impl LayerTarget {
    /// Embedding followed by every encoder block, in depth order.
    pub fn all(n_layers: usize) -> Vec<LayerTarget> {
        std::iter::once(LayerTarget::Embedding)
            .chain((0..n_layers).map(LayerTarget::Encoder))
            .collect()
    }

    pub fn validate(self, n_layers: usize) -> Result<()> {
        match self {
            LayerTarget::Encoder(l) if l >= n_layers => Err(Error::Config(format!(
                "encoder target {l} out of range for a {n_layers}-layer model"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LayerTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerTarget::Input => f.write_str("input"),
            LayerTarget::Embedding => f.write_str("embedding"),
            LayerTarget::Encoder(l) => write!(f, "encoder-{l}"),
        }
    }
}

impl FromStr for LayerTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(LayerTarget::Input),
            "embedding" => Ok(LayerTarget::Embedding),
            _ => s
                .strip_prefix("encoder-")
                .and_then(|l| l.parse().ok())
                .map(LayerTarget::Encoder)
                .ok_or_else(|| Error::Parse {
                    context: "layer target".into(),
                    message: format!("expected input, embedding or encoder-<n>, got {s:?}"),
                }),
        }
    }
}

impl Serialize for LayerTarget {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LayerTarget {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scalar read off the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainedOutput {
    #[default]
    LogOddsPositive,
    ProbPositive,
}

impl ExplainedOutput {
    fn read(self, logits: &[f64], prob_positive: f64) -> f64 {
        match self {
            ExplainedOutput::LogOddsPositive => logits[crate::model::POSITIVE] - logits[crate::model::NEGATIVE],
            ExplainedOutput::ProbPositive => prob_positive,
        }
    }
}

impl FromStr for ExplainedOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log-odds" | "log_odds_positive" => Ok(ExplainedOutput::LogOddsPositive),
            "prob" | "prob_positive" => Ok(ExplainedOutput::ProbPositive),
            other => Err(Error::Parse {
                context: "explained output".into(),
                message: format!("expected log-odds or prob, got {other:?}"),
            }),
        }
    }
}

/// Replacement rows for masked positions at an encoder target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderBaseline {
    /// Hidden states of the same sentence with every maskable token padded.
    #[default]
    Reference,
    Zero,
}

/// Set of masked token positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenMask(Vec<bool>);

impl TokenMask {
    pub fn none(len: usize) -> Self {
        TokenMask(vec![false; len])
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = vec![false; len];
        for i in indices {
            mask[i] = true;
        }
        TokenMask(mask)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.get(index).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|m| **m).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Token positions covered by each phrase, `[CLS]`/`[SEP]` never included.
pub fn phrase_token_sets(phrases: &PhraseSet, seq: &TokenSequence) -> Result<Vec<Vec<usize>>> {
    if phrases.words != seq.words {
        return Err(Error::Input(
            "phrase set and token sequence come from different sentences".into(),
        ));
    }
    phrases
        .phrases
        .iter()
        .map(|p| {
            let (start, end) = seq.tokens_for_word_range(p.word_start, p.word_end)?;
            Ok((start..=end).collect())
        })
        .collect()
}

/// Tokens to mask for `coalition`: those of absent players, minus those of
/// present players. Tokens outside every player are never masked.
pub fn token_mask_of(coalition: Coalition, players: &[Vec<usize>], len: usize) -> TokenMask {
    let mut absent = vec![false; len];
    let mut present = vec![false; len];
    for (i, tokens) in players.iter().enumerate() {
        let side = if coalition.contains(i) {
            &mut present
        } else {
            &mut absent
        };
        for &t in tokens {
            side[t] = true;
        }
    }
    TokenMask(absent.into_iter().zip(present).map(|(a, p)| a && !p).collect())
}

/// Model output as a function of which tokens are masked, at one layer target.
pub struct ValueFunction<'a> {
    model: &'a Model,
    ids: Vec<usize>,
    pad_id: usize,
    target: LayerTarget,
    output: ExplainedOutput,
    base: ForwardTrace,
    /// Replacement rows for the encoder target.
    replacement: Option<Array2<f64>>,
    cache: Option<Mutex<HashMap<TokenMask, f64>>>,
}

impl<'a> ValueFunction<'a> {
    /// `maskable` lists every position some player can mask; it fixes the
    /// fully-masked reference input used by encoder targets.
    pub fn new(
        model: &'a Model,
        ids: &[usize],
        pad_id: usize,
        target: LayerTarget,
        output: ExplainedOutput,
        maskable: &[usize],
        baseline: EncoderBaseline,
    ) -> Result<Self> {
        target.validate(model.config.n_layers)?;
        if pad_id >= model.config.vocab_size {
            return Err(Error::Input(format!("pad id {pad_id} outside the model vocabulary")));
        }
        let base = model.forward(ids)?;
        let replacement = match (target, baseline) {
            (LayerTarget::Encoder(_), EncoderBaseline::Zero) => Some(Array2::zeros((ids.len(), model.config.d_model))),
            (LayerTarget::Encoder(l), EncoderBaseline::Reference) => {
                let mut padded = ids.to_vec();
                for &t in maskable {
                    padded[t] = pad_id;
                }
                Some(model.forward(&padded)?.hidden[l].clone())
            }
            _ => None,
        };
        Ok(Self {
            model,
            ids: ids.to_vec(),
            pad_id,
            target,
            output,
            base,
            replacement,
            cache: Some(Mutex::new(HashMap::new())),
        })
    }

    /// Disables memoization; every evaluation runs the model.
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn target(&self) -> LayerTarget {
        self.target
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Unperturbed trace of the sentence.
    pub fn base_trace(&self) -> &ForwardTrace {
        &self.base
    }

    pub fn evaluate_mask(&self, mask: &TokenMask) -> Result<f64> {
        if mask.len() != self.ids.len() {
            return Err(Error::Input(format!(
                "mask over {} tokens for a {}-token sentence",
                mask.len(),
                self.ids.len()
            )));
        }
        if let Some(cache) = &self.cache {
            if let Some(&v) = cache.lock().get(mask) {
                return Ok(v);
            }
        }
        let value = self.compute(mask)?;
        if let Some(cache) = &self.cache {
            cache.lock().insert(mask.clone(), value);
        }
        Ok(value)
    }

    fn compute(&self, mask: &TokenMask) -> Result<f64> {
        let model = self.model;
        if mask.count() == 0 {
            return Ok(self.output.read(&self.base.logits, self.base.prob_positive));
        }
        match self.target {
            LayerTarget::Input => {
                let ids: Vec<usize> = self
                    .ids
                    .iter()
                    .enumerate()
                    .map(|(i, &id)| if mask.contains(i) { self.pad_id } else { id })
                    .collect();
                let trace = model.forward(&ids)?;
                Ok(self.output.read(&trace.logits, trace.prob_positive))
            }
            LayerTarget::Embedding => {
                let mut embedding = self.base.embedding_out.clone();
                let pad = model.weights.token_embeddings.row(self.pad_id);
                for i in mask.indices() {
                    let row = &pad + &model.weights.position_embeddings.row(i);
                    embedding.row_mut(i).assign(&row);
                }
                let trace = model.forward_from_embeddings(&embedding)?;
                Ok(self.output.read(&trace.logits, trace.prob_positive))
            }
            LayerTarget::Encoder(l) => {
                let replacement = self.replacement.as_ref().expect("encoder replacement built in new");
                let mut hidden = self.base.hidden[l].clone();
                for i in mask.indices() {
                    hidden.row_mut(i).assign(&replacement.row(i));
                }
                let out = model.forward_with_hidden_override(l, &hidden)?;
                Ok(self.output.read(&out.logits, out.prob_positive))
            }
        }
    }
}

/// Coalition game whose players are token sets, valued through a
/// [`ValueFunction`]. Overlaps resolve in favor of presence.
pub struct MaskingGame<'v, 'a> {
    value_function: &'v ValueFunction<'a>,
    players: Vec<Vec<usize>>,
}

impl<'v, 'a> MaskingGame<'v, 'a> {
    pub fn new(value_function: &'v ValueFunction<'a>, players: Vec<Vec<usize>>) -> Result<Self> {
        if players.len() > MAX_PLAYERS {
            return Err(Error::Capacity {
                players: players.len(),
                limit: MAX_PLAYERS,
            });
        }
        let len = value_function.len();
        for tokens in &players {
            if let Some(&t) = tokens.iter().find(|&&t| t == 0 || t + 1 >= len) {
                return Err(Error::Bounds(format!(
                    "player token {t} is outside the maskable range 1..={}",
                    len.saturating_sub(2)
                )));
            }
        }
        Ok(Self {
            value_function,
            players,
        })
    }

    pub fn mask(&self, coalition: Coalition) -> TokenMask {
        token_mask_of(coalition, &self.players, self.value_function.len())
    }

    pub fn player_tokens(&self) -> &[Vec<usize>] {
        &self.players
    }
}

impl Game for MaskingGame<'_, '_> {
    fn players(&self) -> usize {
        self.players.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        self.value_function.evaluate_mask(&self.mask(coalition))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_names_round_trip() {
        for t in [LayerTarget::Input, LayerTarget::Embedding, LayerTarget::Encoder(3)] {
            assert_eq!(t.to_string().parse::<LayerTarget>().unwrap(), t);
        }
        assert!("decoder-0".parse::<LayerTarget>().is_err());
    }

    #[test]
    fn full_coalition_masks_nothing() {
        let players = vec![vec![1, 2, 3], vec![2, 3]];
        assert_eq!(token_mask_of(Coalition::full(2), &players, 5).count(), 0);
    }

    #[test]
    fn present_container_protects_nested_phrase() {
        // "forget the movie" present, "the movie" absent.
        let players = vec![vec![5, 6, 7], vec![6, 7]];
        let mask = token_mask_of(Coalition::from_members([0]), &players, 10);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn absent_phrase_without_cover_is_masked() {
        let players = vec![vec![1, 2, 3, 4, 5, 6, 7, 8], vec![2, 3], vec![5, 6, 7], vec![6, 7]];
        let mask = token_mask_of(Coalition::from_members([1, 3]), &players, 10);
        let masked: Vec<usize> = mask.indices().collect();
        assert_eq!(masked, vec![1, 4, 5, 8]);
    }
}
