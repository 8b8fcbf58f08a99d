use serde::{Deserialize, Serialize};

use super::exact::exact_shapley;
use super::game::Game;
use super::kernel::{kernel_shap, Sampling};
use super::value::{phrase_token_sets, EncoderBaseline, ExplainedOutput, LayerTarget, MaskingGame, ValueFunction};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::phrase::{extract_phrases, Lexicon, PhraseSet};
use crate::tokenizer::{tokenize, TokenSequence, Vocab};

/// Hard ceiling on `exact_threshold`.
pub const MAX_EXACT_THRESHOLD: usize = 20;

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Exact enumeration up to the threshold, sampled kernel regression above it.
    #[default]
    Auto,
    /// Exact enumeration; games above the threshold are an error.
    Exact,
    /// Kernel regression; full enumeration of coalitions up to the threshold,
    /// sampling above it.
    Kernel,
}

/// Estimator that actually produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Exact,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub exact_threshold: usize,
    pub kernel_samples: usize,
    pub ridge: f64,
    pub seed: u64,
    /// `None` means embedding plus the last encoder block.
    pub layer_targets: Option<Vec<LayerTarget>>,
    pub method: MethodChoice,
    pub output: ExplainedOutput,
    pub encoder_baseline: EncoderBaseline,
    /// Also run the per-phrase word sub-games.
    pub word_level: bool,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            exact_threshold: 12,
            kernel_samples: 2048,
            ridge: 1e-6,
            seed: 42,
            layer_targets: None,
            method: MethodChoice::Auto,
            output: ExplainedOutput::LogOddsPositive,
            encoder_baseline: EncoderBaseline::Reference,
            word_level: true,
        }
    }
}

impl ExplainerConfig {
    pub fn targets_for(&self, model: &Model) -> Result<Vec<LayerTarget>> {
        let targets = match &self.layer_targets {
            Some(t) => t.clone(),
            None => vec![LayerTarget::Embedding, LayerTarget::Encoder(model.config.n_layers - 1)],
        };
        if targets.is_empty() {
            return Err(Error::Config("no layer targets configured".into()));
        }
        for t in &targets {
            t.validate(model.config.n_layers)?;
        }
        Ok(targets)
    }

    pub fn validate(&self) -> Result<()> {
        if self.exact_threshold > MAX_EXACT_THRESHOLD {
            return Err(Error::Config(format!(
                "exact_threshold {} exceeds {MAX_EXACT_THRESHOLD}",
                self.exact_threshold
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config(format!(
                "ridge must be a finite non-negative number, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Attributions of one game plus its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub v_empty: f64,
    pub v_full: f64,
    pub method: Method,
    /// Kernel draws; zero for exact enumeration and full-enumeration regression.
    pub samples: usize,
}

impl Attribution {
    /// `|sum(values) - (v_full - v_empty)|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.values.iter().sum::<f64>() - (self.v_full - self.v_empty)).abs()
    }
}

/// Runs the configured estimator on `game`.
pub fn shapley(game: &dyn Game, config: &ExplainerConfig) -> Result<Attribution> {
    let m = game.players();
    if m == 0 {
        return Err(Error::Degenerate("game with no players".into()));
    }
    let small = m <= config.exact_threshold;
    let use_exact = match config.method {
        MethodChoice::Exact => true,
        MethodChoice::Auto => small || m < 2,
        MethodChoice::Kernel => m < 2,
    };
    if use_exact {
        let values = exact_shapley(game, config.exact_threshold)?;
        let v_empty = game.value(super::Coalition::EMPTY)?;
        let v_full = game.value(super::Coalition::full(m))?;
        return Ok(Attribution {
            values,
            v_empty,
            v_full,
            method: Method::Exact,
            samples: 0,
        });
    }
    let sampling = if small {
        Sampling::Enumerate
    } else {
        Sampling::Sample {
            samples: config.kernel_samples,
            seed: config.seed,
        }
    };
    let out = kernel_shap(game, sampling, config.ridge)?;
    Ok(Attribution {
        values: out.values,
        v_empty: out.v_empty,
        v_full: out.v_full,
        method: Method::Kernel,
        samples: out.diagnostics.samples,
    })
}

/// `Φ(p) = Σ_j φ(w_j)` over the words of one phrase.
pub fn aggregate_phrase(word_values: &[f64]) -> f64 {
    word_values.iter().sum()
}

/// Elementwise sum of per-layer attribution vectors, in the given order.
pub fn aggregate_layers(per_layer: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = per_layer.first() else {
        return Err(Error::Input("no layer vectors to aggregate".into()));
    };
    let m = first.len();
    let mut out = vec![0.0; m];
    for (l, values) in per_layer.iter().enumerate() {
        if values.len() != m {
            return Err(Error::Input(format!(
                "layer vector {l} has length {}, expected {m}",
                values.len()
            )));
        }
        for (acc, v) in out.iter_mut().zip(values.iter()) {
            *acc += v;
        }
    }
    Ok(out)
}

/// Word sub-game of one phrase: its words are the players, every other token
/// stays present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAttribution {
    pub phrase: usize,
    pub words: Vec<String>,
    pub attribution: Attribution,
    /// `Φ(p)`, the sum of the word values.
    pub phrase_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAttribution {
    pub target: LayerTarget,
    pub attribution: Attribution,
    pub words: Vec<WordAttribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapResult {
    pub sentence: String,
    pub tokens: TokenSequence,
    pub phrases: PhraseSet,
    pub layers: Vec<LayerAttribution>,
    /// Sum of the per-layer phrase vectors.
    pub aggregated: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub samples: usize,
    pub output: ExplainedOutput,
}

impl ShapResult {
    pub fn layer(&self, target: LayerTarget) -> Option<&LayerAttribution> {
        self.layers.iter().find(|l| l.target == target)
    }
}

/// Token-level attributions over individual (sub)word tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub sentence: String,
    pub tokens: TokenSequence,
    /// Token positions of the players, in order.
    pub positions: Vec<usize>,
    pub labels: Vec<String>,
    pub attribution: Attribution,
}

/// Everything needed to play games over one tokenized sentence.
pub struct SentenceContext<'a> {
    pub model: &'a Model,
    pub pad_id: usize,
    pub tokens: TokenSequence,
    pub phrases: PhraseSet,
    pub phrase_tokens: Vec<Vec<usize>>,
}

impl<'a> SentenceContext<'a> {
    pub fn new(model: &'a Model, vocab: &Vocab, phrases: PhraseSet) -> Result<Self> {
        let tokens = tokenize(&phrases.sentence, vocab)?;
        let phrase_tokens = phrase_token_sets(&phrases, &tokens)?;
        Ok(Self {
            model,
            pad_id: vocab.pad_id,
            tokens,
            phrases,
            phrase_tokens,
        })
    }

    /// Value function whose fully-masked reference pads every token in `players`.
    pub fn value_function(
        &self,
        target: LayerTarget,
        players: &[Vec<usize>],
        config: &ExplainerConfig,
    ) -> Result<ValueFunction<'a>> {
        let mut maskable: Vec<usize> = players.iter().flatten().copied().collect();
        maskable.sort_unstable();
        maskable.dedup();
        ValueFunction::new(
            self.model,
            &self.tokens.ids(),
            self.pad_id,
            target,
            config.output,
            &maskable,
            config.encoder_baseline,
        )
    }

    /// Shapley values of the phrase game at one layer target.
    pub fn phrase_shap(&self, target: LayerTarget, config: &ExplainerConfig) -> Result<Attribution> {
        let vf = self.value_function(target, &self.phrase_tokens, config)?;
        let game = MaskingGame::new(&vf, self.phrase_tokens.clone())?;
        shapley(&game, config)
    }

    /// Token spans of the words of phrase `index`.
    pub fn word_players(&self, index: usize) -> Result<Vec<Vec<usize>>> {
        let phrase = self
            .phrases
            .phrases
            .get(index)
            .ok_or_else(|| Error::Bounds(format!("phrase {index} of {}", self.phrases.len())))?;
        (phrase.word_start..=phrase.word_end)
            .map(|w| {
                let (s, e) = self.tokens.tokens_for_word_range(w, w)?;
                Ok((s..=e).collect())
            })
            .collect()
    }

    /// Shapley values of the words of phrase `index` with all other tokens present.
    pub fn word_level_shap(
        &self,
        target: LayerTarget,
        index: usize,
        config: &ExplainerConfig,
    ) -> Result<WordAttribution> {
        let players = self.word_players(index)?;
        let vf = self.value_function(target, &players, config)?;
        let game = MaskingGame::new(&vf, players)?;
        let attribution = shapley(&game, config)?;
        let phrase = &self.phrases.phrases[index];
        Ok(WordAttribution {
            phrase: index,
            words: self.phrases.words[phrase.word_start..=phrase.word_end].to_vec(),
            phrase_total: aggregate_phrase(&attribution.values),
            attribution,
        })
    }
}

/// End-to-end explainer over a fixed model, vocabulary and lexicon.
pub struct Explainer<'a> {
    pub model: &'a Model,
    pub vocab: &'a Vocab,
    pub lexicon: &'a Lexicon,
    pub config: ExplainerConfig,
}

impl<'a> Explainer<'a> {
    pub fn new(model: &'a Model, vocab: &'a Vocab, lexicon: &'a Lexicon, config: ExplainerConfig) -> Result<Self> {
        config.validate()?;
        if vocab.len() != model.config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} entries but the model expects {}",
                vocab.len(),
                model.config.vocab_size
            )));
        }
        Ok(Self {
            model,
            vocab,
            lexicon,
            config,
        })
    }

    pub fn phrases(&self, text: &str) -> Result<PhraseSet> {
        extract_phrases(text, self.lexicon)
    }

    /// Explains `text` using the built-in chunker.
    pub fn explain(&self, text: &str) -> Result<ShapResult> {
        self.explain_phrases(self.phrases(text)?)
    }

    /// Explains with a caller-supplied phrase set.
    pub fn explain_phrases(&self, phrases: PhraseSet) -> Result<ShapResult> {
        if phrases.is_empty() {
            return Err(Error::Degenerate("sentence has no phrases".into()));
        }
        let targets = self.config.targets_for(self.model)?;
        let ctx = SentenceContext::new(self.model, self.vocab, phrases)?;
        let mut layers = Vec::with_capacity(targets.len());
        for &target in &targets {
            let attribution = ctx.phrase_shap(target, &self.config)?;
            let words = if self.config.word_level {
                (0..ctx.phrases.len())
                    .map(|i| ctx.word_level_shap(target, i, &self.config))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            layers.push(LayerAttribution {
                target,
                attribution,
                words,
            });
        }
        let vectors: Vec<&[f64]> = layers.iter().map(|l| l.attribution.values.as_slice()).collect();
        let aggregated = aggregate_layers(&vectors)?;
        let method = layers[0].attribution.method;
        let samples = layers[0].attribution.samples;
        Ok(ShapResult {
            sentence: ctx.phrases.sentence.clone(),
            tokens: ctx.tokens,
            phrases: ctx.phrases,
            layers,
            aggregated,
            method,
            seed: self.config.seed,
            samples,
            output: self.config.output,
        })
    }

    /// Token-level baseline: every non-special token is a player, masked at the input.
    pub fn baseline(&self, text: &str) -> Result<BaselineResult> {
        let tokens = tokenize(text, self.vocab)?;
        let positions: Vec<usize> = tokens.content_range().collect();
        let players: Vec<Vec<usize>> = positions.iter().map(|&p| vec![p]).collect();
        let mut maskable = positions.clone();
        maskable.dedup();
        let vf = ValueFunction::new(
            self.model,
            &tokens.ids(),
            self.vocab.pad_id,
            LayerTarget::Input,
            self.config.output,
            &maskable,
            self.config.encoder_baseline,
        )?;
        let game = MaskingGame::new(&vf, players)?;
        let attribution = shapley(&game, &self.config)?;
        let labels = positions.iter().map(|&p| tokens.tokens[p].text.clone()).collect();
        Ok(BaselineResult {
            sentence: text.to_string(),
            tokens,
            positions,
            labels,
            attribution,
        })
    }
}
