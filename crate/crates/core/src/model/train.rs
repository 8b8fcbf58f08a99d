use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gradients, Model, ModelWeights, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn class(self) -> usize {
        match self {
            Label::Neg => NEGATIVE,
            Label::Pos => POSITIVE,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" => Ok(Label::Pos),
            "neg" | "negative" => Ok(Label::Neg),
            other => Err(Error::Parse {
                context: "corpus label".into(),
                message: format!("expected pos or neg, got {other:?}"),
            }),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Neg => "neg",
            Label::Pos => "pos",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub label: Label,
    pub text: String,
}

/// Parses `label<TAB>sentence` lines; blank lines and `#` comments are skipped.
pub fn load_corpus(source: &str) -> Result<Vec<LabeledSentence>> {
    let mut out = Vec::new();
    for (n, line) in source.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::Parse {
            context: format!("corpus line {}", n + 1),
            message: "expected label<TAB>sentence".into(),
        })?;
        let label = label.trim().parse().map_err(|e: Error| Error::Parse {
            context: format!("corpus line {}", n + 1),
            message: e.to_string(),
        })?;
        out.push(LabeledSentence {
            label,
            text: text.trim().to_string(),
        });
    }
    Ok(out)
}

/// A tokenized training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub label: Label,
}

pub fn tokenize_corpus(corpus: &[LabeledSentence], vocab: &Vocab) -> Result<Vec<Example>> {
    corpus
        .iter()
        .map(|s| {
            Ok(Example {
                ids: tokenize(&s.text, vocab)?.ids(),
                label: s.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 40,
            batch_size: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training cross-entropy of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Accuracy over the whole corpus after the final epoch.
    pub final_accuracy: f64,
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn loss_and_gradient(model: &Model, batch: &[Example]) -> Result<(f64, ModelWeights)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut grads: Gradients = ModelWeights::zeros(&model.config);
    let weight = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        total += model
            .accumulate_gradient(&ex.ids, ex.label.class(), weight, &mut grads)?
            .0;
    }
    Ok((total * weight, grads))
}

/// Mean cross-entropy over `batch`.
pub fn mean_loss(model: &Model, batch: &[Example]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let mut total = 0.0;
    for ex in batch {
        let trace = model.forward(&ex.ids)?;
        let p = super::forward::softmax(&trace.logits);
        total -= p[ex.label.class()].ln();
    }
    Ok(total / batch.len() as f64)
}

pub fn accuracy(model: &Model, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Input("empty corpus".into()));
    }
    let mut correct = 0usize;
    for ex in examples {
        let trace = model.forward(&ex.ids)?;
        let predicted = if trace.prob_positive > 0.5 {
            Label::Pos
        } else {
            Label::Neg
        };
        correct += usize::from(predicted == ex.label);
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Mini-batch gradient descent with momentum on cross-entropy. Batches are
/// reshuffled each epoch from a generator seeded with `config.seed`.
pub fn train_classifier(model: &Model, corpus: &[Example], config: &TrainConfig) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::Input("empty training corpus".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut model = model.clone();
    let mut velocity = ModelWeights::zeros(&model.config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| corpus[i].clone()).collect();
            let (loss, grads) = loss_and_gradient(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            for ((_, v), (_, g)) in velocity.named_mut().into_iter().zip(grads.named()) {
                v.zip_mut_with(g, |v, &g| *v = config.momentum * *v + g);
            }
            for ((_, w), (_, v)) in model.weights.named_mut().into_iter().zip(velocity.named()) {
                w.zip_mut_with(v, |w, &v| *w -= config.learning_rate * v);
            }
        }
        let mean = epoch_loss / corpus.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    let final_accuracy = accuracy(&model, corpus)?;
    Ok(TrainOutcome {
        model,
        epoch_losses,
        final_accuracy,
    })
}
