//! A small, fully instrumented transformer encoder sentiment classifier.
//!
//! Pre-norm blocks (attention then feed-forward, each with a residual), learned
//! absolute positions, and a linear classifier over the `[CLS]` row of the last
//! block. Every intermediate the explainer intervenes on is exposed through
//! [`ForwardTrace`], and the embedding and hidden-state stages can be replaced
//! wholesale. All arithmetic is `f64`.

mod backward;
mod forward;
mod io;
mod train;

pub use forward::{max_attention_row_error, ForwardTrace, Logits};
pub use io::{load_weights, save_weights};
pub use train::{
    accuracy, load_corpus, loss_and_gradient, mean_loss, tokenize_corpus, train_classifier, Example, Label,
    LabeledSentence, TrainConfig, TrainOutcome,
};

pub(crate) use backward::Gradients;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the positive class in the logits.
pub const POSITIVE: usize = 1;
/// Index of the negative class in the logits.
pub const NEGATIVE: usize = 0;

pub(crate) const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub n_classes: usize,
}

impl ModelConfig {
    /// Default architecture for a vocabulary of the given size.
    pub fn with_vocab(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 32,
            n_heads: 4,
            n_layers: 2,
            d_ff: 64,
            max_len: 64,
            n_classes: 2,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_classes != 2 {
            return Err(Error::Config(format!(
                "n_classes must be 2 (negative, positive), got {}",
                self.n_classes
            )));
        }
        Ok(())
    }
}

/// Parameters of one pre-norm encoder block. Biases and norm parameters are `1×n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_norm_gain: Array2<f64>,
    pub attn_norm_bias: Array2<f64>,
    pub query: Array2<f64>,
    pub query_bias: Array2<f64>,
    pub key: Array2<f64>,
    pub key_bias: Array2<f64>,
    pub value: Array2<f64>,
    pub value_bias: Array2<f64>,
    pub output: Array2<f64>,
    pub output_bias: Array2<f64>,
    pub ff_norm_gain: Array2<f64>,
    pub ff_norm_bias: Array2<f64>,
    pub ff_in: Array2<f64>,
    pub ff_in_bias: Array2<f64>,
    pub ff_out: Array2<f64>,
    pub ff_out_bias: Array2<f64>,
}

const LAYER_PARAMS: [&str; 16] = [
    "attn_norm.gain",
    "attn_norm.bias",
    "attn.query",
    "attn.query_bias",
    "attn.key",
    "attn.key_bias",
    "attn.value",
    "attn.value_bias",
    "attn.output",
    "attn.output_bias",
    "ff_norm.gain",
    "ff_norm.bias",
    "ff.in",
    "ff.in_bias",
    "ff.out",
    "ff.out_bias",
];

impl LayerWeights {
    fn tensors(&self) -> [&Array2<f64>; 16] {
        [
            &self.attn_norm_gain,
            &self.attn_norm_bias,
            &self.query,
            &self.query_bias,
            &self.key,
            &self.key_bias,
            &self.value,
            &self.value_bias,
            &self.output,
            &self.output_bias,
            &self.ff_norm_gain,
            &self.ff_norm_bias,
            &self.ff_in,
            &self.ff_in_bias,
            &self.ff_out,
            &self.ff_out_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Array2<f64>; 16] {
        [
            &mut self.attn_norm_gain,
            &mut self.attn_norm_bias,
            &mut self.query,
            &mut self.query_bias,
            &mut self.key,
            &mut self.key_bias,
            &mut self.value,
            &mut self.value_bias,
            &mut self.output,
            &mut self.output_bias,
            &mut self.ff_norm_gain,
            &mut self.ff_norm_bias,
            &mut self.ff_in,
            &mut self.ff_in_bias,
            &mut self.ff_out,
            &mut self.ff_out_bias,
        ]
    }

    fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let ff = config.d_ff;
        let z = |r, c| Array2::zeros((r, c));
        Self {
            attn_norm_gain: z(1, d),
            attn_norm_bias: z(1, d),
            query: z(d, d),
            query_bias: z(1, d),
            key: z(d, d),
            key_bias: z(1, d),
            value: z(d, d),
            value_bias: z(1, d),
            output: z(d, d),
            output_bias: z(1, d),
            ff_norm_gain: z(1, d),
            ff_norm_bias: z(1, d),
            ff_in: z(d, ff),
            ff_in_bias: z(1, ff),
            ff_out: z(ff, d),
            ff_out_bias: z(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub token_embeddings: Array2<f64>,
    pub position_embeddings: Array2<f64>,
    pub layers: Vec<LayerWeights>,
    pub classifier: Array2<f64>,
    pub classifier_bias: Array2<f64>,
}

impl ModelWeights {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            token_embeddings: Array2::zeros((config.vocab_size, config.d_model)),
            position_embeddings: Array2::zeros((config.max_len, config.d_model)),
            layers: (0..config.n_layers).map(|_| LayerWeights::zeros(config)).collect(),
            classifier: Array2::zeros((config.d_model, config.n_classes)),
            classifier_bias: Array2::zeros((1, config.n_classes)),
        }
    }

    /// Every parameter tensor with its canonical name, in serialization order.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("token_embeddings".to_string(), &self.token_embeddings),
            ("position_embeddings".to_string(), &self.position_embeddings),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in LAYER_PARAMS.iter().zip(layer.tensors()) {
                out.push((format!("layers.{l}.{name}"), tensor));
            }
        }
        out.push(("classifier.weight".to_string(), &self.classifier));
        out.push(("classifier.bias".to_string(), &self.classifier_bias));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = vec![
            ("token_embeddings".to_string(), &mut self.token_embeddings),
            ("position_embeddings".to_string(), &mut self.position_embeddings),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, tensor) in LAYER_PARAMS.iter().zip(layer.tensors_mut()) {
                out.push((format!("layers.{l}.{name}"), tensor));
            }
        }
        out.push(("classifier.weight".to_string(), &mut self.classifier));
        out.push(("classifier.bias".to_string(), &mut self.classifier_bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Configuration plus weights; the unit every inference and training call works on.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub weights: ModelWeights,
}

impl Model {
    /// Deterministic initialization: uniform(-1, 1) scaled by `1/sqrt(fan_in)`,
    /// norm gains 1, biases 0.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = ModelWeights::zeros(&config);
        for (name, tensor) in weights.named_mut() {
            if name.ends_with(".gain") {
                tensor.fill(1.0);
            } else if name.ends_with("bias") {
                continue;
            } else {
                // Embedding tables are looked up, not multiplied: scale by their width.
                let fan_in = if name.ends_with("embeddings") {
                    tensor.ncols()
                } else {
                    tensor.nrows()
                };
                let scale = 1.0 / (fan_in as f64).sqrt();
                tensor.mapv_inplace(|_| rng.gen_range(-1.0..1.0) * scale);
            }
        }
        Ok(Self { config, weights })
    }

    /// Validates weight shapes against the config.
    pub fn new(config: ModelConfig, weights: ModelWeights) -> Result<Self> {
        config.validate()?;
        let expected = ModelWeights::zeros(&config);
        let expected = expected.named();
        let actual = weights.named();
        if expected.len() != actual.len() {
            return Err(Error::format(
                "layers",
                format!("expected {} parameter tensors, found {}", expected.len(), actual.len()),
            ));
        }
        for ((name, e), (_, a)) in expected.iter().zip(&actual) {
            if e.dim() != a.dim() {
                return Err(Error::format(
                    name.clone(),
                    format!("shape {:?} does not match config shape {:?}", a.dim(), e.dim()),
                ));
            }
        }
        if !weights.all_finite() {
            return Err(Error::format("weights", "non-finite parameter"));
        }
        Ok(Self { config, weights })
    }
}
