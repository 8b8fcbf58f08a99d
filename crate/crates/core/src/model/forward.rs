use ndarray::{s, Array2, ArrayView2, Axis};
use serde::Serialize;

use super::{Model, LN_EPS, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};

/// Every internal surface of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Token plus position embedding, `T×d_model`.
    pub embedding_out: Array2<f64>,
    /// Output of each block, `T×d_model`.
    pub hidden: Vec<Array2<f64>>,
    /// `[layer][head]` → `T×T` row-stochastic attention.
    pub attention: Vec<Vec<Array2<f64>>>,
    pub logits: Vec<f64>,
    pub prob_positive: f64,
}

impl ForwardTrace {
    pub fn log_odds_positive(&self) -> f64 {
        self.logits[POSITIVE] - self.logits[NEGATIVE]
    }

    pub fn len(&self) -> usize {
        self.embedding_out.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Logits {
    pub logits: [f64; 2],
    pub prob_positive: f64,
}

impl Logits {
    fn from_logits(logits: [f64; 2]) -> Self {
        Self {
            logits,
            prob_positive: softmax(&logits)[POSITIVE],
        }
    }

    pub fn log_odds_positive(&self) -> f64 {
        self.logits[POSITIVE] - self.logits[NEGATIVE]
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) struct NormCache {
    pub xhat: Array2<f64>,
    pub rstd: Vec<f64>,
    pub out: Array2<f64>,
}

pub(crate) fn layer_norm(x: &Array2<f64>, gain: &Array2<f64>, bias: &Array2<f64>) -> NormCache {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let r = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * r);
        rstd.push(r);
    }
    let out = &xhat * gain + bias;
    NormCache { xhat, rstd, out }
}

/// Intermediates of one block, kept for backpropagation.
pub(crate) struct BlockCache {
    pub attn_norm: NormCache,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub probs: Vec<Array2<f64>>,
    pub context: Array2<f64>,
    pub ff_norm: NormCache,
    pub ff_pre: Array2<f64>,
    pub ff_act: Array2<f64>,
}

impl Model {
    pub(crate) fn block(&self, layer: usize, x: &Array2<f64>) -> (Array2<f64>, BlockCache) {
        let w = &self.weights.layers[layer];
        let heads = self.config.n_heads;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        let attn_norm = layer_norm(x, &w.attn_norm_gain, &w.attn_norm_bias);
        let a = &attn_norm.out;
        let q = a.dot(&w.query) + &w.query_bias;
        let k = a.dot(&w.key) + &w.key_bias;
        let v = a.dot(&w.value) + &w.value_bias;

        let t = x.nrows();
        let mut context = Array2::zeros((t, self.config.d_model));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * hd..(h + 1) * hd];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for mut row in scores.rows_mut() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|z| (z - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|z| z / sum);
            }
            context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        let x1 = x + &(context.dot(&w.output) + &w.output_bias);

        let ff_norm = layer_norm(&x1, &w.ff_norm_gain, &w.ff_norm_bias);
        let ff_pre = ff_norm.out.dot(&w.ff_in) + &w.ff_in_bias;
        let ff_act = ff_pre.mapv(gelu);
        let out = &x1 + &(ff_act.dot(&w.ff_out) + &w.ff_out_bias);

        let cache = BlockCache {
            attn_norm,
            q,
            k,
            v,
            probs,
            context,
            ff_norm,
            ff_pre,
            ff_act,
        };
        (out, cache)
    }

    fn classify(&self, last: ArrayView2<f64>) -> Logits {
        let cls = last.row(0);
        let logits = cls.dot(&self.weights.classifier) + self.weights.classifier_bias.row(0);
        Logits::from_logits([logits[0], logits[1]])
    }

    fn check_len(&self, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::Input("empty sequence".into()));
        }
        if t > self.config.max_len {
            return Err(Error::Input(format!(
                "sequence of {t} tokens exceeds max_len {}",
                self.config.max_len
            )));
        }
        Ok(())
    }

    /// Token plus position embedding of `ids`.
    pub fn embed(&self, ids: &[usize]) -> Result<Array2<f64>> {
        self.check_len(ids.len())?;
        let d = self.config.d_model;
        let mut out = Array2::zeros((ids.len(), d));
        for (pos, &id) in ids.iter().enumerate() {
            if id >= self.config.vocab_size {
                return Err(Error::Input(format!(
                    "token id {id} outside vocabulary of {}",
                    self.config.vocab_size
                )));
            }
            let row = &self.weights.token_embeddings.row(id) + &self.weights.position_embeddings.row(pos);
            out.row_mut(pos).assign(&row);
        }
        Ok(out)
    }

    pub fn forward(&self, ids: &[usize]) -> Result<ForwardTrace> {
        let embedding = self.embed(ids)?;
        Ok(self.run_from_embeddings(embedding).0)
    }

    /// Forward pass with the embedding stage replaced by `embedding`.
    pub fn forward_from_embeddings(&self, embedding: &Array2<f64>) -> Result<ForwardTrace> {
        self.check_len(embedding.nrows())?;
        if embedding.ncols() != self.config.d_model {
            return Err(Error::Input(format!(
                "embedding override has {} columns, model width is {}",
                embedding.ncols(),
                self.config.d_model
            )));
        }
        Ok(self.run_from_embeddings(embedding.clone()).0)
    }

    pub(crate) fn run_from_embeddings(&self, embedding: Array2<f64>) -> (ForwardTrace, Vec<BlockCache>) {
        let mut hidden = Vec::with_capacity(self.config.n_layers);
        let mut attention = Vec::with_capacity(self.config.n_layers);
        let mut caches = Vec::with_capacity(self.config.n_layers);
        let mut x = embedding.clone();
        for layer in 0..self.config.n_layers {
            let (out, cache) = self.block(layer, &x);
            attention.push(cache.probs.clone());
            caches.push(cache);
            hidden.push(out.clone());
            x = out;
        }
        let logits = self.classify(x.view());
        let trace = ForwardTrace {
            embedding_out: embedding,
            hidden,
            attention,
            logits: logits.logits.to_vec(),
            prob_positive: logits.prob_positive,
        };
        (trace, caches)
    }

    /// Resumes computation from `hidden`, taken as the output of block `layer`,
    /// through the remaining blocks and the classifier.
    pub fn forward_with_hidden_override(&self, layer: usize, hidden: &Array2<f64>) -> Result<Logits> {
        if layer >= self.config.n_layers {
            return Err(Error::Input(format!(
                "layer {layer} out of range for a {}-layer model",
                self.config.n_layers
            )));
        }
        self.check_len(hidden.nrows())?;
        if hidden.ncols() != self.config.d_model {
            return Err(Error::Input(format!(
                "hidden override has {} columns, model width is {}",
                hidden.ncols(),
                self.config.d_model
            )));
        }
        let mut x = hidden.clone();
        for l in layer + 1..self.config.n_layers {
            x = self.block(l, &x).0;
        }
        Ok(self.classify(x.view()))
    }
}

/// Sum of each attention row minus one, worst case over the whole trace.
pub fn max_attention_row_error(trace: &ForwardTrace) -> f64 {
    trace
        .attention
        .iter()
        .flatten()
        .flat_map(|a| a.sum_axis(Axis(1)).into_iter())
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}
