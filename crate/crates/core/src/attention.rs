//! Phrase-to-phrase attention: token attention pooled over phrase spans.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardTrace, Model};
use crate::phrase::PhraseSet;
use crate::shap::phrase_token_sets;
use crate::tokenizer::{tokenize, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelection {
    #[default]
    Last,
    MeanAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadReduction {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttentionAggregationConfig {
    pub layers: LayerSelection,
    pub heads: HeadReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseAttentionMatrix {
    /// `scores[p][q]`: attention from phrase `p` to phrase `q`.
    pub scores: Vec<Vec<f64>>,
    /// Phrase text per index, in phrase-set order.
    pub labels: Vec<String>,
    pub config: AttentionAggregationConfig,
}

impl PhraseAttentionMatrix {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Collapses heads and layers of the trace into one `T×T` matrix.
pub fn reduce_attention(trace: &ForwardTrace, config: &AttentionAggregationConfig) -> Result<Array2<f64>> {
    let reduce_heads = |heads: &[Array2<f64>]| -> Array2<f64> {
        let mut acc = heads[0].clone();
        for h in &heads[1..] {
            match config.heads {
                HeadReduction::Mean => acc += h,
                HeadReduction::Max => acc.zip_mut_with(h, |a, &b| *a = a.max(b)),
            }
        }
        if config.heads == HeadReduction::Mean {
            acc /= heads.len() as f64;
        }
        acc
    };
    let last = trace
        .attention
        .last()
        .ok_or_else(|| Error::Input("trace has no attention layers".into()))?;
    Ok(match config.layers {
        LayerSelection::Last => reduce_heads(last),
        LayerSelection::MeanAll => {
            let mut acc = reduce_heads(&trace.attention[0]);
            for layer in &trace.attention[1..] {
                acc += &reduce_heads(layer);
            }
            if trace.attention.len() > 1 {
                acc /= trace.attention.len() as f64;
            }
            acc
        }
    })
}

/// `score[p][q] = (1/|p|) Σ_{i∈p} Σ_{j∈q} A[i][j]` over token positions of
/// each phrase.
pub fn phrase_attention(
    trace: &ForwardTrace,
    phrase_tokens: &[Vec<usize>],
    labels: &[String],
    config: &AttentionAggregationConfig,
) -> Result<PhraseAttentionMatrix> {
    if phrase_tokens.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} phrase spans but {} labels",
            phrase_tokens.len(),
            labels.len()
        )));
    }
    let a = reduce_attention(trace, config)?;
    let t = a.nrows();
    for (p, tokens) in phrase_tokens.iter().enumerate() {
        if tokens.is_empty() {
            return Err(Error::Input(format!("phrase {p} covers no tokens")));
        }
        if let Some(&bad) = tokens.iter().find(|&&i| i >= t) {
            return Err(Error::Input(format!(
                "phrase {p} refers to token {bad} of a {t}-token trace"
            )));
        }
    }
    let scores = phrase_tokens
        .iter()
        .map(|source| {
            phrase_tokens
                .iter()
                .map(|target| {
                    let total: f64 = source
                        .iter()
                        .map(|&i| target.iter().map(|&j| a[[i, j]]).sum::<f64>())
                        .sum();
                    total / source.len() as f64
                })
                .collect()
        })
        .collect();
    Ok(PhraseAttentionMatrix {
        scores,
        labels: labels.to_vec(),
        config: *config,
    })
}

/// Tokenizes the phrase set's sentence, runs one forward pass, and pools its
/// attention over the phrases.
pub fn sentence_attention(
    model: &Model,
    vocab: &Vocab,
    phrases: &PhraseSet,
    config: &AttentionAggregationConfig,
) -> Result<PhraseAttentionMatrix> {
    let tokens = tokenize(&phrases.sentence, vocab)?;
    let spans = phrase_token_sets(phrases, &tokens)?;
    let trace = model.forward(&tokens.ids())?;
    let labels: Vec<String> = phrases.phrases.iter().map(|p| p.text.clone()).collect();
    phrase_attention(&trace, &spans, &labels, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_trace(t: usize, layers: usize, heads: usize) -> ForwardTrace {
        let a = Array2::from_elem((t, t), 1.0 / t as f64);
        ForwardTrace {
            embedding_out: Array2::zeros((t, 2)),
            hidden: vec![Array2::zeros((t, 2)); layers],
            attention: vec![vec![a; heads]; layers],
            logits: vec![0.0, 0.0],
            prob_positive: 0.5,
        }
    }

    #[test]
    fn single_phrase_over_uniform_rows() {
        let t = 6;
        let trace = uniform_trace(t, 1, 2);
        let m = phrase_attention(&trace, &[vec![1, 2, 3, 4]], &["all".into()], &Default::default()).unwrap();
        assert!((m.scores[0][0] - (t - 2) as f64 / t as f64).abs() < 1e-15);
    }

    #[test]
    fn uniform_rows_give_target_size_over_length() {
        let t = 7;
        let trace = uniform_trace(t, 2, 3);
        let spans = vec![vec![1, 2], vec![3], vec![2, 3, 4, 5]];
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let m = phrase_attention(&trace, &spans, &labels, &Default::default()).unwrap();
        for row in &m.scores {
            for (q, &s) in row.iter().enumerate() {
                assert!((s - spans[q].len() as f64 / t as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn span_outside_trace_is_rejected() {
        let trace = uniform_trace(4, 1, 1);
        assert!(phrase_attention(&trace, &[vec![5]], &["x".into()], &Default::default()).is_err());
    }

    #[test]
    fn max_head_reduction() {
        let mut trace = uniform_trace(2, 1, 2);
        trace.attention[0][1] = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = AttentionAggregationConfig {
            heads: HeadReduction::Max,
            ..Default::default()
        };
        let a = reduce_attention(&trace, &cfg).unwrap();
        assert_eq!(a, Array2::from_shape_vec((2, 2), vec![1.0, 0.5, 0.5, 1.0]).unwrap());
    }
}
