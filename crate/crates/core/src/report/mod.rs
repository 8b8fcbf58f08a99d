//! Machine-readable explanation reports and their graphics.
//!
//! Reports are JSON documents with a fixed field order and every float written
//! with 17 significant digits, so a document survives parse → emit unchanged
//! byte for byte.

mod files;
mod html;
mod svg;

pub use files::{build_report, render_charts, render_outputs, slugify, OutputFile, OutputFormats};
pub use html::render_page;
pub use svg::{bar_color, format_value, render_bars, render_heatmap, NEGATIVE_COLOR, POSITIVE_COLOR};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::attention::PhraseAttentionMatrix;
use crate::error::{Error, Result};
use crate::model::{save_weights, Model, ModelConfig};
use crate::phrase::PhraseKind;
use crate::shap::{
    aggregate_layers, BaselineResult, EncoderBaseline, ExplainedOutput, ExplainerConfig, LayerTarget, Method,
    MethodChoice, ShapResult,
};

pub const SCHEMA_VERSION: &str = "layerlens/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub index: usize,
    pub kind: PhraseKind,
    pub word_start: usize,
    pub word_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordLevelEntry {
    pub phrase: usize,
    pub words: Vec<String>,
    pub values: Vec<f64>,
    pub v_empty: f64,
    pub v_full: f64,
    pub method: Method,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub target: LayerTarget,
    pub method: Method,
    pub samples: usize,
    pub v_empty: f64,
    pub v_full: f64,
    pub values: Vec<f64>,
    pub word_level: Vec<WordLevelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub tokens: Vec<String>,
    pub method: Method,
    pub samples: usize,
    pub v_empty: f64,
    pub v_full: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFingerprint {
    pub config: ModelConfig,
    pub weights_sha256: String,
}

impl ModelFingerprint {
    pub fn of(model: &Model) -> Self {
        let digest = Sha256::digest(save_weights(model).as_bytes());
        Self {
            config: model.config,
            weights_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerEcho {
    pub method: MethodChoice,
    pub exact_threshold: usize,
    pub kernel_samples: usize,
    pub ridge: f64,
    pub seed: u64,
    pub output: ExplainedOutput,
    pub encoder_baseline: EncoderBaseline,
}

impl From<&ExplainerConfig> for ExplainerEcho {
    fn from(c: &ExplainerConfig) -> Self {
        Self {
            method: c.method,
            exact_threshold: c.exact_threshold,
            kernel_samples: c.kernel_samples,
            ridge: c.ridge,
            seed: c.seed,
            output: c.output,
            encoder_baseline: c.encoder_baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub schema: String,
    pub sentence: String,
    pub tokens: Vec<String>,
    pub phrases: Vec<PhraseEntry>,
    pub layers: Vec<LayerEntry>,
    pub aggregated: Vec<f64>,
    pub baseline: Option<BaselineEntry>,
    pub attention: Option<PhraseAttentionMatrix>,
    pub model: ModelFingerprint,
    pub explainer: ExplainerEcho,
}

impl ExplanationReport {
    pub fn new(result: &ShapResult, model: &Model, config: &ExplainerConfig) -> Self {
        let phrases = result
            .phrases
            .phrases
            .iter()
            .enumerate()
            .map(|(index, p)| PhraseEntry {
                index,
                kind: p.kind,
                word_start: p.word_start,
                word_end: p.word_end,
                text: p.text.clone(),
            })
            .collect();
        let layers = result
            .layers
            .iter()
            .map(|l| LayerEntry {
                target: l.target,
                method: l.attribution.method,
                samples: l.attribution.samples,
                v_empty: l.attribution.v_empty,
                v_full: l.attribution.v_full,
                values: l.attribution.values.clone(),
                word_level: l
                    .words
                    .iter()
                    .map(|w| WordLevelEntry {
                        phrase: w.phrase,
                        words: w.words.clone(),
                        values: w.attribution.values.clone(),
                        v_empty: w.attribution.v_empty,
                        v_full: w.attribution.v_full,
                        method: w.attribution.method,
                        total: w.phrase_total,
                    })
                    .collect(),
            })
            .collect();
        Self {
            schema: SCHEMA_VERSION.to_string(),
            sentence: result.sentence.clone(),
            tokens: result.tokens.tokens.iter().map(|t| t.text.clone()).collect(),
            phrases,
            layers,
            aggregated: result.aggregated.clone(),
            baseline: None,
            attention: None,
            model: ModelFingerprint::of(model),
            explainer: ExplainerEcho::from(config),
        }
    }

    pub fn with_baseline(mut self, baseline: &BaselineResult) -> Self {
        self.baseline = Some(BaselineEntry {
            tokens: baseline.labels.clone(),
            method: baseline.attribution.method,
            samples: baseline.attribution.samples,
            v_empty: baseline.attribution.v_empty,
            v_full: baseline.attribution.v_full,
            values: baseline.attribution.values.clone(),
        });
        self
    }

    pub fn with_attention(mut self, matrix: PhraseAttentionMatrix) -> Self {
        self.attention = Some(matrix);
        self
    }

    pub fn phrase_labels(&self) -> Vec<String> {
        self.phrases.iter().map(|p| p.text.clone()).collect()
    }

    /// Checks the aggregation law and every length invariant.
    pub fn validate(&self) -> Result<()> {
        let refuse = |msg: String| Err(Error::Serialization(msg));
        if self.schema != SCHEMA_VERSION {
            return refuse(format!("unsupported schema {:?}", self.schema));
        }
        let m = self.phrases.len();
        if m == 0 {
            return refuse("report lists no phrases".into());
        }
        if self.layers.is_empty() {
            return refuse("report has no layer attributions".into());
        }
        for layer in &self.layers {
            if layer.values.len() != m {
                return refuse(format!(
                    "layer {} has {} values for {m} phrases",
                    layer.target,
                    layer.values.len()
                ));
            }
            for w in &layer.word_level {
                if w.values.len() != w.words.len() || w.phrase >= m {
                    return refuse(format!("word-level entry for phrase {} is inconsistent", w.phrase));
                }
            }
        }
        let vectors: Vec<&[f64]> = self.layers.iter().map(|l| l.values.as_slice()).collect();
        let expected = aggregate_layers(&vectors)?;
        if expected != self.aggregated {
            return refuse(format!(
                "aggregated values {:?} differ from the sum of layer values {expected:?}",
                self.aggregated
            ));
        }
        if let Some(b) = &self.baseline {
            if b.values.len() != b.tokens.len() {
                return refuse(format!(
                    "baseline has {} values for {} tokens",
                    b.values.len(),
                    b.tokens.len()
                ));
            }
        }
        if let Some(a) = &self.attention {
            if a.scores.len() != m || a.scores.iter().any(|r| r.len() != m) || a.labels.len() != m {
                return refuse(format!("attention matrix is not {m}×{m}"));
            }
        }
        Ok(())
    }
}

fn write_value(out: &mut String, value: &Value, indent: usize) -> Result<()> {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let v = n.as_f64().expect("f64 number");
                if !v.is_finite() {
                    return Err(Error::Serialization("non-finite number".into()));
                }
                out.push_str(&format!("{v:.16e}"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|v| !v.is_array() && !v.is_object()) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent)?;
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, indent + 2);
                    write_value(out, item, indent + 2)?;
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(out, v, indent + 2)?;
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
    Ok(())
}

/// Serializes a validated report in canonical form.
pub fn emit_document(report: &ExplanationReport) -> Result<String> {
    report.validate()?;
    let value = serde_json::to_value(report).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &value, 0)?;
    out.push('\n');
    Ok(out)
}

pub fn parse_document(text: &str) -> Result<ExplanationReport> {
    let report: ExplanationReport = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("report line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    report.validate()?;
    Ok(report)
}
