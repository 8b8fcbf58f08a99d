//! Plain-text weight documents.
//!
//! ```text
//! layerlens-weights 1
//! config vocab_size=... d_model=... n_heads=... n_layers=... d_ff=... max_len=... n_classes=...
//! param token_embeddings <rows> <cols>
//! <one line per row, space-separated floats>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip representation, so a save/load cycle
//! is exact.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{Model, ModelConfig, ModelWeights};
use crate::error::{Error, Result};

const MAGIC: &str = "layerlens-weights 1";

pub fn save_weights(model: &Model) -> String {
    let c = &model.config;
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(
        out,
        "config vocab_size={} d_model={} n_heads={} n_layers={} d_ff={} max_len={} n_classes={}",
        c.vocab_size, c.d_model, c.n_heads, c.n_layers, c.d_ff, c.max_len, c.n_classes
    )
    .unwrap();
    for (name, tensor) in model.weights.named() {
        writeln!(out, "param {name} {} {}", tensor.nrows(), tensor.ncols()).unwrap();
        for row in tensor.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v:e}").unwrap();
            }
            out.push('\n');
        }
    }
    out.push_str("end\n");
    out
}

fn parse_config(line: &str) -> Result<ModelConfig> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some("config") {
        return Err(Error::format("config", "expected config line after header"));
    }
    let mut values = std::collections::HashMap::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::format("config", format!("malformed entry {field:?}")))?;
        let value: usize = value
            .parse()
            .map_err(|_| Error::format(key, format!("not an integer: {value:?}")))?;
        values.insert(key.to_string(), value);
    }
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::format(key, "missing from config line"))
    };
    Ok(ModelConfig {
        vocab_size: get("vocab_size")?,
        d_model: get("d_model")?,
        n_heads: get("n_heads")?,
        n_layers: get("n_layers")?,
        d_ff: get("d_ff")?,
        max_len: get("max_len")?,
        n_classes: get("n_classes")?,
    })
}

pub fn load_weights(document: &str) -> Result<Model> {
    let mut lines = document.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::format("header", format!("expected {MAGIC:?}")));
    }
    let config = parse_config(
        lines
            .next()
            .ok_or_else(|| Error::format("config", "document truncated"))?,
    )?;
    config.validate().map_err(|e| Error::format("config", e.to_string()))?;

    let mut weights = ModelWeights::zeros(&config);
    for (name, tensor) in weights.named_mut() {
        let header = lines
            .next()
            .ok_or_else(|| Error::format(name.clone(), "document truncated before parameter"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "param" || parts[1] != name {
            return Err(Error::format(
                name,
                format!("expected parameter header, found {header:?}"),
            ));
        }
        let rows: usize = parts[2]
            .parse()
            .map_err(|_| Error::format(name.clone(), "bad row count"))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| Error::format(name.clone(), "bad column count"))?;
        if (rows, cols) != tensor.dim() {
            return Err(Error::format(
                name,
                format!(
                    "declared shape ({rows}, {cols}) conflicts with config shape {:?}",
                    tensor.dim()
                ),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(name.clone(), format!("document truncated at row {r}")))?;
            let before = data.len();
            for token in line.split_whitespace() {
                let v: f64 = token
                    .parse()
                    .map_err(|_| Error::format(name.clone(), format!("row {r}: not a number: {token:?}")))?;
                if !v.is_finite() {
                    return Err(Error::format(name.clone(), format!("row {r}: non-finite value")));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::format(
                    name,
                    format!("row {r} has {} values, expected {cols}", data.len() - before),
                ));
            }
        }
        *tensor = Array2::from_shape_vec((rows, cols), data).expect("row lengths checked");
    }
    match lines.next() {
        Some("end") => {}
        Some(other) => return Err(Error::format("end", format!("unexpected trailing line {other:?}"))),
        None => return Err(Error::format("end", "document truncated before end marker")),
    }
    Model::new(config, weights)
}
