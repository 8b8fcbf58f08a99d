//! Everything written for one explained sentence, as in-memory files.

use crate::attention::{sentence_attention, AttentionAggregationConfig};
use crate::error::Result;
use crate::phrase::PhraseSet;
use crate::shap::Explainer;

use super::{emit_document, render_bars, render_heatmap, render_page, ExplanationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub report: bool,
    pub svg: bool,
    pub html: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        Self {
            report: true,
            svg: true,
            html: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Per-layer explanation plus attention, and the token baseline when asked.
pub fn build_report(
    explainer: &Explainer<'_>,
    phrases: PhraseSet,
    with_baseline: bool,
    attention: Option<&AttentionAggregationConfig>,
) -> Result<ExplanationReport> {
    let matrix = match attention {
        Some(cfg) => Some(sentence_attention(explainer.model, explainer.vocab, &phrases, cfg)?),
        None => None,
    };
    let sentence = phrases.sentence.clone();
    let result = explainer.explain_phrases(phrases)?;
    let mut report = ExplanationReport::new(&result, explainer.model, &explainer.config);
    if with_baseline {
        report = report.with_baseline(&explainer.baseline(&sentence)?);
    }
    if let Some(m) = matrix {
        report = report.with_attention(m);
    }
    report.validate()?;
    Ok(report)
}

/// `(file suffix, title, svg)` for every chart of the report: one bar chart
/// per layer target, the aggregate, the baseline and the heatmap when present.
pub fn render_charts(report: &ExplanationReport) -> Result<Vec<(String, String, String)>> {
    let labels = report.phrase_labels();
    let mut charts = Vec::new();
    for layer in &report.layers {
        let title = format!("SHAP values, {} layer", layer.target);
        let svg = render_bars(&labels, &layer.values, &title)?;
        charts.push((format!("{}.bars.svg", layer.target), title, svg));
    }
    let title = "Aggregated SHAP values".to_string();
    let svg = render_bars(&labels, &report.aggregated, &title)?;
    charts.push(("aggregate.bars.svg".into(), title, svg));
    if let Some(b) = &report.baseline {
        let title = "Token-level baseline".to_string();
        let svg = render_bars(&b.tokens, &b.values, &title)?;
        charts.push(("baseline.bars.svg".into(), title, svg));
    }
    if let Some(m) = &report.attention {
        let title = "Attention scores by phrases".to_string();
        let svg = render_heatmap(m, &title)?;
        charts.push(("attention.svg".into(), title, svg));
    }
    Ok(charts)
}

/// Files named `<slug>.report`, `<slug>.<chart>.svg` and `<slug>.html`.
pub fn render_outputs(slug: &str, report: &ExplanationReport, formats: OutputFormats) -> Result<Vec<OutputFile>> {
    let mut files = Vec::new();
    if formats.report {
        files.push(OutputFile {
            name: format!("{slug}.report"),
            contents: emit_document(report)?,
        });
    }
    if !(formats.svg || formats.html) {
        return Ok(files);
    }
    let charts = render_charts(report)?;
    if formats.svg {
        for (suffix, _, svg) in &charts {
            files.push(OutputFile {
                name: format!("{slug}.{suffix}"),
                contents: svg.clone(),
            });
        }
    }
    if formats.html {
        let embedded: Vec<(String, String)> = charts.into_iter().map(|(_, t, s)| (t, s)).collect();
        files.push(OutputFile {
            name: format!("{slug}.html"),
            contents: render_page(report, &embedded),
        });
    }
    Ok(files)
}

/// Lowercase ASCII words joined by dashes, at most 48 characters.
pub fn slugify(text: &str) -> String {
    let mut slug = String::new();
    for word in text
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if slug.len() + word.len() + 1 > 48 {
            break;
        }
        if !slug.is_empty() {
            slug.push('-');
        }
        slug.push_str(&word.to_ascii_lowercase());
    }
    if slug.is_empty() {
        slug.push_str("sentence");
    }
    slug
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(
            slugify("Read the book, forget the movie!"),
            "read-the-book-forget-the-movie"
        );
        assert_eq!(slugify("!!!"), "sentence");
        assert!(slugify(&"word ".repeat(40)).len() <= 48);
    }
}
