//! Standalone SVG charts: signed horizontal bars and phrase-attention heatmaps.

use std::fmt::Write as _;

use crate::attention::PhraseAttentionMatrix;
use crate::error::{Error, Result};

pub const POSITIVE_COLOR: &str = "#2e7d32";
pub const NEGATIVE_COLOR: &str = "#c62828";

/// Green for non-negative values (zero included), red otherwise.
pub fn bar_color(value: f64) -> &'static str {
    if value >= 0.0 {
        POSITIVE_COLOR
    } else {
        NEGATIVE_COLOR
    }
}

/// Decimal rendering with six significant digits.
pub fn format_value(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-4..=9).contains(&magnitude) {
        return format!("{value:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const WIDTH: f64 = 760.0;
const LABEL_WIDTH: f64 = 300.0;
const VALUE_WIDTH: f64 = 90.0;
const BAR_HEIGHT: f64 = 22.0;
const BAR_GAP: f64 = 8.0;
const TOP: f64 = 44.0;

/// One horizontal bar per phrase, positive to the right of the zero line.
pub fn render_bars(labels: &[String], values: &[f64], title: &str) -> Result<String> {
    if labels.len() != values.len() {
        return Err(Error::Input(format!(
            "{} labels for {} values",
            labels.len(),
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("cannot chart non-finite value {v}")));
    }
    let chart_left = LABEL_WIDTH;
    let chart_width = WIDTH - LABEL_WIDTH - VALUE_WIDTH;
    let axis = chart_left + chart_width / 2.0;
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if max_abs > 0.0 {
        chart_width / 2.0 / max_abs
    } else {
        0.0
    };
    let height = TOP + values.len() as f64 * (BAR_HEIGHT + BAR_GAP) + 24.0;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="15" font-weight="bold" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    for (i, (label, &value)) in labels.iter().zip(values).enumerate() {
        let y = TOP + i as f64 * (BAR_HEIGHT + BAR_GAP);
        let len = value.abs() * scale;
        let x = if value >= 0.0 { axis } else { axis - len };
        let text_y = y + BAR_HEIGHT / 2.0 + 4.0;
        writeln!(
            svg,
            r#"<text x="{}" y="{text_y}" text-anchor="end">{}</text>"#,
            chart_left - 8.0,
            escape(label)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<rect class="bar" x="{x:.3}" y="{y}" width="{len:.3}" height="{BAR_HEIGHT}" fill="{}" data-index="{i}"/>"#,
            bar_color(value)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text class="value" x="{}" y="{text_y}">{}</text>"#,
            chart_left + chart_width + 6.0,
            format_value(value)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<line class="axis" x1="{axis}" y1="{}" x2="{axis}" y2="{}" stroke="#333" stroke-width="1"/>"##,
        TOP - 6.0,
        height - 18.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Linear blend from near-white to dark blue; `t` in [0, 1].
fn heat_color(t: f64) -> String {
    let lo = (247.0, 251.0, 255.0);
    let hi = (8.0, 48.0, 107.0);
    let t = t.clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(lo.0, hi.0), mix(lo.1, hi.1), mix(lo.2, hi.2))
}

/// Color of the most intense heatmap cell.
#[cfg(test)]
pub(crate) fn heat_max_color() -> String {
    heat_color(1.0)
}

const CELL: f64 = 56.0;

/// `M×M` grid labeled `Phrase i`, colored relative to the matrix maximum, with
/// a legend mapping indices to phrase text.
pub fn render_heatmap(matrix: &PhraseAttentionMatrix, title: &str) -> Result<String> {
    let m = matrix.len();
    if m == 0 {
        return Err(Error::Input("empty attention matrix".into()));
    }
    if matrix.scores.iter().any(|r| r.len() != m) || matrix.labels.len() != m {
        return Err(Error::Input("attention matrix is not square".into()));
    }
    let max = matrix.max();
    let left = 90.0;
    let top = 60.0;
    let grid = CELL * m as f64;
    let legend_top = top + grid + 40.0;
    let width = (left + grid + 120.0).max(640.0);
    let height = legend_top + 18.0 * m as f64 + 20.0;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="15" font-weight="bold" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    )
    .unwrap();
    for i in 0..m {
        let c = left + CELL * i as f64 + CELL / 2.0;
        writeln!(
            svg,
            r#"<text x="{c}" y="{}" text-anchor="middle">Phrase {i}</text>"#,
            top - 8.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">Phrase {i}</text>"#,
            left - 6.0,
            top + CELL * i as f64 + CELL / 2.0 + 4.0
        )
        .unwrap();
    }
    for (p, row) in matrix.scores.iter().enumerate() {
        for (q, &score) in row.iter().enumerate() {
            let t = if max > 0.0 { score / max } else { 0.0 };
            let x = left + CELL * q as f64;
            let y = top + CELL * p as f64;
            writeln!(
                svg,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ffffff" data-row="{p}" data-col="{q}"/>"##,
                heat_color(t)
            )
            .unwrap();
            let ink = if t > 0.5 { "white" } else { "black" };
            writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{score:.3}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    writeln!(svg, r#"<g class="legend">"#).unwrap();
    for (i, label) in matrix.labels.iter().enumerate() {
        writeln!(
            svg,
            r#"<text x="{left}" y="{}">Phrase {i}: {}</text>"#,
            legend_top + 18.0 * i as f64,
            escape(label)
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionAggregationConfig;

    fn bars(svg: &str) -> Vec<(f64, f64, String)> {
        svg.lines()
            .filter(|l| l.contains(r#"class="bar""#))
            .map(|l| {
                let attr = |name: &str| {
                    let start = l.find(&format!(r#" {name}=""#)).unwrap() + name.len() + 3;
                    let end = start + l[start..].find('"').unwrap();
                    l[start..end].to_string()
                };
                (attr("x").parse().unwrap(), attr("width").parse().unwrap(), attr("fill"))
            })
            .collect()
    }

    fn axis_x(svg: &str) -> f64 {
        let line = svg.lines().find(|l| l.contains(r#"class="axis""#)).unwrap();
        let start = line.find(r#"x1=""#).unwrap() + 4;
        let end = start + line[start..].find('"').unwrap();
        line[start..end].parse().unwrap()
    }

    #[test]
    fn signed_bars_take_sides_and_colors() {
        let svg = render_bars(&["good".into(), "bad".into()], &[0.3, -0.2], "t").unwrap();
        let b = bars(&svg);
        let axis = axis_x(&svg);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].2, POSITIVE_COLOR);
        assert!((b[0].0 - axis).abs() < 1e-9 && b[0].1 > 0.0);
        assert_eq!(b[1].2, NEGATIVE_COLOR);
        assert!((b[1].0 + b[1].1 - axis).abs() < 1e-3);
    }

    #[test]
    fn zero_values_render_empty_bars_and_axis() {
        let svg = render_bars(&["a".into(), "b".into()], &[0.0, 0.0], "zeros").unwrap();
        assert!(bars(&svg).iter().all(|(_, w, c)| *w == 0.0 && c == POSITIVE_COLOR));
        assert!(svg.contains(r#"class="axis""#));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(render_bars(&["a".into()], &[f64::NAN], "t").is_err());
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render_bars(&["<b>&".into()], &[1.0], "t").unwrap();
        assert!(svg.contains("&lt;b&gt;&amp;"));
    }

    #[test]
    fn value_labels_keep_six_digits() {
        for v in [0.123456789, -3.25098765, 12345.678, 0.000123456789, -7.0e-7, 4.2e12] {
            let back: f64 = format_value(v).parse().unwrap();
            assert!(((back - v) / v).abs() <= 5e-6, "{v} -> {}", format_value(v));
        }
    }

    fn matrix(scores: Vec<Vec<f64>>) -> PhraseAttentionMatrix {
        let labels = (0..scores.len()).map(|i| format!("p{i}")).collect();
        PhraseAttentionMatrix {
            scores,
            labels,
            config: AttentionAggregationConfig::default(),
        }
    }

    fn cell_fill(svg: &str, p: usize, q: usize) -> String {
        let needle = format!(r#"data-row="{p}" data-col="{q}""#);
        let line = svg.lines().find(|l| l.contains(&needle)).unwrap();
        let start = line.find(r#"fill=""#).unwrap() + 6;
        line[start..start + 7].to_string()
    }

    #[test]
    fn single_cell_is_full_intensity() {
        let svg = render_heatmap(&matrix(vec![vec![1.0]]), "t").unwrap();
        assert_eq!(cell_fill(&svg, 0, 0), heat_max_color());
    }

    #[test]
    fn diagonal_dominance_is_visible() {
        let svg = render_heatmap(
            &matrix(vec![vec![0.9, 0.05, 0.05], vec![0.1, 0.8, 0.1], vec![0.0, 0.1, 0.9]]),
            "t",
        )
        .unwrap();
        assert_eq!(cell_fill(&svg, 0, 0), heat_max_color());
        assert_eq!(cell_fill(&svg, 2, 2), heat_max_color());
        assert_ne!(cell_fill(&svg, 0, 1), heat_max_color());
        assert!(svg.contains("Phrase 2: p2"));
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(render_heatmap(&matrix(vec![]), "t").is_err());
    }
}
