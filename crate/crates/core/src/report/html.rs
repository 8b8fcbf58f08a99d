use std::fmt::Write as _;

use super::svg::{escape, format_value};
use super::ExplanationReport;

/// Static page for one sentence: the charts inline, followed by the numbers.
pub fn render_page(report: &ExplanationReport, charts: &[(String, String)]) -> String {
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    writeln!(html, "<title>{}</title>", escape(&report.sentence)).unwrap();
    html.push_str(
        "<style>body{font-family:sans-serif;max-width:960px;margin:2em auto}\
         table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:2px 8px;text-align:right}\
         td:first-child{text-align:left}</style>\n</head>\n<body>\n",
    );
    writeln!(html, "<h1>{}</h1>", escape(&report.sentence)).unwrap();
    writeln!(
        html,
        "<p>Model {} &middot; seed {} &middot; {:?}</p>",
        &report.model.weights_sha256[..report.model.weights_sha256.len().min(12)],
        report.explainer.seed,
        report.explainer.output
    )
    .unwrap();

    html.push_str("<table>\n<tr><th>#</th><th>phrase</th>");
    for layer in &report.layers {
        write!(html, "<th>{}</th>", layer.target).unwrap();
    }
    html.push_str("<th>aggregate</th></tr>\n");
    for (i, phrase) in report.phrases.iter().enumerate() {
        write!(
            html,
            "<tr><td>{i} {}</td><td>{}</td>",
            phrase.kind,
            escape(&phrase.text)
        )
        .unwrap();
        for layer in &report.layers {
            write!(html, "<td>{}</td>", format_value(layer.values[i])).unwrap();
        }
        writeln!(html, "<td>{}</td></tr>", format_value(report.aggregated[i])).unwrap();
    }
    html.push_str("</table>\n");

    for (title, svg) in charts {
        writeln!(html, "<h2>{}</h2>", escape(title)).unwrap();
        html.push_str(svg);
    }

    if let Some(b) = &report.baseline {
        html.push_str("<h2>Token-level baseline</h2>\n<table>\n<tr><th>token</th><th>value</th></tr>\n");
        for (token, v) in b.tokens.iter().zip(&b.values) {
            writeln!(html, "<tr><td>{}</td><td>{}</td></tr>", escape(token), format_value(*v)).unwrap();
        }
        html.push_str("</table>\n");
    }
    html.push_str("</body>\n</html>\n");
    html
}
