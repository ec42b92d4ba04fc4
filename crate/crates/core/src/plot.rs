//! Dependency-free SVG charts for ratings, partial dependence and
//! attributions. Output is deterministic for equal inputs.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const ROW: f64 = 24.0;
const MARGIN: f64 = 40.0;
const LABEL_W: f64 = 200.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Horizontal bars; negative values extend left of the zero line.
/// Non-finite values are drawn as zero-length bars.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let height = MARGIN * 2.0 + ROW * bars.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, height, title);
    let lo = bars.iter().map(|b| finite_or_zero(b.1)).fold(0.0, f64::min);
    let hi = bars.iter().map(|b| finite_or_zero(b.1)).fold(0.0, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - LABEL_W - MARGIN * 2.0;
    let x_of = |v: f64| LABEL_W + MARGIN + (v - lo) / span * plot_w;
    let zero = x_of(0.0);
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = MARGIN + i as f64 * ROW;
        let v = finite_or_zero(*value);
        let (x, w) = if v >= 0.0 { (zero, x_of(v) - zero) } else { (x_of(v), zero - x_of(v)) };
        let fill = if v >= 0.0 { "#3b6ea5" } else { "#c0504d" };
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text><rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{fill}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            LABEL_W + MARGIN - 6.0,
            y + ROW * 0.65,
            escape(label),
            y + 3.0,
            ROW - 6.0,
            x + w + 4.0,
            y + ROW * 0.65,
            format_value(*value),
        );
    }
    let _ = write!(
        out,
        r##"<line x1="{zero:.1}" y1="{:.1}" x2="{zero:.1}" y2="{:.1}" stroke="#333"/></svg>"##,
        MARGIN - 4.0,
        height - MARGIN + 4.0
    );
    out.push('\n');
    out
}

/// Polyline over `(x, y)` points with labelled axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let height = 360.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let (y0, y1) = bounds(pts.iter().map(|p| p.1));
    let (left, right, top, bottom) = (MARGIN * 2.0, WIDTH - MARGIN, MARGIN, height - MARGIN * 1.5);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);
    let _ = write!(
        out,
        r##"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#333"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#333"/>"##
    );
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
    let _ = write!(
        out,
        r##"<polyline fill="none" stroke="#3b6ea5" stroke-width="2" points="{}"/>"##,
        coords.join(" ")
    );
    let _ = write!(
        out,
        r#"<text x="{left}" y="{:.1}">{}</text><text x="{right}" y="{:.1}" text-anchor="end">{}</text>"#,
        bottom + 16.0,
        format_value(x0),
        bottom + 16.0,
        format_value(x1)
    );
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        left - 4.0,
        bottom,
        format_value(y0),
        left - 4.0,
        top + 10.0,
        format_value(y1)
    );
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text></svg>"#,
        (left + right) / 2.0,
        height - 10.0,
        escape(x_label),
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
    out.push('\n');
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_are_escaped_and_deterministic() {
        let bars = vec![("a<b".to_string(), 1.5), ("c".to_string(), -0.5), ("inf".to_string(), f64::INFINITY)];
        let svg = bar_chart("t & u", &bars);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b") && svg.contains("t &amp; u"));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg, bar_chart("t & u", &bars));
    }

    #[test]
    fn line_handles_flat_series() {
        let svg = line_chart("pdp", "x", "y", &[(0.0, 1.0), (1.0, 1.0)]);
        assert!(svg.contains("<polyline"));
    }
}

fn pairs(names: &serde_json::Value, values: &serde_json::Value) -> Option<Vec<(String, f64)>> {
    let names = names.as_array()?;
    let values = values.as_array()?;
    names
        .iter()
        .zip(values)
        .map(|(n, v)| Some((n.as_str()?.to_string(), v.as_f64().unwrap_or(f64::NAN))))
        .collect()
}

/// Largest `n` entries by magnitude, kept in descending order.
fn strongest(mut bars: Vec<(String, f64)>, n: usize) -> Vec<(String, f64)> {
    bars.sort_by(|a, b| finite_or_zero(b.1).abs().total_cmp(&finite_or_zero(a.1).abs()).then(a.0.cmp(&b.0)));
    bars.truncate(n);
    bars
}

/// Chart for an artifact: score bars for ratings, a curve for partial
/// dependence, signed bars for attributions. `None` for kinds without a
/// natural chart.
pub fn artifact_svg(a: &crate::artifact::ExplanationArtifact) -> Option<String> {
    use crate::artifact::ArtifactKind;
    let v = &a.values;
    match a.kind {
        ArtifactKind::Rating | ArtifactKind::WhatIf => {
            let rating = &v["rating"];
            let bars: Vec<(String, f64)> = rating["scores"]
                .as_object()?
                .iter()
                .map(|(k, s)| (k.clone(), s.as_f64().unwrap_or(f64::NAN)))
                .collect();
            let metric = rating["metric"].as_str().unwrap_or("score").to_uppercase();
            Some(bar_chart(&format!("{metric}: test models and baselines"), &bars))
        }
        ArtifactKind::Pdp => {
            let r = &v["result"];
            let grid = r["grid"].as_array()?;
            let avg = r["averages"].as_array()?;
            let points: Vec<(f64, f64)> = grid
                .iter()
                .zip(avg)
                .map(|(x, y)| (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN)))
                .collect();
            let feature = r["feature"].as_str().unwrap_or_default();
            Some(line_chart(&format!("Partial dependence on {feature}"), feature, "average output", &points))
        }
        ArtifactKind::Shap => {
            let r = if v["result"].is_object() { &v["result"] } else { &v["shap"] };
            let bars = strongest(pairs(&r["features"], &r["phis"])?, 15);
            Some(bar_chart("Shapley attributions", &bars))
        }
        ArtifactKind::GlobalShap => {
            let r = if v["result"].is_object() { &v["result"] } else { &v["global"] };
            let bars = strongest(pairs(&r["features"], &r["mean_abs"])?, 15);
            Some(bar_chart("Mean absolute Shapley value", &bars))
        }
        ArtifactKind::Counterfactual | ArtifactKind::Hypothesis => None,
    }
}
