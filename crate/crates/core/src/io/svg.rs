//! Standalone SVG plots written as plain text.

use std::fmt::Write;

use crate::forecaster::SyntheticControlSeries;
use crate::panel::EventWindow;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], colour: &str, dash: bool) {
    if points.is_empty() {
        return;
    }
    let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dash { r#" stroke-dasharray="6 3""# } else { "" };
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{}"/>"#,
        coords.join(" ")
    );
}

/// Observed series against its synthetic control, with the event window
/// shaded.
pub fn line_plot_svg(title: &str, observed: &[f64], synthetic: &SyntheticControlSeries, window: &EventWindow) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let n = observed.len().max(2);
    let (lo, hi) = range(observed.iter().copied().chain(synthetic.values().values().copied()));
    let x = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * t as f64 / (n - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let x0 = x(window.first()) - 0.5;
    let x1 = x(window.last()) + 0.5;
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{MARGIN}" width="{:.2}" height="{}" fill="orange" fill-opacity="0.25"/>"#,
        (x1 - x0).max(1.0),
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let obs: Vec<(f64, f64)> = observed.iter().enumerate().map(|(t, &v)| (x(t), y(v))).collect();
    polyline(&mut out, &obs, "black", false);
    let syn: Vec<(f64, f64)> = synthetic
        .values()
        .iter()
        .filter(|(&t, _)| t < observed.len())
        .map(|(&t, &v)| (x(t), y(v)))
        .collect();
    polyline(&mut out, &syn, "steelblue", true);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="11">observed (solid), synthetic control (dashed), range {lo:.3} to {hi:.3}</text>"#,
        HEIGHT - 12.0
    );
    out.push_str("</svg>\n");
    out
}

/// One histogram per sample set, each with a standard-normal density scaled
/// to the bin counts.
pub fn histogram_svg(title: &str, labels: &[String], samples: &[Vec<f64>], bins: usize) -> String {
    let panels = samples.len().max(1);
    let panel_w = 320.0;
    let width = panel_w * panels as f64;
    let mut out = String::new();
    header(&mut out, width, HEIGHT, title);
    let bins = bins.max(1);
    let (lo, hi) = (-4.0_f64, 4.0_f64);
    let bw = (hi - lo) / bins as f64;
    for (p, xs) in samples.iter().enumerate() {
        let left = p as f64 * panel_w + MARGIN;
        let inner_w = panel_w - 2.0 * MARGIN;
        let inner_h = HEIGHT - 2.0 * MARGIN;
        let mut counts = vec![0usize; bins];
        for &v in xs {
            if v >= lo && v < hi {
                counts[((v - lo) / bw) as usize] += 1;
            }
        }
        let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let expected_peak = xs.len() as f64 * bw * density(0.0);
        let top = (counts.iter().copied().max().unwrap_or(0) as f64).max(expected_peak).max(1.0);
        let y = |c: f64| MARGIN + inner_h * (1.0 - c / top);
        for (b, &c) in counts.iter().enumerate() {
            let bx = left + inner_w * b as f64 / bins as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="lightsteelblue" stroke="white" stroke-width="0.5"/>"#,
                y(c as f64),
                inner_w / bins as f64,
                inner_h * c as f64 / top
            );
        }
        let curve: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let z = lo + (hi - lo) * i as f64 / 200.0;
                (left + inner_w * (z - lo) / (hi - lo), y(xs.len() as f64 * bw * density(z)))
            })
            .collect();
        polyline(&mut out, &curve, "crimson", false);
        let label = labels.get(p).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{} (n = {})</text>"#,
            left + inner_w / 2.0,
            HEIGHT - 12.0,
            escape(label),
            xs.len()
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed_xml() {
        let observed: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
        let syn = SyntheticControlSeries::from_points((10..50).map(|t| (t, 0.0)));
        let svg = line_plot_svg("a < b & c", &observed, &syn, &EventWindow::new(30, 5).unwrap());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);

        let samples = vec![(0..500).map(|i| (i as f64 / 500.0 - 0.5) * 6.0).collect::<Vec<_>>(); 3];
        let labels = vec!["k = 1".to_string(), "k = 2".into(), "k = 3".into()];
        let svg = histogram_svg("hist", &labels, &samples, 20);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 3);
    }
}
