//! Deterministic static SVG heatmaps and bar charts.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Colour scale domain of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorRange {
    /// `[-1, 1]`, for correlation matrices.
    Correlation,
    /// `[-a, a]` with `a` the largest absolute entry.
    Symmetric,
}

const CELL: f64 = 64.0;
const MARGIN_LEFT: f64 = 140.0;
const MARGIN_TOP: f64 = 40.0;
const LEGEND_WIDTH: f64 = 18.0;

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract("cannot render non-finite values".into()))
    }
}

/// Two decimals, with negative zero printed as `0.00`.
fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Blue (-1) through white (0) to red (+1).
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t) + 64.0 * t, 255.0 * (1.0 - t) + 64.0 * t)
    } else {
        let s = -t;
        (255.0 * (1.0 - s) + 48.0 * s, 255.0 * (1.0 - s) + 96.0 * s, 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub fn render_heatmap(
    matrix: &DMatrix<f64>,
    row_labels: &[String],
    col_labels: &[String],
    title: &str,
    range: ColorRange,
) -> Result<String> {
    check_finite(matrix.iter())?;
    let (rows, cols) = matrix.shape();
    if row_labels.len() != rows || col_labels.len() != cols {
        return Err(Error::Contract("label count does not match the matrix".into()));
    }
    let limit = match range {
        ColorRange::Correlation => 1.0,
        ColorRange::Symmetric => matrix.amax().max(f64::MIN_POSITIVE),
    };
    let width = MARGIN_LEFT + CELL * cols as f64 + 3.0 * LEGEND_WIDTH + 60.0;
    let height = MARGIN_TOP + CELL * rows as f64 + 120.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14">{}</text>"#,
        MARGIN_LEFT,
        escape(title)
    );
    for i in 0..rows {
        let y = MARGIN_TOP + CELL * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + CELL / 2.0 + 4.0,
            escape(&row_labels[i])
        );
        for j in 0..cols {
            let x = MARGIN_LEFT + CELL * j as f64;
            let v = matrix[(i, j)];
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ffffff"/>"##,
                diverging(v / limit)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0,
                fmt2(v)
            );
        }
    }
    let label_y = MARGIN_TOP + CELL * rows as f64 + 14.0;
    for (j, label) in col_labels.iter().enumerate() {
        let x = MARGIN_LEFT + CELL * j as f64 + CELL / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{label_y}" text-anchor="end" transform="rotate(-45 {x} {label_y})">{}</text>"#,
            escape(label)
        );
    }

    // legend: 11 stops from +limit (top) to -limit (bottom)
    let lx = MARGIN_LEFT + CELL * cols as f64 + LEGEND_WIDTH;
    let lh = CELL * rows as f64 / 11.0;
    for k in 0..11 {
        let t = 1.0 - 2.0 * k as f64 / 10.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="{LEGEND_WIDTH}" height="{lh}" fill="{}"/>"#,
            MARGIN_TOP + lh * k as f64,
            diverging(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{}</text>"#,
        lx + LEGEND_WIDTH + 4.0,
        MARGIN_TOP + 10.0,
        fmt2(limit)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{}</text>"#,
        lx + LEGEND_WIDTH + 4.0,
        MARGIN_TOP + CELL * rows as f64,
        fmt2(-limit)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_bars(values: &[f64], labels: &[String], title: &str) -> Result<String> {
    check_finite(values)?;
    if values.len() != labels.len() {
        return Err(Error::Contract("label count does not match the values".into()));
    }
    const BAR: f64 = 28.0;
    const SPAN: f64 = 360.0;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let width = MARGIN_LEFT + SPAN + 80.0;
    let height = MARGIN_TOP + (BAR + 8.0) * values.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14">{}</text>"#,
        MARGIN_LEFT,
        escape(title)
    );
    for (k, (&v, label)) in values.iter().zip(labels).enumerate() {
        let y = MARGIN_TOP + (BAR + 8.0) * k as f64;
        let w = SPAN * v.abs() / max;
        let fill = if v >= 0.0 { "#d04040" } else { "#3060ff" };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + BAR / 2.0 + 4.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{y}" width="{w}" height="{BAR}" fill="{fill}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            MARGIN_LEFT + w + 4.0,
            y + BAR / 2.0 + 4.0,
            fmt2(v)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn write(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Renders a square matrix with the same labels on both axes.
pub fn emit_heatmap(
    matrix: &DMatrix<f64>,
    labels: &[String],
    title: &str,
    range: ColorRange,
    path: &Path,
) -> Result<()> {
    write(path, &render_heatmap(matrix, labels, labels, title, range)?)
}

pub fn emit_bars(values: &[f64], labels: &[String], title: &str, path: &Path) -> Result<()> {
    write(path, &render_bars(values, labels, title)?)
}
