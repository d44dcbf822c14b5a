// SPDX-License-Identifier: Apache-2.0

//! Static SVG line plots of CSV columns.

use crate::error::{CliError, Result};
use crate::output::Table;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Columns to draw: one x column and any number of y series.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    /// Series drawn dashed, e.g. bounds and asymptotes.
    pub dashed: Vec<String>,
}

impl PlotSpec {
    pub fn new(title: &str, x: &str, y: &[&str]) -> Self {
        PlotSpec {
            title: title.into(),
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            dashed: Vec::new(),
        }
    }

    pub fn dashed(mut self, cols: &[&str]) -> Self {
        self.dashed = cols.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Read `data` and render `spec` as SVG text.
pub fn emit_plot(data: &Path, spec: &PlotSpec) -> Result<String> {
    let table = Table::read(data)?;
    render(&table, spec, &data.display().to_string())
}

pub fn render(table: &Table, spec: &PlotSpec, source: &str) -> Result<String> {
    let get = |c: &str| {
        table.column(c).ok_or_else(|| CliError::MissingColumn {
            column: c.to_string(),
            file: source.to_string(),
        })
    };
    let xs = get(&spec.x)?;
    let series = spec
        .y
        .iter()
        .map(|c| get(c).map(|v| (c.as_str(), v)))
        .collect::<Result<Vec<_>>>()?;

    let finite = |v: &[f64]| v.iter().cloned().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let (x0, x1) = padded_range(&finite(&xs), 0.0);
    let ys: Vec<f64> = series.iter().flat_map(|(_, v)| finite(v)).collect();
    let (y0, y1) = padded_range(&ys, 0.05);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&spec.x)
    );
    let ylabel = spec.y.join(", ");
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(&ylabel)
    );

    for (k, (name, v)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dash = if spec.dashed.iter().any(|d| d == name) {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        // NaN or infinite values split the polyline
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (&x, &y) in xs.iter().zip(v) {
            if x.is_finite() && y.is_finite() {
                segments.last_mut().unwrap().push((sx(x), sy(y)));
            } else if !segments.last().unwrap().is_empty() {
                segments.push(Vec::new());
            }
        }
        for seg in segments.iter().filter(|g| !g.is_empty()) {
            let pts: Vec<String> = seg.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn padded_range(v: &[f64], pad: f64) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let d = pad * (hi - lo);
    (lo - d, hi + d)
}

fn tick(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new(&["t", "a", "b"]);
        t.push(vec![0.0, 1.0, f64::NAN]);
        t.push(vec![1.0, 0.5, 2.0]);
        t.push(vec![2.0, 0.25, 3.0]);
        t
    }

    #[test]
    fn draws_one_polyline_per_finite_run() {
        let svg = render(&table(), &PlotSpec::new("x", "t", &["a", "b"]).dashed(&["b"]), "mem").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn missing_column_is_named() {
        let err = render(&table(), &PlotSpec::new("x", "t", &["c"]), "mem.csv").unwrap_err();
        match err {
            CliError::MissingColumn { column, file } => {
                assert_eq!(column, "c");
                assert_eq!(file, "mem.csv");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_series_get_a_nonzero_range() {
        let (lo, hi) = padded_range(&[2.0, 2.0], 0.05);
        assert!(hi > lo);
    }
}
