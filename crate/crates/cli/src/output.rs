//! CSV tables and minimal SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

/// Floats with 17 significant digits, which round-trip exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column label for a norm exponent: `2`, `4.5`, `inf`.
pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_float).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Read a two-column `t,value` CSV with a header row.
pub fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let line = i + 2;
        if rec.len() != 2 {
            return Err(format!("{} line {line}: expected 2 columns, got {}", path.display(), rec.len()));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("{} line {line}: '{s}': {e}", path.display()))
        };
        t.push(num(&rec[0])?);
        v.push(num(&rec[1])?);
    }
    Ok((t, v))
}

pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of `series`; `log_x`/`log_y` drop nonpositive points.
pub fn write_svg(path: &Path, title: &str, series: &[Series], log_x: bool, log_y: bool) -> std::io::Result<()> {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let keep = |x: f64, y: f64| (!log_x || x > 0.0) && (!log_y || y > 0.0) && x.is_finite() && y.is_finite();
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(s.y)
                .filter(|(&x, &y)| keep(x, y))
                .map(|(&x, &y)| (tx(x), ty(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (x0, x1, y0, y1) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-300) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-300) * (h - 2.0 * pad);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let label = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    if x0.is_finite() {
        let _ = writeln!(svg, r#"<text x="{pad}" y="{}" font-size="10">{}</text>"#, h - pad + 15.0, label(x0, log_x));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#, w - pad, h - pad + 15.0, label(x1, log_x));
        let _ = writeln!(svg, r#"<text x="5" y="{}" font-size="10">{}</text>"#, h - pad, label(y0, log_y));
        let _ = writeln!(svg, r#"<text x="5" y="{}" font-size="10">{}</text>"#, pad + 10.0, label(y1, log_y));
    }
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, coords.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 150.0,
            pad + 15.0 * (k + 1) as f64,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
