//! Risk tables and plot files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const RISK_HEADER: &str = "sweep,mean_imse,stderr,reps,d_star,seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub sweep: f64,
    pub mean_imse: f64,
    pub stderr: f64,
    pub reps: usize,
    pub d_star: f64,
    pub seconds: f64,
}

/// Rows as CSV text. Floats use the shortest representation that parses
/// back to the same value.
pub fn risk_csv(rows: &[RiskRow]) -> String {
    let mut s = String::from(RISK_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{},{:e},{:e}",
            r.sweep, r.mean_imse, r.stderr, r.reps, r.d_star, r.seconds
        );
    }
    s
}

pub fn emit_csv(rows: &[RiskRow], path: &Path) -> Result<()> {
    std::fs::write(path, risk_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_risk_csv(text: &str, path: &Path) -> Result<Vec<RiskRow>> {
    let mut lines = text.lines();
    let bad = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };
    match lines.next() {
        Some(h) if h.trim() == RISK_HEADER => {}
        other => return Err(bad(1, format!("expected header `{RISK_HEADER}`, found `{}`", other.unwrap_or("")))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(line_no, format!("expected 6 fields, found {}", fields.len())));
        }
        let float = |j: usize| -> Result<f64> {
            fields[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(line_no, format!("field {}: {e}", j + 1)))
        };
        rows.push(RiskRow {
            sweep: float(0)?,
            mean_imse: float(1)?,
            stderr: float(2)?,
            reps: fields[3]
                .trim()
                .parse()
                .map_err(|e| bad(line_no, format!("field 4: {e}")))?,
            d_star: float(4)?,
            seconds: float(5)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<RiskRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_risk_csv(&text, path)
}

/// One labelled curve of a risk plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub rows: Vec<RiskRow>,
}

/// Long-format plot data: `series,sweep,mean_imse,log10_sweep,log10_imse`.
pub fn emit_plot_data(series: &[Series], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "series,sweep,mean_imse,log10_sweep,log10_imse").map_err(io)?;
    for s in series {
        for r in &s.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e}",
                s.label,
                r.sweep,
                r.mean_imse,
                r.sweep.log10(),
                r.mean_imse.log10()
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#66a182", "#edae49", "#6b4c9a", "#2e4057"];

/// Log-log SVG of mean IMSE against the sweep value, one polyline per series.
/// Rows with non-positive or infinite coordinates are skipped.
pub fn render_svg(series: &[Series], x_label: &str) -> String {
    let (w, h, pad) = (640.0, 420.0, 60.0);
    let usable = |r: &RiskRow| r.sweep > 0.0 && r.sweep.is_finite() && r.mean_imse > 0.0 && r.mean_imse.is_finite();
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.rows.iter().filter(|r| usable(r)).map(|r| (r.sweep.log10(), r.mean_imse.log10())))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = span(|p| p.0);
    let (y0, y1) = span(|p| p.1);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let _ = writeln!(
        svg,
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let mut e = x0;
    while e <= x1 + 1e-9 {
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{e}</text>", sx(e), h - pad + 18.0);
        e += 1.0;
    }
    let mut e = y0;
    while e <= y1 + 1e-9 {
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{e}</text>", pad - 6.0, sy(e) + 4.0);
        e += 1.0;
    }
    let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>", w / 2.0, h - 15.0);
    let _ = writeln!(svg, "<text x=\"15\" y=\"{:.1}\" transform=\"rotate(-90 15 {:.1})\" text-anchor=\"middle\">mean IMSE</text>", h / 2.0, h / 2.0);

    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .rows
            .iter()
            .filter(|r| usable(r))
            .map(|r| format!("{:.1},{:.1}", sx(r.sweep.log10()), sy(r.mean_imse.log10())))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            coords.join(" ")
        );
        for c in &coords {
            let (cx, cy) = c.split_once(',').expect("formatted pair");
            let _ = writeln!(svg, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{colour}\"/>");
        }
        let ly = pad + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" fill=\"{colour}\" text-anchor=\"end\">{}</text>",
            w - pad - 8.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(series: &[Series], x_label: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(series, x_label)).map_err(|e| Error::io(path, e))
}
