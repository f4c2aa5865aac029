use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::biomarker::BiomarkerHistogram;
use crate::stats::BlandAltmanSummary;

use super::{PipelineError, Result};

/// Something that can be drawn as a Bland-Altman scatter or a bar chart.
#[derive(Debug, Clone, Copy)]
pub enum PlotData<'a> {
    BlandAltman(&'a BlandAltmanSummary),
    Histogram(&'a BiomarkerHistogram),
}

/// Bland-Altman plot data: one `meta` row carrying the mean difference,
/// limits and coverage, then one `point` row per pair.
pub fn write_bland_altman_csv<W: Write>(s: &BlandAltmanSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "record",
        "pair_mean",
        "pair_diff",
        "mean_diff",
        "upper_limit",
        "lower_limit",
        "coverage",
    ])?;
    w.write_record([
        "meta".to_string(),
        String::new(),
        String::new(),
        s.mean_diff.to_string(),
        s.upper_limit.to_string(),
        s.lower_limit.to_string(),
        s.coverage_label(),
    ])?;
    for (m, d) in s.pair_means.iter().zip(&s.differences) {
        w.write_record([
            "point".to_string(),
            m.to_string(),
            d.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `feature,count`, most frequent first.
pub fn write_histogram_csv<W: Write>(h: &BiomarkerHistogram, out: W) -> csv::Result<()> {
    h.write_csv(out)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="14" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of difference against mean with the mean and both limits drawn as
/// horizontal lines.
pub fn bland_altman_svg(s: &BlandAltmanSummary, title: &str) -> String {
    let xs = &s.pair_means;
    let (x0, x1) = span(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let ys = s.differences.iter().copied().chain([s.lower_limit, s.upper_limit]);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = span(lo, hi);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = svg_open(title);
    for (y, dash, label) in [
        (s.mean_diff, "", "mean"),
        (s.upper_limit, r#" stroke-dasharray="6 4""#, "upper"),
        (s.lower_limit, r#" stroke-dasharray="6 4""#, "lower"),
    ] {
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="gray"{dash}/><text x="{2}" y="{3:.2}" font-size="10" font-family="sans-serif">{label} {y:.3}</text>"#,
            py(y),
            WIDTH - MARGIN,
            WIDTH - MARGIN + 2.0,
            py(y) + 3.0,
        );
    }
    for (x, y) in xs.iter().zip(&s.differences) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            px(*x),
            py(*y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(&s.coverage_label())
    );
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of feature counts, most frequent first.
pub fn histogram_svg(h: &BiomarkerHistogram) -> String {
    let bars = h.sorted();
    let top = bars.iter().map(|(_, c)| *c).max().unwrap_or(1).max(1) as f64;
    let slot = (WIDTH - 2.0 * MARGIN) / bars.len().max(1) as f64;
    let mut svg = svg_open(&format!("{} biomarkers", h.action));
    for (i, (feature, count)) in bars.iter().enumerate() {
        let height = *count as f64 / top * (HEIGHT - 3.0 * MARGIN);
        let x = MARGIN + i as f64 * slot;
        let y = HEIGHT - 2.0 * MARGIN - height;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{height:.2}" fill="steelblue"/>"#,
            x + 0.1 * slot,
            0.8 * slot
        );
        let _ = writeln!(
            svg,
            r#"<text x="{0:.2}" y="{1:.2}" font-size="9" font-family="sans-serif" transform="rotate(45 {0:.2} {1:.2})">{2}</text>"#,
            x + 0.3 * slot,
            HEIGHT - 2.0 * MARGIN + 12.0,
            escape(feature)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle" font-family="sans-serif">{count}</text>"#,
            x + 0.5 * slot,
            y - 3.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<stem>.csv` into `dir`, plus `<stem>.svg` when `svg` is set, and
/// returns the written paths.
pub fn emit_plot_data(data: PlotData<'_>, dir: &Path, stem: &str, svg: bool) -> Result<Vec<PathBuf>> {
    let mut buf = Vec::new();
    let csv_path = dir.join(format!("{stem}.csv"));
    let res = match data {
        PlotData::BlandAltman(s) => write_bland_altman_csv(s, &mut buf),
        PlotData::Histogram(h) => write_histogram_csv(h, &mut buf),
    };
    res.map_err(|e| PipelineError::analysis(csv_path.display().to_string(), e))?;
    write_file(&csv_path, &buf)?;
    let mut written = vec![csv_path];
    if svg {
        let image = match data {
            PlotData::BlandAltman(s) => bland_altman_svg(s, stem),
            PlotData::Histogram(h) => histogram_svg(h),
        };
        let path = dir.join(format!("{stem}.svg"));
        write_file(&path, image.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
