use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CoverageRow, CoverageTable};
use crate::error::{invalid, Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "setting",
    "method",
    "B",
    "alpha",
    "m",
    "reps",
    "coverage",
    "mean_width",
    "seed",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    setting: u8,
    method: String,
    #[serde(rename = "B")]
    budget: usize,
    alpha: f64,
    m: usize,
    reps: usize,
    coverage: f64,
    mean_width: String,
    seed: u64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// RFC-4180 CSV with LF line endings; widths of set-valued rows are `NA`.
pub fn write_csv<W: Write>(table: &CoverageTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &table.rows {
        w.serialize(CsvRow {
            setting: r.setting,
            method: r.method.clone(),
            budget: r.budget,
            alpha: r.alpha,
            m: r.m,
            reps: r.reps,
            coverage: r.coverage,
            mean_width: r.mean_width.map_or_else(|| "NA".into(), |v| v.to_string()),
            seed: r.seed,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CoverageTable> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut table = CoverageTable::default();
    for rec in rdr.deserialize::<CsvRow>() {
        let r = rec.map_err(csv_err)?;
        let mean_width = match r.mean_width.as_str() {
            "NA" => None,
            s => Some(
                s.parse()
                    .map_err(|_| invalid(format!("bad mean_width `{s}`")))?,
            ),
        };
        table.rows.push(CoverageRow {
            setting: r.setting,
            method: r.method,
            budget: r.budget,
            alpha: r.alpha,
            m: r.m,
            reps: r.reps,
            coverage: r.coverage,
            mean_width,
            mean_span: None,
            seed: r.seed,
        });
    }
    Ok(table)
}

const W: f64 = 640.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Panel {
    top: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN + (x - lo) / (hi - lo).max(1e-12) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.top + PANEL_H - MARGIN - (y - lo) / (hi - lo).max(1e-12) * (PANEL_H - 2.0 * MARGIN)
    }

    fn frame(&self, svg: &mut String, title: &str, x_label: &str) {
        let (x0, x1) = (MARGIN, W - MARGIN);
        let (y0, y1) = (self.top + MARGIN, self.top + PANEL_H - MARGIN);
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{title}</text>"#,
            W / 2.0,
            y0 - 12.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x_label}</text>"#,
            W / 2.0,
            y1 + 32.0
        );
        for (v, anchor, x, y) in [
            (self.x_range.0, "start", x0, y1 + 16.0),
            (self.x_range.1, "end", x1, y1 + 16.0),
            (self.y_range.0, "end", x0 - 4.0, y1),
            (self.y_range.1, "end", x0 - 4.0, y0 + 10.0),
        ] {
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{y}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                fmt_tick(v)
            );
        }
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn polyline(svg: &mut String, class: &str, color: &str, points: &[(f64, f64)], panel: &Panel) {
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", panel.px(x), panel.py(y)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
        pts.join(" ")
    );
}

/// Self-contained SVG: coverage against `B` (or against `α` when the table
/// has a single budget per series) with one polyline per method and a dashed
/// nominal line; a second panel plots mean width, or the mean threshold
/// span of set-valued intervals.
pub fn render_svg(table: &CoverageTable) -> Result<String> {
    if table.rows.is_empty() {
        return Err(invalid("cannot plot an empty table"));
    }
    let mut alphas: Vec<f64> = table.rows.iter().map(|r| r.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let budgets_vary = table.rows.iter().any(|r| r.budget != table.rows[0].budget);
    let by_budget = budgets_vary || alphas.len() == 1;
    let x_of = |r: &CoverageRow| if by_budget { r.budget as f64 } else { r.alpha };

    // series key: method, plus α when several levels share the budget axis
    let mut series: BTreeMap<String, Vec<&CoverageRow>> = BTreeMap::new();
    for r in &table.rows {
        let key = if by_budget && alphas.len() > 1 {
            format!("{} (α={})", r.method, r.alpha)
        } else {
            r.method.clone()
        };
        series.entry(key).or_default().push(r);
    }
    for rows in series.values_mut() {
        rows.sort_by(|a, b| x_of(a).total_cmp(&x_of(b)));
    }

    let extent = |r: &&CoverageRow| r.mean_width.or(r.mean_span);
    let has_width = table.rows.iter().any(|r| extent(&r).is_some());
    let span_only = has_width && table.rows.iter().all(|r| r.mean_width.is_none());
    let height = if has_width { 2.0 * PANEL_H } else { PANEL_H } + 20.0 * series.len() as f64;

    let x_range = range(table.rows.iter().map(x_of));
    let nominal: Vec<f64> = alphas.iter().map(|a| 1.0 - a).collect();
    let y_range = {
        let (lo, _) = range(
            table
                .rows
                .iter()
                .map(|r| r.coverage)
                .chain(nominal.iter().copied()),
        );
        (lo.clamp(0.0, 0.5), 1.0)
    };
    let cov = Panel {
        top: 0.0,
        x_range,
        y_range,
    };
    let x_label = if by_budget { "B" } else { "alpha" };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    cov.frame(&mut svg, "coverage", x_label);
    if by_budget {
        for a in &alphas {
            let y = cov.py(1.0 - a);
            let _ = writeln!(
                svg,
                r##"<line class="nominal" x1="{MARGIN}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#000" stroke-dasharray="6,4"/>"##,
                W - MARGIN
            );
        }
    } else {
        let pts: Vec<(f64, f64)> = alphas.iter().map(|a| (*a, 1.0 - a)).collect();
        let pts: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", cov.px(x), cov.py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="nominal" fill="none" stroke="#000" stroke-dasharray="6,4" points="{}"/>"##,
            pts.join(" ")
        );
    }
    for (i, (_, rows)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (x_of(r), r.coverage)).collect();
        polyline(&mut svg, "coverage", COLORS[i % COLORS.len()], &pts, &cov);
    }

    let mut legend_top = PANEL_H;
    if has_width {
        let wr = range(table.rows.iter().filter_map(|r| extent(&r)));
        let panel = Panel {
            top: PANEL_H,
            x_range,
            y_range: (wr.0.min(0.0), wr.1),
        };
        let title = if span_only {
            "mean threshold span"
        } else {
            "mean width"
        };
        panel.frame(&mut svg, title, x_label);
        for (i, (_, rows)) in series.iter().enumerate() {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| extent(r).map(|w| (x_of(r), w)))
                .collect();
            if !pts.is_empty() {
                polyline(&mut svg, "width", COLORS[i % COLORS.len()], &pts, &panel);
            }
        }
        legend_top += PANEL_H;
    }
    for (i, name) in series.keys().enumerate() {
        let y = legend_top + 14.0 + 20.0 * i as f64;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/>"#,
            MARGIN + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            MARGIN + 30.0,
            y + 4.0,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_svg(table: &CoverageTable, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(table)?)?;
    Ok(())
}
