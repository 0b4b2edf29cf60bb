//! CSV, JSON and SVG output of experiment reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::stats::{normal_pdf, standardize};
use super::{ExperimentReport, ReportRow};
use crate::error::Result;

/// Files written by [`render_outputs`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub timing: PathBuf,
    pub svgs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct CsvRow {
    n: usize,
    mean: f64,
    se: f64,
    limit: Option<f64>,
    abs_bias: Option<f64>,
    n_var: f64,
    sigma2_theory: Option<f64>,
    ks: Option<f64>,
    pass: bool,
}

impl From<&ReportRow> for CsvRow {
    fn from(r: &ReportRow) -> Self {
        CsvRow {
            n: r.n,
            mean: r.mean,
            se: r.se,
            limit: r.limit,
            abs_bias: r.abs_bias,
            n_var: r.n_var,
            sigma2_theory: r.sigma2_theory,
            ks: r.ks,
            pass: r.pass,
        }
    }
}

/// Writes `<stem>.csv`, `<stem>.json`, `<stem>.timing.txt` and, if the
/// config asks for them, one `<stem>_n<N>.svg` per row into `dir`.
///
/// Only the timing file depends on the machine; the rest is a function of
/// the config and seed.
pub fn render_outputs(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv)?;
    for row in &report.rows {
        w.serialize(CsvRow::from(row))?;
    }
    w.flush()?;

    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_string_pretty(report)?)?;

    let timing = dir.join(format!("{stem}.timing.txt"));
    fs::write(&timing, format!("wall_time_s = {:.3}\n", report.wall_time.as_secs_f64()))?;

    let mut svgs = Vec::new();
    if report.config.svg {
        for row in &report.rows {
            let path = dir.join(format!("{stem}_n{}.svg", row.n));
            fs::write(&path, render_svg(row))?;
            svgs.push(path);
        }
    }
    Ok(OutputPaths { csv, json, timing, svgs })
}

/// Histogram of the standardized replicates with the standard normal
/// density on top.
pub fn render_svg(row: &ReportRow) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 30.0;
    const LO: f64 = -4.0;
    const HI: f64 = 4.0;
    const BINS: usize = 32;

    let z = standardize(&row.values).unwrap_or_default();
    let width = (HI - LO) / BINS as f64;
    let mut counts = [0usize; BINS];
    for &v in &z {
        if (LO..HI).contains(&v) {
            counts[((v - LO) / width) as usize] += 1;
        }
    }
    let total = z.len().max(1) as f64;
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    let ymax = heights.iter().copied().fold(normal_pdf(0.0), f64::max) * 1.1;
    let sx = |x: f64| PAD + (x - LO) / (HI - LO) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / ymax * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (b, &h) in heights.iter().enumerate() {
        let x0 = sx(LO + b as f64 * width);
        let x1 = sx(LO + (b + 1) as f64 * width);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
            sy(h),
            x1 - x0,
            sy(0.0) - sy(h)
        );
    }
    let pts: Vec<String> = (0..=200)
        .map(|i| {
            let x = LO + (HI - LO) * i as f64 / 200.0;
            format!("{:.2},{:.2}", sx(x), sy(normal_pdf(x)))
        })
        .collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##, pts.join(" "));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        sy(0.0),
        W - PAD
    );
    let ks = row.ks.map_or_else(|| "n/a".to_string(), |d| format!("{d:.4}"));
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="20" font-family="monospace" font-size="12">n = {}, R = {}, KS = {ks}</text>"#,
        row.n,
        row.values.len()
    );
    s.push_str("</svg>\n");
    s
}
