//! Plot data and SVG line charts of mean completion time against load.
//!
//! Two figures come out of a summary: `completion_full` over every load and
//! `completion_high` over loads of at least [`HIGH_LOAD`] (skipped when there
//! are none). Each has a `.dat` file in gnuplot's indexed-block format and a
//! self-contained `.svg`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::experiment::SummaryRow;
use crate::{CliError, Result};

pub const HIGH_LOAD: f64 = 0.8;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

/// Points `(rho, mean, half_width)` of one policy, sorted by load.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub policy: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Groups summary rows by policy in order of first appearance.
pub fn series(rows: &[SummaryRow], min_rho: f64) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows.iter().filter(|r| r.rho >= min_rho) {
        let i = match out.iter().position(|s| s.policy == r.policy) {
            Some(i) => i,
            None => {
                out.push(Series {
                    policy: r.policy.clone(),
                    points: vec![],
                });
                out.len() - 1
            }
        };
        out[i].points.push((r.rho, r.mean_completion_time, r.ci_half_width));
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

pub fn render_dat(series: &[Series]) -> String {
    let mut out = String::from("# rho mean_completion_time ci_half_width\n");
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# policy {}", s.policy);
        for (rho, mean, hw) in &s.points {
            let _ = writeln!(out, "{rho} {mean} {hw}");
        }
    }
    out
}

pub fn render_svg(title: &str, series: &[Series]) -> String {
    let finite = || series.iter().flat_map(|s| &s.points).filter(|p| p.1.is_finite());
    let (mut x0, mut x1) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    if x0 > x1 {
        (x0, x1) = (0.0, 1.0);
    } else if x0 == x1 {
        (x0, x1) = (x0 - 0.05, x1 + 0.05);
    }
    let ymax = finite().map(|p| p.1).fold(0.0, f64::max);
    let y1 = if ymax > 0.0 { nice_ceiling(ymax * 1.05) } else { 1.0 };
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - y / y1 * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (x, y) = (x0 + f * (x1 - x0), f * y1);
        let _ = writeln!(
            o,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4:.2}</text>"##,
            sx(x),
            TOP,
            TOP + ph,
            TOP + ph + 18.0,
            x
        );
        let _ = writeln!(
            o,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
            LEFT,
            sy(y),
            LEFT + pw,
            LEFT - 6.0,
            sy(y) + 4.0,
            tick_label(y)
        );
    }
    let _ = writeln!(
        o,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">load rho</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">mean completion time</text>"#,
        TOP + ph / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                o,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(o, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.policy)
        );
    }
    o.push_str("</svg>\n");
    o
}

/// Writes the figure files for `rows` into `dir` and returns their paths.
pub fn emit_plot_data(rows: &[SummaryRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (stem, min_rho, title) in [
        ("completion_full", f64::NEG_INFINITY, "Mean completion time"),
        ("completion_high", HIGH_LOAD, "Mean completion time, high load"),
    ] {
        let s = series(rows, min_rho);
        if min_rho > f64::NEG_INFINITY && s.is_empty() {
            continue;
        }
        for (ext, body) in [("dat", render_dat(&s)), ("svg", render_svg(title, &s))] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Smallest of 1, 2, 2.5, 5 times a power of ten that is at least `v`.
fn nice_ceiling(v: f64) -> f64 {
    let p = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * p)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * p)
}

fn tick_label(y: f64) -> String {
    let s = format!("{y:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
