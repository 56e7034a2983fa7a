//! Static log-log SVG of a convergence report.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use hodgeqi_core::{ConvergenceReport, Error, ReportRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

struct Series {
    name: &'static str,
    color: &'static str,
    value: fn(&ReportRow) -> f64,
}

const SERIES: [Series; 3] = [
    Series { name: "div", color: "#1f77b4", value: |r| r.error_div },
    Series { name: "curl", color: "#d62728", value: |r| r.error_curl },
    Series { name: "full", color: "#2ca02c", value: |r| r.error_full },
];

/// Decade-aligned range of the base-10 logs of the positive values.
fn decades(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let logs: Vec<f64> = values.filter(|v| *v > 0.0 && v.is_finite()).map(f64::log10).collect();
    if logs.is_empty() {
        return (0.0, 1.0);
    }
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

fn marker(out: &mut String, class: &str, shape: usize, x: f64, y: f64, series: &Series) {
    let (c, n) = (series.color, series.name);
    let _ = match shape {
        0 => writeln!(out, r#"<circle class="{class} {n}" cx="{x:.2}" cy="{y:.2}" r="4" fill="{c}"/>"#),
        1 => writeln!(
            out,
            r#"<rect class="{class} {n}" x="{:.2}" y="{:.2}" width="8" height="8" fill="{c}"/>"#,
            x - 4.0,
            y - 4.0
        ),
        _ => writeln!(
            out,
            r#"<polygon class="{class} {n}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{c}"/>"#,
            x,
            y - 5.0,
            x - 4.5,
            y + 4.0,
            x + 4.5,
            y + 4.0
        ),
    };
}

/// SVG text of the error-versus-`h` chart, with slopes over the trailing `window` rows.
pub fn render_svg(report: &ConvergenceReport, window: usize, title: &str) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::EmptyReport.into());
    }
    let rows = &report.rows;
    let (x0, x1) = decades(rows.iter().map(|r| r.h));
    let (y0, y1) = decades(rows.iter().flat_map(|r| [r.error_div, r.error_curl, r.error_full]));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |h: f64| LEFT + (h.log10() - x0) / (x1 - x0) * pw;
    let py = |e: f64| TOP + (y1 - e.log10()) / (y1 - y0) * ph;
    let slopes = if rows.len() >= 2 { Some(report.slopes(window.min(rows.len()))?) } else { None };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let x = px(10f64.powi(k as i32));
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"#, TOP + ph + 18.0);
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let y = py(10f64.powi(k as i32));
        let _ =
            writeln!(s, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">h</text>"#, LEFT + pw / 2.0, HEIGHT - 18.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">RMSE</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, series) in SERIES.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.h, (series.value)(r)))
            .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
            .map(|(h, e)| (px(h), py(e)))
            .collect();
        if pts.len() >= 2 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="series {}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                series.name,
                path.join(" "),
                series.color
            );
        }
        for &(x, y) in &pts {
            marker(&mut s, "marker", i, x, y, series);
        }
        let ly = TOP + 20.0 + 22.0 * i as f64;
        let lx = LEFT + pw + 20.0;
        marker(&mut s, "legend", i, lx, ly, series);
        let label = match &slopes {
            Some(sl) => {
                let v = [sl.div, sl.curl, sl.full][i];
                format!("{} (slope {v:.2})", series.name)
            }
            None => series.name.to_string(),
        };
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 12.0, ly + 4.0);
    }
    if let Some(sl) = &slopes {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">last {} points</text>"#,
            LEFT + pw + 20.0,
            TOP + 20.0 + 22.0 * 3.0,
            sl.window
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes [`render_svg`] output to `path`.
pub fn emit_plot(report: &ConvergenceReport, path: &Path, window: usize, title: &str) -> Result<()> {
    let svg = render_svg(report, window, title)?;
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}
