//! Minimal SVG 1.1 charts: observed against predicted over the test
//! window, and a bar chart of test RMSE across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::runner::RunResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const Y_TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.1 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Observed and predicted polylines against year.
pub fn line_chart(
    title: &str,
    years: &[i32],
    observed: &[f64],
    predicted: &[f64],
) -> Result<String> {
    if years.is_empty() || years.len() != observed.len() || years.len() != predicted.len() {
        return Err(Error::LengthMismatch(
            years.len(),
            observed.len().min(predicted.len()),
        ));
    }
    let (y0, y1) = padded_range(observed.iter().chain(predicted).copied());
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = years.len();
    let px = |i: usize| {
        if n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let py = |v: f64| TOP + plot_h * (y1 - v) / (y1 - y0);

    let mut s = String::new();
    header(&mut s, WIDTH, HEIGHT, title);
    let (bx, by) = (LEFT, TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<g stroke="black"><line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}"/><line x1="{bx:.2}" y1="{TOP:.2}" x2="{bx:.2}" y2="{by:.2}"/></g>"#,
        LEFT + plot_w
    );
    for (i, year) in years.iter().enumerate() {
        let x = px(i);
        let _ = writeln!(
            s,
            r#"<g class="xtick"><line x1="{x:.2}" y1="{by:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{year}</text></g>"#,
            by + 5.0,
            by + 20.0
        );
    }
    for k in 0..Y_TICKS {
        let v = y0 + (y1 - y0) * k as f64 / (Y_TICKS - 1) as f64;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<g class="ytick"><line x1="{:.2}" y1="{y:.2}" x2="{bx:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text></g>"#,
            bx - 5.0,
            bx - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Year</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Anomaly (°C)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let points = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", px(i), py(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        s,
        r#"<polyline class="observed" fill="none" stroke="black" stroke-width="2" points="{}"/>"#,
        points(observed)
    );
    let _ = writeln!(
        s,
        r##"<polyline class="predicted" fill="none" stroke="#d62728" stroke-width="2" stroke-dasharray="6 4" points="{}"/>"##,
        points(predicted)
    );
    let lx = LEFT + plot_w - 120.0;
    let _ = writeln!(
        s,
        r##"<g class="legend"><line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/><text x="{:.2}" y="{:.2}">Observed</text><line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-width="2" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}">Predicted</text></g>"##,
        TOP + 10.0,
        lx + 25.0,
        TOP + 10.0,
        lx + 30.0,
        TOP + 14.0,
        TOP + 28.0,
        lx + 25.0,
        TOP + 28.0,
        lx + 30.0,
        TOP + 32.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Vertical bars, one per label.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> Result<String> {
    if labels.is_empty() || labels.len() != values.len() {
        return Err(Error::LengthMismatch(labels.len(), values.len()));
    }
    let bar = 16.0;
    let width = (LEFT + RIGHT + bar * 1.5 * labels.len() as f64).max(WIDTH);
    let height = HEIGHT + 100.0;
    let plot_h = height - TOP - BOTTOM - 100.0;
    let vmax = values.iter().copied().fold(0.0, f64::max).max(1e-12);
    let base = TOP + plot_h;

    let mut s = String::new();
    header(&mut s, width, height, title);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        width - RIGHT
    );
    for k in 0..Y_TICKS {
        let v = vmax * k as f64 / (Y_TICKS - 1) as f64;
        let y = base - plot_h * v / vmax;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">RMSE (°C)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let x = LEFT + bar * 0.25 + bar * 1.5 * i as f64;
        let h = plot_h * v / vmax;
        let cx = x + bar / 2.0;
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="#1f77b4"><title>{}: {v}</title></rect><text x="{cx:.2}" y="{:.2}" text-anchor="end" font-size="9" transform="rotate(-60 {cx:.2} {:.2})">{}</text>"##,
            base - h,
            escape(label),
            base + 12.0,
            base + 12.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn run_chart(r: &RunResult) -> Result<String> {
    let years: Vec<i32> = r.per_year.iter().map(|p| p.year).collect();
    let obs: Vec<f64> = r.per_year.iter().map(|p| p.observed).collect();
    let pred: Vec<f64> = r.per_year.iter().map(|p| p.predicted).collect();
    line_chart(
        &format!("{} {}", r.model.code(), r.run_key),
        &years,
        &obs,
        &pred,
    )
}

/// Writes one chart per successful run plus `summary_rmse.svg`; returns the
/// paths written in order.
pub fn render_plots(results: &[RunResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ok: Vec<&RunResult> = results.iter().filter(|r| r.metrics.is_some()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidParameter("no successful runs to plot".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for r in &ok {
        let path = out_dir.join(format!("{}.svg", r.file_stem()));
        fs::write(&path, run_chart(r)?)?;
        written.push(path);
    }
    let labels: Vec<String> = ok
        .iter()
        .map(|r| format!("{} {}", r.model.code(), r.run_key))
        .collect();
    let values: Vec<f64> = ok
        .iter()
        .map(|r| r.metrics.map_or(0.0, |m| m.rmse))
        .collect();
    let path = out_dir.join("summary_rmse.svg");
    fs::write(&path, bar_chart("Test RMSE by run", &labels, &values)?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_structure() {
        let svg = line_chart(
            "t",
            &[2016, 2017, 2018, 2019, 2020],
            &[1.0, 0.9, 0.85, 0.98, 1.01],
            &[0.9; 5],
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"class="xtick""#).count(), 5);
        assert!(svg.contains(r#"viewBox="0 0 640 400""#));
        assert!(svg.contains("°C"));
        assert!(line_chart("t", &[], &[], &[]).is_err());
    }

    #[test]
    fn bar_chart_has_one_bar_per_value() {
        let svg = bar_chart("b", &["a".into(), "b<c".into()], &[0.1, 0.2]).unwrap();
        assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
        assert!(svg.contains("b&lt;c"));
    }
}
