//! CSV and SVG renderings of a run.

use std::fmt::Write;

use crate::engine::{Metrics, Trace};

pub const TRACE_HEADER: &str = "k,vehicle,x,v,u,updated,retained";
pub const METRICS_HEADER: &str = "k,Dx,Dv";

/// One row per step and vehicle; `retained` ids are joined with `;` and left
/// empty for malicious vehicles.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (k, row) in trace.rows.iter().enumerate() {
        for (i, rec) in row.iter().enumerate() {
            let retained = rec
                .retained
                .as_ref()
                .map(|ids| {
                    ids.iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                })
                .unwrap_or_default();
            writeln!(
                out,
                "{k},{i},{},{},{},{},{retained}",
                rec.x, rec.v, rec.u, rec.updated as u8
            )
            .unwrap();
        }
    }
    out
}

pub fn metrics_csv(metrics: &Metrics) -> String {
    let mut out = String::with_capacity(metrics.dx.len() * 40);
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (k, (dx, dv)) in metrics.dx.iter().zip(&metrics.dv).enumerate() {
        writeln!(out, "{k},{dx},{dv}").unwrap();
    }
    out
}

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub dashed: bool,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;
const COLORS: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Static line chart of each series against its index.
pub fn line_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let finite = series
        .iter()
        .flat_map(|s| &s.values)
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let x_max = len.saturating_sub(1).max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |k: f64| MARGIN + k / x_max * plot_w;
    let sy = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * plot_h;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    // axes
    writeln!(
        out,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .unwrap();
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let v = lo + frac * (hi - lo);
        let k = frac * x_max;
        writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            sy(v) + 4.0,
            format_tick(v)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(k),
            HEIGHT - MARGIN + 18.0,
            format_tick(k.round())
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    )
    .unwrap();

    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let stride = s.values.len().div_ceil(MAX_POINTS).max(1);
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .filter(|(k, v)| (k % stride == 0 || *k + 1 == s.values.len()) && v.is_finite())
            .map(|(k, &v)| format!("{:.2},{:.2}", sx(k as f64), sy(v)))
            .collect();
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 16.0 * idx as f64;
        writeln!(
            out,
            r#"<line x1="{x1}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{tx}" y="{ty}">{}</text>"#,
            escape(&s.label),
            x1 = WIDTH - MARGIN - 110.0,
            x2 = WIDTH - MARGIN - 85.0,
            tx = WIDTH - MARGIN - 80.0,
            ty = ly + 4.0,
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Position and velocity charts, one line per vehicle, malicious ones dashed.
pub fn state_charts(trace: &Trace, malicious: &dyn Fn(usize) -> bool) -> (String, String) {
    let n = trace.rows.first().map_or(0, |r| r.len());
    let collect = |pick: fn(&crate::engine::VehicleRecord) -> f64| -> Vec<Series> {
        (0..n)
            .map(|i| Series {
                label: format!(
                    "vehicle {i}{}",
                    if malicious(i) { " (malicious)" } else { "" }
                ),
                values: trace.rows.iter().map(|row| pick(&row[i])).collect(),
                dashed: malicious(i),
            })
            .collect()
    };
    (
        line_chart("positions", "x (m)", &collect(|r| r.x)),
        line_chart("velocities", "v (m/s)", &collect(|r| r.v)),
    )
}
