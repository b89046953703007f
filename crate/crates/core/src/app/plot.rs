//! Minimal static SVG line charts for balance and drawdown curves.

use std::fmt::Write;

use chrono::NaiveDate;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub dates: &'a [NaiveDate],
    pub values: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart over a shared date axis. `percent` formats the y ticks as
/// percentages.
pub fn line_chart(title: &str, series: &[Series<'_>], percent: bool) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let points = series.iter().flat_map(|s| s.dates.iter().zip(s.values));
    let (mut d0, mut d1) = (NaiveDate::MAX, NaiveDate::MIN);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (d, v) in points {
        d0 = d0.min(*d);
        d1 = d1.max(*d);
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if d0 > d1 {
        svg.push_str("</svg>\n");
        return svg;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5 * lo.abs().max(1e-6);
        hi += 0.5 * hi.abs().max(1e-6);
    }
    let span_days = ((d1 - d0).num_days().max(1)) as f64;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let x = |d: NaiveDate| LEFT + pw * (d - d0).num_days() as f64 / span_days;
    let y = |v: f64| TOP + ph * (hi - v) / (hi - lo);

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let label = if percent { format!("{:.1}%", v * 100.0) } else { format!("{v:.0}") };
        let yy = y(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#eee"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    for k in 0..=4 {
        let d = d0 + chrono::Duration::days((span_days * k as f64 / 4.0).round() as i64);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{d}</text>"#,
            x(d),
            TOP + ph + 18.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut path = String::new();
        for (d, v) in s.dates.iter().zip(s.values) {
            let _ = write!(path, "{:.1},{:.1} ", x(*d), y(*v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let ly = HEIGHT - 18.0;
        let lx = LEFT + 170.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
