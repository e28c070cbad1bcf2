//! Static SVG charts of mean response time against arrival rate.
//!
//! Output is a pure function of the input rows: coordinates are printed with
//! fixed precision and series are drawn in the order given.

use std::fmt::Write as _;

use crate::table::{AnalyzeRow, SweepRow};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

pub const PROPORTIONAL_LABEL: &str = "T_prop";
pub const OPTIMAL_LABEL: &str = "T*";

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Half-width of the error bar, if any.
    pub err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
    /// Analytic curves are solid; simulated ones are dashed with markers.
    pub analytic: bool,
}

/// Linear map from data space to pixel space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Scale {
    /// Bounds covering every point and error bar, padded by 5% so nothing
    /// sits on the frame. The y range always includes zero.
    pub fn fit(series: &[Series]) -> Self {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for p in series.iter().flat_map(|s| &s.points) {
            x_min = x_min.min(p.x);
            x_max = x_max.max(p.x);
            y_max = y_max.max(p.y + p.err.unwrap_or(0.0));
        }
        if !x_min.is_finite() {
            return Self { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        let span = x_max - x_min;
        let pad = if span > 0.0 { 0.05 * span } else { 0.5 * x_min.abs().max(1.0) };
        Self {
            x_min: x_min - pad,
            x_max: x_max + pad,
            y_min: 0.0,
            y_max: if y_max > 0.0 { 1.05 * y_max } else { 1.0 },
        }
    }

    pub fn x_pixel(&self, x: f64) -> f64 {
        let plot = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * plot
    }

    /// Larger values map to smaller pixel rows (higher on the page).
    pub fn y_pixel(&self, y: f64) -> f64 {
        let plot = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (self.y_max - y) / (self.y_max - self.y_min) * plot
    }
}

/// The proportional and optimal analytic curves.
pub fn analytic_series(rows: &[AnalyzeRow]) -> Vec<Series> {
    let curve = |label: &str, f: fn(&AnalyzeRow) -> f64| Series {
        label: label.to_string(),
        points: rows
            .iter()
            .map(|r| Point { x: r.lambda, y: f(r), err: None })
            .collect(),
        analytic: true,
    };
    vec![
        curve(PROPORTIONAL_LABEL, |r| r.t_prop),
        curve(OPTIMAL_LABEL, |r| r.t_opt),
    ]
}

/// One series per policy, in first-appearance order; failed cells are skipped.
pub fn simulated_series(rows: &[SweepRow]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for row in rows {
        let Some(y) = row.simulated_t else { continue };
        let point = Point { x: row.lambda, y, err: row.ci_halfwidth };
        match out.iter_mut().find(|s| s.label == row.policy) {
            Some(s) => s.points.push(point),
            None => out.push(Series {
                label: row.policy.clone(),
                points: vec![point],
                analytic: false,
            }),
        }
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Renders the chart. A series with a single point is drawn as a marker only.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let scale = Scale::fit(series);
    let mut svg = String::new();
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;

    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        (left + right) / 2.0,
        escape(title)
    );

    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(svg, r#"<line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="ticks" font-size="11">"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = scale.x_min + f * (scale.x_max - scale.x_min);
        let yv = scale.y_min + f * (scale.y_max - scale.y_min);
        let (px, py) = (scale.x_pixel(xv), scale.y_pixel(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/><line x1="{left:.2}" y1="{py:.2}" x2="{right:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">arrival rate λ (requests/s)</text>"#,
        (left + right) / 2.0,
        HEIGHT - 25.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">mean response time (s)</text>"#,
        (top + bottom) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<g class="series" data-label="{}" stroke="{color}" fill="{color}">"#,
            escape(&s.label)
        );
        if s.points.len() > 1 {
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", scale.x_pixel(p.x), scale.y_pixel(p.y)))
                .collect();
            let dash = if s.analytic { "" } else { r#" stroke-dasharray="6 4""# };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke-width="2"{dash} points="{}"/>"#,
                coords.join(" ")
            );
        }
        for p in &s.points {
            let (px, py) = (scale.x_pixel(p.x), scale.y_pixel(p.y));
            if let Some(e) = p.err {
                let (hi, lo) = (scale.y_pixel(p.y + e), scale.y_pixel(p.y - e));
                let _ = writeln!(
                    svg,
                    r#"<path class="errorbar" fill="none" d="M{px:.2},{hi:.2}V{lo:.2}M{:.2},{hi:.2}H{:.2}M{:.2},{lo:.2}H{:.2}"/>"#,
                    px - 4.0,
                    px + 4.0,
                    px - 4.0,
                    px + 4.0
                );
            }
            let _ = writeln!(
                svg,
                r#"<circle class="marker" cx="{px:.2}" cy="{py:.2}" r="{}"/>"#,
                if s.analytic { 3 } else { 4 }
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = top + 10.0 + 20.0 * i as f64;
        let x = right + 15.0;
        let dash = if s.analytic { "" } else { r#" stroke-dasharray="6 4""# };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 25.0,
            x + 32.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn analyze_rows(values: &[(f64, f64, f64)]) -> Vec<AnalyzeRow> {
        values
            .iter()
            .map(|&(lambda, t_prop, t_opt)| AnalyzeRow {
                scenario: "s".into(),
                lambda,
                rho: lambda / 4.0,
                t_prop,
                t_opt,
                regime: "closed_form".into(),
            })
            .collect()
    }

    #[test]
    fn analytic_curves_are_solid_polylines_with_legend() {
        let rows = analyze_rows(&[(0.8, 0.9375, 0.8035), (1.6, 1.25, 1.1606), (2.4, 1.875, 1.7856)]);
        let svg = render_svg("scenarioA", &analytic_series(&rows));
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"width="800" height="600""#));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("stroke-dasharray"));
        assert!(svg.contains(">T_prop</text>"));
        assert!(svg.contains(">T*</text>"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn single_lambda_draws_markers_only() {
        let rows = analyze_rows(&[(1.0, 1.0, 0.95)]);
        let svg = render_svg("one", &analytic_series(&rows));
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches(r#"class="marker""#).count(), 2);
    }

    #[test]
    fn simulated_points_get_error_bars_and_exact_names() {
        let row = |policy: &str, lambda: f64, t: Option<f64>| SweepRow {
            scenario: "s".into(),
            policy: policy.into(),
            lambda,
            rho: 0.2,
            analytic_t: None,
            simulated_t: t,
            ci_halfwidth: t.map(|_| 0.01),
            jobs_counted: None,
            seed: 1,
            regime: None,
            error: None,
        };
        let rows = [
            row("halo_rnd", 0.8, Some(0.8)),
            row("rnd", 0.8, Some(1.1)),
            row("halo_rnd", 1.6, Some(1.16)),
            row("rnd", 1.6, None),
        ];
        let series = simulated_series(&rows);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].points.len(), 2);
        assert_eq!(series[1].points.len(), 1);
        let svg = render_svg("s", &series);
        assert_eq!(svg.matches(r#"class="errorbar""#).count(), 3);
        assert!(svg.contains(">halo_rnd</text>") && svg.contains(">rnd</text>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = analyze_rows(&[(1.0, 1.0, 0.95), (2.0, 1.33, 1.3)]);
        let s = analytic_series(&rows);
        assert_eq!(render_svg("x", &s), render_svg("x", &s));
    }

    #[test]
    fn title_is_escaped() {
        let svg = render_svg("a<b & c", &[]);
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    proptest! {
        #[test]
        fn y_pixel_order_reverses_value_order(
            ys in prop::collection::vec(0.0f64..100.0, 2..12),
        ) {
            let points = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| Point { x: i as f64, y, err: None })
                .collect();
            let series = [Series { label: "s".into(), points, analytic: true }];
            let scale = Scale::fit(&series);
            for &a in &ys {
                for &b in &ys {
                    let (pa, pb) = (scale.y_pixel(a), scale.y_pixel(b));
                    if a < b {
                        prop_assert!(pa >= pb);
                    }
                    if b - a > 1e-9 {
                        prop_assert!(pa > pb);
                    }
                    prop_assert!((MARGIN_TOP..=HEIGHT - MARGIN_BOTTOM).contains(&pa));
                }
            }
        }
    }
}
