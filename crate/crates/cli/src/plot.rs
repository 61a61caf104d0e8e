//! Plot data (CSV) and small SVG renderings with deterministic bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use reachkit::sim::Scenario;
use reachkit::surrogate::CertificationReport;
use serde::Deserialize;

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    #[serde(rename = "V")]
    pub value: f64,
    pub branch: String,
    pub g: f64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TracePoint>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<TracePoint>, _>>()
        .with_context(|| format!("parsing trace {}", path.display()))?;
    Ok(rows)
}

fn branch_colour(b: &str) -> &'static str {
    match b {
        "learned" => "#d95f02",
        "fallback" => "#e7298a",
        "dwell" => "#7570b3",
        _ => "#1b1b1b",
    }
}

/// Maps world coordinates onto the canvas, y pointing up.
struct View {
    min: [f64; 2],
    scale: f64,
    height: f64,
}

impl View {
    fn fit(lo: [f64; 2], hi: [f64; 2]) -> Self {
        let span = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
        let scale = (WIDTH - 2.0 * MARGIN) / span[0];
        Self {
            min: lo,
            scale,
            height: span[1] * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.min[0]) * self.scale,
            self.height - MARGIN - (p[1] - self.min[1]) * self.scale,
        )
    }
}

/// Path coloured by branch over the optional scenario layout.
pub fn trace_svg(rows: &[TracePoint], scn: Option<&Scenario>) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |p: [f64; 2], r: f64| {
        lo = [lo[0].min(p[0] - r), lo[1].min(p[1] - r)];
        hi = [hi[0].max(p[0] + r), hi[1].max(p[1] + r)];
    };
    for r in rows {
        grow([r.x, r.y], 0.5);
    }
    if let Some(s) = scn {
        grow([s.domain[0], s.domain[2]], 0.0);
        grow([s.domain[1], s.domain[3]], 0.0);
    }
    if !lo[0].is_finite() {
        (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
    }
    let v = View::fit(lo, hi);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{:.0}" viewBox="0 0 {WIDTH:.0} {:.0}">"#,
        v.height, v.height
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    if let Some(s) = scn {
        for o in &s.obstacles {
            let (x, y) = v.px(o.center);
            let fill = if o.known { "#9e9e9e" } else { "#cfcfcf" };
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{fill}"/>"#,
                o.radius * v.scale
            );
        }
        for a in &s.anchors {
            let (x, y) = v.px(a.center);
            let _ = writeln!(
                out,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="none" stroke="#1b9e77" stroke-width="1.5"/>"##,
                a.radius * v.scale
            );
        }
        for g in &s.goals {
            let (x, y) = v.px(*g);
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#386cb0"/>"##);
        }
    }
    let mut i = 0;
    while i < rows.len() {
        let b = &rows[i].branch;
        let mut j = i;
        while j + 1 < rows.len() && rows[j + 1].branch == *b {
            j += 1;
        }
        // include the first point of the next run so the line is continuous
        let end = (j + 1).min(rows.len() - 1);
        let pts: Vec<String> = rows[i..=end]
            .iter()
            .map(|r| {
                let (x, y) = v.px([r.x, r.y]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            branch_colour(b)
        );
        i = j + 1;
    }
    out.push_str("</svg>\n");
    out
}

pub fn trace_csv(rows: &[TracePoint]) -> String {
    let mut out = String::from("t,x,y,theta,V,g,branch\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.t, r.x, r.y, r.theta, r.value, r.g, r.branch
        );
    }
    out
}

/// Bars of the per-scenario sup error and `ε₀`.
pub fn report_svg(r: &CertificationReport) -> String {
    let n = r.scenarios.len().max(1);
    let top = r
        .scenarios
        .iter()
        .map(|s| s.epsilon.max(s.epsilon0))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let height = 320.0;
    let slot = (WIDTH - 2.0 * MARGIN) / n as f64;
    let bar = slot * 0.4;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for (i, s) in r.scenarios.iter().enumerate() {
        let x0 = MARGIN + i as f64 * slot;
        for (k, (val, colour)) in [(s.epsilon, "#386cb0"), (s.epsilon0, "#f0027f")].into_iter().enumerate() {
            let h = val / top * (height - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{colour}"/>"#,
                x0 + k as f64 * bar,
                height - MARGIN - h
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn report_csv(r: &CertificationReport) -> String {
    let mut out = String::from("name,epsilon,epsilon0,rho,eta_epsilon\n");
    for s in &r.scenarios {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            s.name, s.epsilon, s.epsilon0, s.rho, s.eta_epsilon
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, x: f64, branch: &str) -> TracePoint {
        TracePoint {
            t,
            x,
            y: -x,
            theta: 0.0,
            value: f64::NAN,
            branch: branch.into(),
            g: -1.0,
        }
    }

    #[test]
    fn runs_split_by_branch() {
        let rows = vec![pt(0.0, 0.0, "nominal"), pt(0.1, 1.0, "nominal"), pt(0.2, 2.0, "learned")];
        let svg = trace_svg(&rows, None);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("#d95f02"));
        assert_eq!(svg, trace_svg(&rows, None));
        assert!(trace_csv(&rows).lines().nth(1).unwrap().starts_with("0.000000,0.000000,-0.000000"));
    }

    #[test]
    fn view_flips_y() {
        let v = View::fit([0.0, 0.0], [10.0, 5.0]);
        let (x0, y0) = v.px([0.0, 0.0]);
        let (x1, y1) = v.px([10.0, 5.0]);
        assert_eq!((x0, x1), (MARGIN, WIDTH - MARGIN));
        assert!(y1 < y0);
        assert!((y0 - y1 - 5.0 * v.scale).abs() < 1e-9);
    }
}
