//! Top-down SVG plots of a scenario with paths drawn over it.

use std::fmt::Write;

use tensegrity_core::planner::Scenario;
use tensegrity_core::Pose2;

const PX_PER_M: f64 = 160.0;
const MARGIN: f64 = 20.0;

/// Something to draw on top of the scenario.
pub enum Layer<'a> {
    /// Scatter of small dots, e.g. expanded search nodes.
    Points { poses: &'a [Pose2], color: &'a str },
    /// Polyline with a heading tick at every pose.
    Path { poses: &'a [Pose2], color: &'a str, label: &'a str },
}

struct Frame {
    min_x: f64,
    max_y: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.min_x) * PX_PER_M, MARGIN + (self.max_y - y) * PX_PER_M)
    }
}

pub fn scenario_svg(scenario: &Scenario, layers: &[Layer]) -> String {
    let b = &scenario.boundary;
    let f = Frame { min_x: b.min_x, max_y: b.max_y };
    let (w, h) = (b.width() * PX_PER_M + 2.0 * MARGIN, b.height() * PX_PER_M + 2.0 * MARGIN + 18.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0) = f.px(b.min_x, b.max_y);
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black" stroke-width="2"/>"#,
        b.width() * PX_PER_M,
        b.height() * PX_PER_M
    );
    for o in &scenario.obstacles {
        let (cx, cy) = f.px(o.x, o.y);
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="#a6d4f2" stroke="#3b88c4"/>"##,
            o.radius * PX_PER_M
        );
    }
    let (gx, gy) = f.px(scenario.goal.x, scenario.goal.y);
    let _ = writeln!(
        s,
        r##"<circle cx="{gx:.1}" cy="{gy:.1}" r="{:.1}" fill="none" stroke="#2a9d3a" stroke-dasharray="4 3"/>"##,
        scenario.goal_threshold * PX_PER_M
    );
    let (sx, sy) = f.px(scenario.start.x, scenario.start.y);
    let _ = writeln!(s, r#"<circle cx="{sx:.1}" cy="{sy:.1}" r="4" fill="black"/>"#);

    let mut legend = Vec::new();
    for layer in layers {
        match layer {
            Layer::Points { poses, color } => {
                for p in poses.iter() {
                    let (x, y) = f.px(p.x, p.y);
                    let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="1.2" fill="{color}" fill-opacity="0.5"/>"#);
                }
            }
            Layer::Path { poses, color, label } => {
                let pts: Vec<String> = poses
                    .iter()
                    .map(|p| {
                        let (x, y) = f.px(p.x, p.y);
                        format!("{x:.1},{y:.1}")
                    })
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    pts.join(" ")
                );
                for p in poses.iter() {
                    let (x, y) = f.px(p.x, p.y);
                    let (tx, ty) = f.px(p.x + 0.06 * p.theta.cos(), p.y + 0.06 * p.theta.sin());
                    let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{tx:.1}" y2="{ty:.1}" stroke="{color}"/>"#);
                }
                legend.push((*color, *label));
            }
        }
    }
    for (i, (color, label)) in legend.iter().enumerate() {
        let x = MARGIN + 140.0 * i as f64;
        let y = h - 8.0;
        let _ = writeln!(s, r#"<rect x="{x:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, y - 6.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{label}</text>"#, x + 16.0);
    }
    s.push_str("</svg>\n");
    s
}
