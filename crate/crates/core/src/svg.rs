//! Deterministic SVG rendering of workspaces, risk maps, trees and paths.
//!
//! East maps to `x` and north to `y` (flipped so north is up). All numbers
//! are written with fixed precision, so identical inputs give identical
//! bytes.

use std::fmt::Write;

use crate::geometry::{Obstacle, Point2, Shape, Workspace};
use crate::planner::Tree;
use crate::risk_field::RiskMap;
use crate::Real;

/// Colors cycled for successive labelled polylines.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

pub struct Figure {
    ws: Workspace<f64>,
    scale: f64,
    margin: f64,
    body: String,
    legend: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Figure {
    /// `scale` is pixels per metre.
    pub fn new<T: Real>(ws: &Workspace<T>, scale: f64) -> Self {
        let ws = Workspace {
            min: ws.min.cast(),
            max: ws.max.cast(),
        };
        Self {
            ws,
            scale,
            margin: 10.0,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn x(&self, east: f64) -> f64 {
        self.margin + (east - self.ws.min.east) * self.scale
    }

    fn y(&self, north: f64) -> f64 {
        self.margin + (self.ws.max.north - north) * self.scale
    }

    fn xy<T: Real>(&self, p: Point2<T>) -> (f64, f64) {
        (self.x(p.east.as_f64()), self.y(p.north.as_f64()))
    }

    fn width(&self) -> f64 {
        2.0 * self.margin + (self.ws.max.east - self.ws.min.east) * self.scale
    }

    fn height(&self) -> f64 {
        2.0 * self.margin + (self.ws.max.north - self.ws.min.north) * self.scale
    }

    /// Shades each cell red with opacity proportional to `value / ceiling`.
    pub fn risk_map<T: Real>(&mut self, map: &RiskMap<T>) -> &mut Self {
        let ceiling = map.ceiling.as_f64().max(f64::MIN_POSITIVE);
        let side = map.resolution.as_f64() * self.scale;
        for r in 0..map.rows {
            for c in 0..map.cols {
                let v = map.cell(r, c).as_f64() / ceiling;
                if v <= 0.0 {
                    continue;
                }
                let north = map.origin.north.as_f64() + (r + 1) as f64 * map.resolution.as_f64();
                let east = map.origin.east.as_f64() + c as f64 * map.resolution.as_f64();
                let _ = writeln!(
                    self.body,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#d62728" fill-opacity="{:.4}"/>"##,
                    self.x(east),
                    self.y(north),
                    side,
                    side,
                    v.min(1.0)
                );
            }
        }
        self
    }

    pub fn obstacles<T: Real>(&mut self, obstacles: &[Obstacle<T>]) -> &mut Self {
        for ob in obstacles {
            let fill = if ob.is_dynamic() {
                "#ff7f0e"
            } else {
                "#555555"
            };
            match &ob.shape {
                Shape::Circle { center, radius } => {
                    let (x, y) = self.xy(*center);
                    let _ = writeln!(
                        self.body,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{fill}"/>"#,
                        x,
                        y,
                        radius.as_f64() * self.scale
                    );
                }
                Shape::Polygon { vertices } => {
                    let pts: Vec<String> = vertices
                        .iter()
                        .map(|v| {
                            let (x, y) = self.xy(*v);
                            format!("{x:.2},{y:.2}")
                        })
                        .collect();
                    let _ = writeln!(
                        self.body,
                        r#"<polygon points="{}" fill="{fill}"/>"#,
                        pts.join(" ")
                    );
                }
            }
            if ob.inflation > T::zero() {
                let (x, y) = self.xy(ob.center());
                let r = match &ob.shape {
                    Shape::Circle { radius, .. } => *radius + ob.inflation,
                    Shape::Polygon { vertices } => {
                        let c = ob.center();
                        vertices
                            .iter()
                            .map(|v| v.distance(c))
                            .fold(T::zero(), |a, b| a.max(b))
                            + ob.inflation
                    }
                };
                let _ = writeln!(
                    self.body,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{fill}" stroke-dasharray="3,2"/>"#,
                    x,
                    y,
                    r.as_f64() * self.scale
                );
            }
        }
        self
    }

    pub fn shoreline<T: Real>(&mut self, lines: &[Vec<Point2<T>>]) -> &mut Self {
        for line in lines {
            self.raw_polyline(line, "#8b5a2b", 2.0);
        }
        self
    }

    /// Tree edges in light gray.
    pub fn tree<T: Real>(&mut self, tree: &Tree<T>) -> &mut Self {
        for n in tree.nodes() {
            if let Some(p) = n.parent {
                let (x1, y1) = self.xy(tree.node(p).state);
                let (x2, y2) = self.xy(n.state);
                let _ = writeln!(
                    self.body,
                    r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#bbbbbb" stroke-width="0.5"/>"##
                );
            }
        }
        self
    }

    fn raw_polyline<T: Real>(&mut self, points: &[Point2<T>], color: &str, width: f64) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|v| {
                let (x, y) = self.xy(*v);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width:.2}"/>"#,
            pts.join(" ")
        );
    }

    /// A polyline with a legend entry.
    pub fn path<T: Real>(&mut self, points: &[Point2<T>], color: &str, label: &str) -> &mut Self {
        self.raw_polyline(points, color, 2.0);
        self.legend.push((color.to_string(), label.to_string()));
        self
    }

    pub fn marker<T: Real>(&mut self, p: Point2<T>, color: &str) -> &mut Self {
        let (x, y) = self.xy(p);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.00" fill="{color}"/>"#
        );
        self
    }

    pub fn title(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            self.margin,
            self.margin - 1.0,
            escape(text)
        );
        self
    }

    pub fn finish(&self) -> String {
        let (w, h) = (self.width(), self.height());
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
        );
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#eef5fb" stroke="#333333"/>"##,
            self.margin,
            self.margin,
            w - 2.0 * self.margin,
            h - 2.0 * self.margin
        );
        out.push_str(&self.body);
        for (i, (color, label)) in self.legend.iter().enumerate() {
            let y = self.margin + 14.0 + 14.0 * i as f64;
            let x = w - self.margin - 110.0;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2.00"/>"#,
                x,
                y - 4.0,
                x + 16.0,
                y - 4.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#,
                x + 20.0,
                y,
                escape(label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Workspace<f64> {
        Workspace::new(Point2::new(0.0, 0.0), Point2::new(50.0, 100.0)).unwrap()
    }

    #[test]
    fn orientation_and_size() {
        let f = Figure::new(&ws(), 2.0);
        assert_eq!(f.width(), 220.0);
        assert_eq!(f.height(), 120.0);
        assert_eq!(f.xy(Point2::new(50.0, 0.0)), (10.0, 10.0));
        assert_eq!(f.xy(Point2::new(0.0, 100.0)), (210.0, 110.0));
    }

    #[test]
    fn legend_and_escape() {
        let mut f = Figure::new(&ws(), 1.0);
        f.path(
            &[Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)],
            PALETTE[0],
            "a<b",
        );
        f.path(
            &[Point2::new(0.0, 0.0), Point2::new(20.0, 10.0)],
            PALETTE[1],
            "c",
        );
        let s = f.finish();
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("a&lt;b"));
        assert!(s.ends_with("</svg>\n"));
        assert_eq!(s, f.finish());
    }

    #[test]
    fn map_cells_skip_zero() {
        let mut map = RiskMap::uniform(&ws(), 10.0, 2.0, 0.0);
        map.values[3] = 1.0;
        let mut f = Figure::new(&ws(), 1.0);
        f.risk_map(&map);
        assert_eq!(f.finish().matches("fill-opacity").count(), 1);
        assert!(f.finish().contains(r#"fill-opacity="0.5000""#));
    }
}
