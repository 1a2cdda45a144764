//! SVG figures on the projective disk.
//!
//! A unit vector is drawn at its upper-hemisphere representative projected on
//! the `(L1, L2)` plane, so antipodal points of the boundary circle are the
//! same point. Polylines that cross the equator are split there and continue
//! from the antipodal boundary point.
//!
//! Output is a pure function of the input: coordinates are printed with a
//! fixed number of decimals and elements are emitted in input order.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::atlas::{RegionSample, TopType};
use crate::separatrix::SeparatrixGraph;
use crate::stationary::{canonical_representative, Stability};
use crate::Real3;

const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub u: f64,
    pub v: f64,
    pub boundary: bool,
}

/// Projects a unit vector onto the projective disk.
pub fn to_disk(p: &Real3) -> DiskPoint {
    let q = canonical_representative(p);
    let r2 = q[0] * q[0] + q[1] * q[1];
    DiskPoint { u: q[0], v: q[1], boundary: (r2 - 1.0).abs() <= BOUNDARY_TOL }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    /// Width and height of the square canvas in user units.
    pub size: f64,
    pub title: Option<String>,
    /// Extra trajectories drawn dashed under the net, as unit vectors.
    pub overlays: Vec<Vec<Real3>>,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self { size: 480.0, title: None, overlays: Vec::new() }
    }
}

/// Fixed colours for Types I to IV and the boundary class.
pub fn type_colour(t: TopType) -> &'static str {
    match t {
        TopType::I => "#4e79a7",
        TopType::II => "#f28e2b",
        TopType::III => "#59a14f",
        TopType::IV => "#e15759",
        TopType::Marginal => "#bab0ac",
    }
}

struct Canvas {
    size: f64,
    out: String,
}

impl Canvas {
    fn new(size: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s:.0}" height="{s:.0}" viewBox="0 0 {s:.0} {s:.0}">"#,
            s = size
        );
        Self { size, out }
    }

    fn radius(&self) -> f64 {
        0.42 * self.size
    }

    fn xy(&self, u: f64, v: f64) -> (f64, f64) {
        let c = 0.5 * self.size;
        (c + self.radius() * u, c - self.radius() * v)
    }

    fn title(&mut self, title: &Option<String>) {
        if let Some(t) = title {
            let _ = writeln!(
                self.out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
                0.5 * self.size,
                0.05 * self.size,
                escape(t)
            );
        }
    }

    fn boundary(&mut self) {
        let (cx, cy) = self.xy(0.0, 0.0);
        let _ = writeln!(
            self.out,
            r#"<circle class="boundary" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="black" stroke-width="1.5"/>"#,
            self.radius()
        );
    }

    fn path(&mut self, class: &str, pts: &[(f64, f64)], dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (k, (u, v)) in pts.iter().enumerate() {
            let (x, y) = self.xy(*u, *v);
            let _ = write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" });
        }
        let dash = if dashed { r#" stroke-dasharray="4,3""# } else { "" };
        let (colour, width) = if dashed { ("#777777", 0.8) } else { ("black", 1.2) };
        let _ = writeln!(
            self.out,
            r#"<path class="{class}" d="{d}" fill="none" stroke="{colour}" stroke-width="{width}"{dash}/>"#
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn hemisphere_sign(p: &Real3) -> f64 {
    if canonical_representative(p) == *p {
        1.0
    } else {
        -1.0
    }
}

/// Splits a sphere polyline into disk polylines, breaking where it crosses
/// the equator and resuming from the antipodal boundary point.
pub fn split_on_disk(line: &[Real3]) -> Vec<Vec<(f64, f64)>> {
    let mut pieces = Vec::new();
    let Some(first) = line.first() else {
        return pieces;
    };
    let mut sign = hemisphere_sign(first);
    let mut current = vec![(sign * first[0], sign * first[1])];
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sb = hemisphere_sign(&b);
        if sb != sign && a[2] != b[2] {
            let s = a[2] / (a[2] - b[2]);
            let q = (a + (b - a) * s).normalize();
            current.push((sign * q[0], sign * q[1]));
            pieces.push(std::mem::take(&mut current));
            current.push((sb * q[0], sb * q[1]));
        }
        sign = sb;
        current.push((sign * b[0], sign * b[1]));
    }
    pieces.push(current);
    pieces
}

/// Draws a projective separatrix net with optional dashed overlays.
pub fn render_net(g: &SeparatrixGraph, style: &RenderStyle) -> String {
    let mut c = Canvas::new(style.size);
    c.title(&style.title);
    c.boundary();
    for line in &style.overlays {
        let unit: Vec<Real3> = line.iter().map(|p| p.normalize()).collect();
        for piece in split_on_disk(&unit) {
            c.path("overlay", &piece, true);
        }
    }
    for e in &g.edges {
        for piece in split_on_disk(&e.samples) {
            c.path("separatrix", &piece, false);
        }
    }
    for v in &g.vertices {
        let d = to_disk(&v.l0);
        let (x, y) = c.xy(d.u, d.v);
        let _ = match v.stability {
            Stability::Focus => writeln!(
                c.out,
                r#"<circle class="focus" cx="{x:.2}" cy="{y:.2}" r="4.00" fill="white" stroke="black" stroke-width="1.2"/>"#
            ),
            Stability::Saddle => writeln!(
                c.out,
                r#"<rect class="saddle" x="{:.2}" y="{:.2}" width="7.00" height="7.00" fill="black"/>"#,
                x - 3.5,
                y - 3.5
            ),
        };
    }
    c.finish()
}

/// Draws a region map as cells coloured by type, with a legend.
pub fn render_region_map(grid: &[RegionSample]) -> String {
    let size = 480.0;
    let mut c = Canvas::new(size);
    let spacing = grid
        .windows(2)
        .filter(|w| w[0].v == w[1].v)
        .map(|w| (w[1].u - w[0].u).abs())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let spacing = if spacing.is_finite() { spacing } else { 2.0 };
    let cell = spacing * c.radius();
    let (cx, cy) = c.xy(0.0, 0.0);
    let _ = writeln!(
        c.out,
        r#"<defs><clipPath id="disk"><circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}"/></clipPath></defs>"#,
        c.radius()
    );
    c.out.push_str("<g clip-path=\"url(#disk)\">\n");
    for s in grid {
        let (x, y) = c.xy(s.u, s.v);
        let _ = writeln!(
            c.out,
            r#"<rect class="type-{}" x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"/>"#,
            s.top.label(),
            x - 0.5 * cell,
            y - 0.5 * cell,
            type_colour(s.top)
        );
    }
    c.out.push_str("</g>\n");
    c.boundary();
    for (k, t) in [TopType::I, TopType::II, TopType::III, TopType::IV].into_iter().enumerate() {
        let y = 12.0 + 18.0 * k as f64;
        let _ = writeln!(
            c.out,
            r#"<rect class="legend" x="8.00" y="{y:.2}" width="12.00" height="12.00" fill="{}"/><text x="26.00" y="{:.2}" font-family="sans-serif" font-size="12">Type {}</text>"#,
            type_colour(t),
            y + 10.0,
            t.label()
        );
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separatrix::{quotient_antipodal, trace_quartic, TraceOptions};
    use crate::surface::EpsilonTriple;

    #[test]
    fn disk_examples() {
        let d = to_disk(&Real3::new(0.0, 0.0, -1.0));
        assert_eq!((d.u, d.v, d.boundary), (0.0, 0.0, false));
        let d = to_disk(&Real3::x());
        assert_eq!((d.u, d.v, d.boundary), (1.0, 0.0, true));
        let p = Real3::new(0.0, (3.0_f64 / 7.0).sqrt(), (4.0_f64 / 7.0).sqrt());
        let d = to_disk(&p);
        assert!((d.v - 0.6547).abs() < 1e-4 && d.u == 0.0 && !d.boundary);
        assert_eq!(to_disk(&p), to_disk(&-p));
        assert_eq!(to_disk(&-Real3::x()), to_disk(&Real3::x()));
    }

    #[test]
    fn equator_crossing_reenters_antipodally() {
        let line = [Real3::new(0.6, 0.0, 0.8), Real3::new(0.6, 0.0, -0.8)];
        let pieces = split_on_disk(&line);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].last().unwrap(), &(1.0, 0.0));
        assert_eq!(pieces[1][0], (-1.0, 0.0));
        assert_eq!(pieces[1][1], (-0.6, 0.0));
    }

    #[test]
    fn type_iv_net_glyphs_and_determinism() {
        let e = EpsilonTriple::new(-0.01, 0.0, 0.01).unwrap();
        let g = quotient_antipodal(&trace_quartic(&e, 1.0, &TraceOptions::default()).unwrap()).unwrap();
        let svg = render_net(&g, &RenderStyle::default());
        assert_eq!(svg.matches(r#"class="focus""#).count(), 2);
        assert_eq!(svg.matches(r#"class="saddle""#).count(), 1);
        assert_eq!(svg.matches(r#"class="overlay""#).count(), 0);
        assert_eq!(svg, render_net(&g, &RenderStyle::default()));
        for e in &g.edges {
            for piece in split_on_disk(&e.samples) {
                for (u, v) in piece {
                    assert!(u * u + v * v <= 1.0 + 1e-12);
                }
            }
        }
        let style = RenderStyle {
            overlays: vec![vec![Real3::new(0.1, 0.2, 1.0), Real3::new(0.2, 0.1, 1.0)]],
            ..Default::default()
        };
        assert_eq!(render_net(&g, &style).matches(r#"class="overlay""#).count(), 1);
    }

    #[test]
    fn region_map_colours() {
        let one =
            [RegionSample { u: 0.0, v: 0.0, top: TopType::II }, RegionSample { u: 0.5, v: 0.0, top: TopType::II }];
        let svg = render_region_map(&one);
        assert!(svg.contains(type_colour(TopType::II)));
        assert_eq!(svg.matches(r#"class="type-"#).count(), 2);
        assert!(!svg.contains(r#"class="type-I" "#));
        let grid = crate::atlas::sample_region_map(64).unwrap();
        let svg = render_region_map(&grid);
        for t in [TopType::I, TopType::II, TopType::III, TopType::IV] {
            assert!(svg.contains(&format!(r#"class="type-{}" "#, t.label())));
        }
        assert_eq!(svg, render_region_map(&grid));
    }
}
