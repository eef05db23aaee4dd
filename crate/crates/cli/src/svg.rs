//! Static SVG rendering of a tessellated configuration: one polygon per
//! Voronoi cell, one circle marker per generator, plus the domain outline.

use std::fmt::Write;

use anyhow::Result;
use cvt_core::{tessellate, Configuration, Domain, Point};

const CANVAS: f64 = 640.0;
const MARGIN_FRAC: f64 = 0.05;

struct Frame {
    scale: f64,
    x0: f64,
    y1: f64,
    margin: f64,
}

impl Frame {
    fn new(domain: &Domain) -> Frame {
        let (lo, hi) = domain.bounding_box();
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let margin = MARGIN_FRAC * span;
        Frame {
            scale: CANVAS / (span + 2.0 * margin),
            x0: lo.x,
            y1: hi.y,
            margin,
        }
    }

    /// Domain coordinates to canvas coordinates; SVG y grows downward.
    fn map(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.x0 + self.margin) * self.scale,
            (self.y1 - p.y + self.margin) * self.scale,
        )
    }

    fn points_attr(&self, points: &[Point]) -> String {
        let mut out = String::new();
        for (i, &p) in points.iter().enumerate() {
            let (x, y) = self.map(p);
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.3},{y:.3}");
        }
        out
    }
}

pub fn tessellation_svg(domain: &Domain, config: &Configuration) -> Result<String> {
    let tess = tessellate(domain, config)?;
    let frame = Frame::new(domain);
    let (lo, hi) = domain.bounding_box();
    let width = ((hi.x - lo.x) + 2.0 * frame.margin) * frame.scale;
    let height = ((hi.y - lo.y) + 2.0 * frame.margin) * frame.scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.3} {height:.3}\">"
    );
    let _ = writeln!(
        svg,
        "  <desc>Voronoi tessellation of {} generators</desc>",
        config.len()
    );
    for cell in tess.cells() {
        let _ = writeln!(
            svg,
            "  <polygon class=\"cell\" points=\"{}\" fill=\"#eef3f8\" stroke=\"#38506b\" stroke-width=\"1.2\"/>",
            frame.points_attr(cell.vertices())
        );
    }
    let _ = writeln!(
        svg,
        "  <polyline class=\"domain\" points=\"{}\" fill=\"none\" stroke=\"#101820\" stroke-width=\"2\"/>",
        {
            let mut outline = domain.vertices().to_vec();
            outline.push(domain.vertices()[0]);
            frame.points_attr(&outline)
        }
    );
    for &p in config.points() {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            svg,
            "  <circle class=\"generator\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3.5\" fill=\"#c0392b\"/>"
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
