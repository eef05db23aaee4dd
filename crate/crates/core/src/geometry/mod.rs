//! Convex polygonal domains, generator configurations, and clipped Voronoi
//! tessellations with exact polygon moments.
//!
//! Everything here is a pure value: domains and tessellations are immutable
//! after construction and safe to share across threads.

mod point;
mod polygon;
mod voronoi;

pub use point::Point;
pub use polygon::{ConvexPolygon, DEGENERATE_AREA};
pub use voronoi::{tessellate, SharedEdge, Tessellation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Generators closer than this are considered coincident.
pub const MIN_SEPARATION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("a polygon needs at least 3 vertices, got {got}")]
    TooFewVertices { got: usize },
    #[error("polygon is not strictly convex at vertex {vertex}")]
    NonConvex { vertex: usize },
    #[error("polygon has collinear or duplicate vertices near vertex {vertex}")]
    Degenerate { vertex: usize },
    #[error("point {index} at ({x}, {y}) is not strictly inside the domain")]
    PointOutsideDomain { index: usize, x: f64, y: f64 },
    #[error("generators {i} and {j} coincide (separation <= {MIN_SEPARATION:e})")]
    CoincidentGenerators { i: usize, j: usize },
    #[error("a configuration needs at least one generator")]
    NoGenerators,
    #[error("Voronoi cell {index} collapsed during clipping")]
    EmptyCell { index: usize },
    #[error("cell area {area:e} is below the degeneracy threshold {DEGENERATE_AREA:e}")]
    DegenerateCell { area: f64 },
}

/// A strictly convex polygonal arena with counterclockwise boundary.
///
/// Perimeter, area, and diameter are cached at construction. The uniform
/// boundary charge density is not stored here: it depends on the number of
/// interior charges and is derived via [`Domain::charge_density`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    vertices: Vec<Point>,
    perimeter: f64,
    area: f64,
    diameter: f64,
}

impl Domain {
    /// Builds a domain from polygon vertices in either orientation.
    ///
    /// The vertex order is normalized to counterclockwise. Strict convexity
    /// is required: every pair of consecutive edges must turn left, and the
    /// total turning must be one full revolution (this rejects star
    /// traversals whose cross products are all positive).
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices {
                got: vertices.len(),
            });
        }
        let mut vertices = vertices;
        let signed_area2: f64 = shoelace2(&vertices);
        if signed_area2 < 0.0 {
            vertices.reverse();
        }

        let scale = vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let n = vertices.len();
        let mut turning = 0.0;
        for k in 0..n {
            let prev = vertices[(k + n - 1) % n];
            let cur = vertices[k];
            let next = vertices[(k + 1) % n];
            let e0 = cur - prev;
            let e1 = next - cur;
            let cross = e0.cross(e1);
            if cross.abs() <= 1e-12 * scale * scale {
                return Err(GeometryError::Degenerate { vertex: k });
            }
            if cross < 0.0 {
                return Err(GeometryError::NonConvex { vertex: k });
            }
            turning += cross.atan2(e0.dot(e1));
        }
        if (turning - std::f64::consts::TAU).abs() > 1e-9 {
            // All-left turns but more than one revolution: star traversal.
            return Err(GeometryError::NonConvex { vertex: 0 });
        }

        let area = 0.5 * shoelace2(&vertices);
        let perimeter = (0..n)
            .map(|k| vertices[k].distance(vertices[(k + 1) % n]))
            .sum();
        let mut diameter = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max(vertices[i].distance(vertices[j]));
            }
        }
        Ok(Domain {
            vertices,
            perimeter,
            area,
            diameter,
        })
    }

    /// The axis-aligned unit square [0,1]^2.
    pub fn unit_square() -> Self {
        Domain::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .expect("unit square is convex")
    }

    /// Axis-aligned rectangle with one corner at `origin`.
    pub fn rectangle(origin: Point, width: f64, height: f64) -> Result<Self, GeometryError> {
        Domain::new(vec![
            origin,
            origin + Point::new(width, 0.0),
            origin + Point::new(width, height),
            origin + Point::new(0.0, height),
        ])
    }

    /// Regular k-gon inscribed in a circle of the given radius about the
    /// origin. Also the stand-in representation for disks (default k = 64).
    pub fn regular_polygon(k: usize, radius: f64) -> Result<Self, GeometryError> {
        if k < 3 {
            return Err(GeometryError::TooFewVertices { got: k });
        }
        let verts = (0..k)
            .map(|i| {
                let theta = std::f64::consts::TAU * i as f64 / k as f64;
                Point::new(radius * theta.cos(), radius * theta.sin())
            })
            .collect();
        Domain::new(verts)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Directed boundary edges in counterclockwise order.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn centroid(&self) -> Point {
        self.as_polygon().centroid()
    }

    pub fn as_polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_ccw_vertices(self.vertices.clone())
    }

    /// Uniform boundary charge density: total boundary charge equals the
    /// number of interior charges (charge neutrality).
    pub fn charge_density(&self, n_charges: usize) -> f64 {
        n_charges as f64 / self.perimeter
    }

    /// Signed distance to the boundary: positive strictly inside, zero on
    /// the boundary, negative outside (exact only near the polygon; outside
    /// it is an upper bound on -distance, which suffices for sign tests).
    pub fn signed_margin(&self, p: Point) -> f64 {
        self.boundary_edges()
            .map(|(a, b)| {
                let edge = b - a;
                edge.cross(p - a) / edge.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Strict interiority, the precondition for every potential evaluation.
    pub fn contains_strictly(&self, p: Point) -> bool {
        self.signed_margin(p) > 0.0
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn translate(&self, v: Point) -> Domain {
        Domain {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
            ..*self
        }
    }

    /// Uniform scaling about the origin. `s` must be positive.
    pub fn scale(&self, s: f64) -> Domain {
        assert!(s > 0.0, "scale factor must be positive");
        Domain {
            vertices: self.vertices.iter().map(|&p| p * s).collect(),
            perimeter: self.perimeter * s,
            area: self.area * s * s,
            diameter: self.diameter * s,
        }
    }
}

fn shoelace2(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|k| vertices[k].cross(vertices[(k + 1) % n]))
        .sum()
}

/// An ordered list of generator points, validated against a domain:
/// every point strictly inside, no two closer than [`MIN_SEPARATION`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    points: Vec<Point>,
}

impl Configuration {
    pub fn new(points: Vec<Point>, domain: &Domain) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::NoGenerators);
        }
        for (index, p) in points.iter().enumerate() {
            if !domain.contains_strictly(*p) {
                return Err(GeometryError::PointOutsideDomain {
                    index,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        check_separation(&points)?;
        Ok(Configuration { points })
    }

    /// Wraps points whose invariants are maintained by the caller (the
    /// optimizer's move loop, which only ever applies accepted interior
    /// proposals). Debug builds still verify separation.
    pub(crate) fn from_points_unchecked(points: Vec<Point>) -> Self {
        debug_assert!(check_separation(&points).is_ok());
        Configuration { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translate(&self, v: Point) -> Configuration {
        Configuration {
            points: self.points.iter().map(|&p| p + v).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Configuration {
        Configuration {
            points: self.points.iter().map(|&p| p * s).collect(),
        }
    }
}

fn check_separation(points: &[Point]) -> Result<(), GeometryError> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance(points[j]) <= MIN_SEPARATION {
                return Err(GeometryError::CoincidentGenerators { i, j });
            }
        }
    }
    Ok(())
}

/// Exact second moment of a convex cell about an arbitrary point,
/// the per-cell term of the centroid energy.
pub fn second_moment(cell: &ConvexPolygon, p: Point) -> Result<f64, GeometryError> {
    cell.second_moment(p)
}
