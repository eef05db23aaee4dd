use serde::{Deserialize, Serialize};

use super::{GeometryError, Point};

/// Area threshold below which a cell is treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// A convex polygon with counterclockwise vertex order.
///
/// Construction sites (the domain builder and the Voronoi clipper) are
/// responsible for orientation and convexity; the polygon itself only stores
/// vertices and evaluates integral quantities over its interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub(crate) fn from_ccw_vertices(vertices: Vec<Point>) -> Self {
        debug_assert!(vertices.len() >= 3);
        ConvexPolygon { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Directed edges (v_k, v_{k+1}), wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Signed area by the shoelace formula; positive for the CCW invariant.
    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Area centroid. Undefined for degenerate polygons (area ~ 0).
    pub fn centroid(&self) -> Point {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut area2 = 0.0;
        for (a, b) in self.edges() {
            let w = a.cross(b);
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
            area2 += w;
        }
        Point::new(cx / (3.0 * area2), cy / (3.0 * area2))
    }

    /// True when `p` is inside or on the boundary, with `tol` slack in the
    /// signed edge distances.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.edges().all(|(a, b)| {
            let edge = b - a;
            edge.cross(p - a) >= -tol * edge.norm()
        })
    }

    /// Integral of |y - p|^2 over the polygon interior.
    ///
    /// Computed by fan triangulation from the first vertex; each triangle
    /// contributes its polar second moment about its own centroid plus the
    /// parallel-axis shift to `p`.
    pub fn second_moment(&self, p: Point) -> Result<f64, GeometryError> {
        let area = self.area();
        if area < DEGENERATE_AREA {
            return Err(GeometryError::DegenerateCell { area });
        }
        let v0 = self.vertices[0];
        let mut total = 0.0;
        for k in 1..self.vertices.len() - 1 {
            total += triangle_second_moment(v0, self.vertices[k], self.vertices[k + 1], p);
        }
        Ok(total)
    }

    pub fn translate(&self, v: Point) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&p| p + v).collect(),
        }
    }
}

/// Integral of |y - p|^2 over triangle (a, b, c).
///
/// The polar second moment of a triangle about its centroid is
/// A (|ab|^2 + |bc|^2 + |ca|^2) / 36; the shift to an arbitrary reference
/// point is the parallel-axis term A |g - p|^2.
fn triangle_second_moment(a: Point, b: Point, c: Point, p: Point) -> f64 {
    let area = 0.5 * (b - a).cross(c - a);
    let g = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
    let sides = a.distance_sq(b) + b.distance_sq(c) + c.distance_sq(a);
    area * (sides / 36.0 + g.distance_sq(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_poly() -> ConvexPolygon {
        ConvexPolygon::from_ccw_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
    }

    #[test]
    fn square_area_centroid_perimeter() {
        let sq = unit_square_poly();
        assert!((sq.area() - 1.0).abs() < 1e-15);
        assert!((sq.perimeter() - 4.0).abs() < 1e-15);
        let c = sq.centroid();
        assert!((c.x - 0.5).abs() < 1e-15);
        assert!((c.y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_moment_matches_closed_form() {
        // Right triangle (0,0),(1,0),(0,1) about its centroid: A(a^2+b^2+c^2)/36 = 1/18.
        let i = triangle_second_moment(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0 / 3.0, 1.0 / 3.0),
        );
        assert!((i - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_rejected() {
        let sliver = ConvexPolygon::from_ccw_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 1e-16),
        ]);
        assert!(matches!(
            sliver.second_moment(Point::new(0.0, 0.0)),
            Err(GeometryError::DegenerateCell { .. })
        ));
    }

    #[test]
    fn containment_with_tolerance() {
        let sq = unit_square_poly();
        assert!(sq.contains(Point::new(0.5, 0.5), 0.0));
        assert!(sq.contains(Point::new(0.0, 0.5), 1e-12));
        assert!(!sq.contains(Point::new(-0.1, 0.5), 1e-12));
    }
}
