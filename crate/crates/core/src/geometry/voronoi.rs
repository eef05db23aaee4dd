//! Clipped Voronoi tessellation by per-generator half-plane clipping.
//!
//! Each cell starts as the full domain polygon and is cut by the bisector
//! half-plane of every other generator, nearest generators first. Edge
//! provenance (domain edge or bisector against generator j) is carried
//! through the clipping, so shared-edge adjacency comes from the bisector
//! pair itself rather than from floating-point segment matching.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{Configuration, ConvexPolygon, Domain, GeometryError, Point};

/// A positive-length Voronoi edge shared by cells `i` and `j`, with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedEdge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// Voronoi cells clipped to the domain, with cached areas, centroids, and
/// shared-edge adjacency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tessellation {
    cells: Vec<ConvexPolygon>,
    areas: Vec<f64>,
    centroids: Vec<Point>,
    edges: Vec<SharedEdge>,
}

impl Tessellation {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[ConvexPolygon] {
        &self.cells
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    /// Adjacency list: each entry has `i < j` and positive length, and
    /// appears exactly once.
    pub fn edges(&self) -> &[SharedEdge] {
        &self.edges
    }
}

/// Where a clipped-cell edge came from.
#[derive(Clone, Copy, Debug, PartialEq)]
enum EdgeSource {
    /// Part of domain boundary edge k.
    Boundary(usize),
    /// Part of the bisector against generator j.
    Bisector(usize),
}

/// Convex polygon under construction: `labels[k]` is the provenance of the
/// directed edge from `verts[k]` to `verts[(k+1) % len]`.
#[derive(Clone)]
struct LabeledCell {
    verts: Vec<Point>,
    labels: Vec<EdgeSource>,
}

impl LabeledCell {
    fn from_domain(domain: &Domain) -> Self {
        LabeledCell {
            verts: domain.vertices().to_vec(),
            labels: (0..domain.vertices().len()).map(EdgeSource::Boundary).collect(),
        }
    }

    /// Keeps the part of the cell satisfying n·x <= c. Newly created edges
    /// along the clip line get `label`. Vertices exactly on the line count
    /// as inside, so grazing cuts add no edge.
    fn clip(&mut self, n: Point, c: f64, label: EdgeSource, weld_eps: f64) {
        let m = self.verts.len();
        let signed: Vec<f64> = self.verts.iter().map(|&v| c - n.dot(v)).collect();
        if signed.iter().all(|&s| s >= 0.0) {
            return;
        }

        let mut verts = Vec::with_capacity(m + 2);
        let mut labels = Vec::with_capacity(m + 2);
        for k in 0..m {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % m];
            let sa = signed[k];
            let sb = signed[(k + 1) % m];
            let lab = self.labels[k];
            if sa >= 0.0 {
                verts.push(a);
                labels.push(lab);
            }
            if (sa >= 0.0) != (sb >= 0.0) {
                let t = sa / (sa - sb);
                let x = a + (b - a) * t;
                if sa >= 0.0 {
                    // Exiting: boundary continues along the clip line.
                    verts.push(x);
                    labels.push(label);
                } else {
                    // Entering: boundary resumes along the original edge.
                    verts.push(x);
                    labels.push(lab);
                }
            }
        }

        // Weld coincident consecutive vertices born from grazing cuts.
        // Dropping entry k removes the zero-length edge labels[k]; the
        // preceding edge then ends at verts[k+1], which coincides with
        // verts[k].
        let m2 = verts.len();
        if m2 >= 2 {
            let keep: Vec<bool> = (0..m2)
                .map(|k| verts[k].distance(verts[(k + 1) % m2]) > weld_eps)
                .collect();
            if keep.iter().any(|&k| !k) {
                let mut wv = Vec::with_capacity(m2);
                let mut wl = Vec::with_capacity(m2);
                for k in 0..m2 {
                    if keep[k] {
                        wv.push(verts[k]);
                        wl.push(labels[k]);
                    }
                }
                verts = wv;
                labels = wl;
            }
        }

        self.verts = verts;
        self.labels = labels;
    }

    /// Largest distance from `p` to a vertex; the cell lies in the disk of
    /// this radius around `p`.
    fn radius_about(&self, p: Point) -> f64 {
        self.verts
            .iter()
            .map(|v| v.distance(p))
            .fold(0.0_f64, f64::max)
    }
}

/// Computes the Voronoi tessellation of `config` clipped to `domain`.
///
/// O(N^2): each of the N cells is clipped against the bisectors of all
/// nearer generators until the security radius rules the rest out.
pub fn tessellate(
    domain: &Domain,
    config: &Configuration,
) -> Result<Tessellation, GeometryError> {
    let pts = config.points();
    let n = pts.len();
    let weld_eps = 1e-12 * domain.diameter();

    let build = |i: usize| -> Result<(ConvexPolygon, Vec<(usize, f64)>), GeometryError> {
        let xi = pts[i];
        let mut cell = LabeledCell::from_domain(domain);

        // Nearest bisectors first: the cell shrinks fast and the security
        // radius lets us skip generators more than twice the cell radius away.
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            pts[a]
                .distance_sq(xi)
                .total_cmp(&pts[b].distance_sq(xi))
                .then(a.cmp(&b))
        });

        let mut radius = cell.radius_about(xi);
        for &j in &order {
            let d = pts[j].distance(xi);
            if d > 2.0 * radius {
                break;
            }
            // Half-plane of points no farther from x_i than from x_j.
            let nvec = pts[j] - xi;
            let c = 0.5 * (pts[j].norm_sq() - xi.norm_sq());
            cell.clip(nvec, c, EdgeSource::Bisector(j), weld_eps);
            if cell.verts.len() < 3 {
                return Err(GeometryError::EmptyCell { index: i });
            }
            radius = cell.radius_about(xi);
        }

        let mut half_edges = Vec::new();
        for (k, lab) in cell.labels.iter().enumerate() {
            if let EdgeSource::Bisector(j) = *lab {
                let len = cell.verts[k].distance(cell.verts[(k + 1) % cell.verts.len()]);
                half_edges.push((j, len));
            }
        }
        Ok((ConvexPolygon::from_ccw_vertices(cell.verts), half_edges))
    };

    #[cfg(feature = "parallel")]
    let built: Result<Vec<_>, GeometryError> = (0..n).into_par_iter().map(build).collect();
    #[cfg(not(feature = "parallel"))]
    let built: Result<Vec<_>, GeometryError> = (0..n).map(build).collect();
    let built = built?;

    // Merge half-edges from both sides. A genuine shared edge is seen from
    // both cells with matching length; grazing contacts (shared corner
    // only) produce nothing or a sub-threshold sliver and are dropped.
    let edge_eps = 1e-10 * domain.diameter();
    let mut merged: std::collections::BTreeMap<(usize, usize), [Option<f64>; 2]> =
        std::collections::BTreeMap::new();
    for (i, (_, half_edges)) in built.iter().enumerate() {
        for &(j, len) in half_edges {
            let key = (i.min(j), i.max(j));
            let slot = usize::from(i > j);
            let entry = merged.entry(key).or_default();
            entry[slot] = Some(entry[slot].unwrap_or(0.0) + len);
        }
    }
    let mut edges = Vec::new();
    for ((i, j), sides) in merged {
        if let [Some(a), Some(b)] = sides {
            let length = 0.5 * (a + b);
            if length > edge_eps {
                debug_assert!(
                    (a - b).abs() <= 1e-6 * length.max(1.0),
                    "shared edge ({i},{j}) disagrees between sides: {a} vs {b}"
                );
                edges.push(SharedEdge { i, j, length });
            }
        }
    }

    let mut cells = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    let mut centroids = Vec::with_capacity(n);
    for (i, (poly, _)) in built.into_iter().enumerate() {
        let area = poly.area();
        if !(area > 0.0) {
            return Err(GeometryError::EmptyCell { index: i });
        }
        debug_assert!(
            poly.contains(pts[i], 1e-9),
            "cell {i} does not contain its generator"
        );
        areas.push(area);
        centroids.push(poly.centroid());
        cells.push(poly);
    }

    Ok(Tessellation {
        cells,
        areas,
        centroids,
        edges,
    })
}
