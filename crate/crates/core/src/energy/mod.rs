//! The three energy functionals and their finite-difference analysis.
//!
//! * Centroid energy: E = Σ_i ∫_{V_i} |x - p_i|² dx, evaluated exactly from
//!   polygon moments.
//! * Edge-weighted energy: Ẽ = Σ_{i<j} ℓ_ij |p_i - p_j|², summed over shared
//!   Voronoi edges only.
//! * Electrostatic energy: U = Σ_i Σ_{j≠i} 1/d_ij + Σ_i ∫_{∂Ω} σ/|x_i - y| dS,
//!   with uniform σ = N/perimeter so the boundary carries total charge N.
//!
//! Evaluating the potential at a point on or outside the boundary yields the
//! distinguished [`Potential::Infinite`] value rather than a floating-point
//! infinity; the annealer turns that into unconditional rejection.

mod quadrature;
mod spectrum;

pub use quadrature::Quadrature;
pub use spectrum::{
    cvt_spectra, default_fd_step, numeric_gradient, numeric_hessian, numeric_hessian_matrix,
    projected_spectrum, CvtSpectra, Functional, ProjectedSpectrum, SpectrumReport,
    NEAR_ZERO_FACTOR, PSD_TOL_FACTOR,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    tessellate, Configuration, Domain, GeometryError, Point, Tessellation, MIN_SEPARATION,
};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("tessellation has {cells} cells but the configuration has {generators} generators")]
    MismatchedSizes { cells: usize, generators: usize },
    #[error("quadrature needs at least 2 points per edge, got {points_per_edge}")]
    InvalidQuadrature { points_per_edge: usize },
    #[error(
        "perturbing coordinate {coordinate} (generator {generator}) by h leaves the domain; \
         reduce the step"
    )]
    PerturbationExitsDomain { coordinate: usize, generator: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A potential value under hard-wall semantics: exterior evaluation points
/// have infinite energy, kept distinct from finite arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    Finite(f64),
    Infinite,
}

impl Potential {
    pub fn is_infinite(self) -> bool {
        matches!(self, Potential::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Potential::Finite(v) => Some(v),
            Potential::Infinite => None,
        }
    }

    /// Unwraps a value the caller has proven finite (e.g. every generator
    /// strictly interior).
    pub fn expect_finite(self, context: &str) -> f64 {
        match self {
            Potential::Finite(v) => v,
            Potential::Infinite => panic!("unexpected infinite potential: {context}"),
        }
    }
}

/// All five energies of a configuration in one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub centroid_energy: f64,
    pub edge_energy: f64,
    pub pair_energy: f64,
    pub boundary_energy: f64,
    /// pair_energy + boundary_energy, the annealing Hamiltonian U.
    pub total_electrostatic: f64,
}

/// E = Σ_i ∫_{V_i} |x - p_i|² dx over the cells of `tess`.
pub fn centroid_energy(tess: &Tessellation, config: &Configuration) -> Result<f64, EnergyError> {
    check_sizes(tess, config)?;
    let mut total = 0.0;
    for (cell, &p) in tess.cells().iter().zip(config.points()) {
        total += cell.second_moment(p)?;
    }
    Ok(total)
}

/// Ẽ = Σ ℓ_ij |p_i - p_j|² over shared Voronoi edges; zero for N = 1.
pub fn edge_energy(tess: &Tessellation, config: &Configuration) -> Result<f64, EnergyError> {
    check_sizes(tess, config)?;
    let pts = config.points();
    Ok(tess
        .edges()
        .iter()
        .map(|e| e.length * pts[e.i].distance_sq(pts[e.j]))
        .sum())
}

fn check_sizes(tess: &Tessellation, config: &Configuration) -> Result<(), EnergyError> {
    if tess.len() != config.len() {
        return Err(EnergyError::MismatchedSizes {
            cells: tess.len(),
            generators: config.len(),
        });
    }
    Ok(())
}

/// Σ_i Σ_{j≠i} 1/d_ij: every unordered pair contributes twice.
pub fn pair_energy(points: &[Point]) -> f64 {
    let mut total = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            total += 2.0 / points[i].distance(points[j]);
        }
    }
    total
}

/// Analytic gradient of [`pair_energy`] in the flattened coordinates
/// (x_0, y_0, x_1, y_1, …): ∂/∂x_i Σ_{j≠i} 2/d_ij = −Σ_{j≠i} 2(x_i−x_j)/d_ij³.
pub fn pair_gradient(points: &[Point]) -> Vec<f64> {
    let mut grad = vec![0.0; 2 * points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i].x - points[j].x;
            let dy = points[i].y - points[j].y;
            let d3 = (dx * dx + dy * dy).sqrt().powi(3);
            let (gx, gy) = (-2.0 * dx / d3, -2.0 * dy / d3);
            grad[2 * i] += gx;
            grad[2 * i + 1] += gy;
            grad[2 * j] -= gx;
            grad[2 * j + 1] -= gy;
        }
    }
    grad
}

/// Potential at `p` from the uniformly charged boundary, σ = n_charges /
/// perimeter. Exterior or boundary points are the hard-wall case and give
/// [`Potential::Infinite`].
pub fn boundary_potential(
    p: Point,
    domain: &Domain,
    n_charges: usize,
    quad: &Quadrature,
) -> Potential {
    if !domain.contains_strictly(p) {
        return Potential::Infinite;
    }
    let sigma = domain.charge_density(n_charges);
    let mut total = 0.0;
    for (a, b) in domain.boundary_edges() {
        total += quad.integrate_edge(a, b, |y| 1.0 / p.distance(y));
    }
    Potential::Finite(sigma * total)
}

/// Σ_i boundary_potential(x_i). Infinite if any point is not strictly
/// interior.
pub fn boundary_energy(
    points: &[Point],
    domain: &Domain,
    quad: &Quadrature,
) -> Potential {
    let mut total = 0.0;
    for &p in points {
        match boundary_potential(p, domain, points.len(), quad) {
            Potential::Finite(v) => total += v,
            Potential::Infinite => return Potential::Infinite,
        }
    }
    Potential::Finite(total)
}

/// The annealing Hamiltonian U = pair + boundary over raw points, honoring
/// the hard wall: any point on or outside ∂Ω makes the total Infinite.
/// Coincident points are likewise Infinite (the 1/r singularity).
pub fn electrostatic_total(points: &[Point], domain: &Domain, quad: &Quadrature) -> Potential {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance(points[j]) <= MIN_SEPARATION {
                return Potential::Infinite;
            }
        }
    }
    match boundary_energy(points, domain, quad) {
        Potential::Finite(b) => Potential::Finite(pair_energy(points) + b),
        Potential::Infinite => Potential::Infinite,
    }
}

/// Full energy report for a valid configuration: pair and boundary terms of
/// U plus the two centroidal diagnostics from a fresh tessellation.
pub fn electrostatic_energy(
    config: &Configuration,
    domain: &Domain,
    quad: &Quadrature,
) -> Result<EnergyReport, EnergyError> {
    let tess = tessellate(domain, config)?;
    let centroid = centroid_energy(&tess, config)?;
    let edge = edge_energy(&tess, config)?;
    let pair = pair_energy(config.points());
    let boundary = boundary_energy(config.points(), domain, quad)
        .expect_finite("configuration invariant guarantees interior points");
    Ok(EnergyReport {
        centroid_energy: centroid,
        edge_energy: edge,
        pair_energy: pair,
        boundary_energy: boundary,
        total_electrostatic: pair + boundary,
    })
}
