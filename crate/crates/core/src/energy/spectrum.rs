//! Finite-difference gradients, Hessians, and spectrum reports.
//!
//! Hessians are assembled from second-order central differences, symmetrized
//! by averaging, and diagonalized with a dense symmetric eigensolve. The
//! projected positive-semidefiniteness check removes numerically detected
//! near-zero modes (the domain symmetry orbit of the configuration) before
//! reading off the minimum eigenvalue; the removed count is always reported
//! and never assumed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{
    centroid_energy, edge_energy, electrostatic_total, EnergyError, Quadrature,
};
use crate::geometry::{tessellate, Configuration, Domain, Point};

/// Modes with |λ| below this fraction of the largest eigenvalue are treated
/// as symmetry modes and projected out of the definiteness check.
pub const NEAR_ZERO_FACTOR: f64 = 1e-4;

/// Projected minimum eigenvalue must be at least -PSD_TOL_FACTOR · λ_max.
pub const PSD_TOL_FACTOR: f64 = 1e-5;

/// Default finite-difference step: balances truncation against roundoff at
/// double precision for energies of order one.
pub fn default_fd_step(domain: &Domain) -> f64 {
    1e-5 * domain.diameter()
}

/// Eigenvalue summary of a numeric Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Count of |λ| < zero_tol.
    pub num_near_zero: usize,
    pub zero_tol: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        assert!(!eigenvalues.is_empty());
        eigenvalues.sort_by(f64::total_cmp);
        let lam_max = *eigenvalues.last().unwrap();
        let zero_tol = (NEAR_ZERO_FACTOR * lam_max).max(0.0);
        let num_near_zero = eigenvalues.iter().filter(|l| l.abs() < zero_tol).count();
        SpectrumReport {
            min_eigenvalue: eigenvalues[0],
            num_near_zero,
            zero_tol,
            eigenvalues,
        }
    }
}

/// Definiteness verdict after projecting out near-zero symmetry modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSpectrum {
    pub spectrum: SpectrumReport,
    pub max_eigenvalue: f64,
    /// Number of near-zero modes removed before the check.
    pub num_projected: usize,
    /// Minimum eigenvalue among retained modes (0 if none retained).
    pub min_projected: f64,
    /// min_projected >= -PSD_TOL_FACTOR · max(λ_max, 0).
    pub passed: bool,
    /// Eigenvector of the violating eigenvalue, present only on failure.
    pub offending_eigenvector: Option<Vec<f64>>,
}

/// Eigensolve with eigenvectors, then the projected definiteness check.
pub fn projected_spectrum(hessian: &DMatrix<f64>) -> ProjectedSpectrum {
    let eigen = hessian.clone().symmetric_eigen();
    let n = eigen.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();

    let spectrum = SpectrumReport::from_eigenvalues(eigenvalues.clone());
    let lam_max = *eigenvalues.last().unwrap();
    let mut min_projected = 0.0;
    let mut min_index = None;
    for (rank, &lam) in eigenvalues.iter().enumerate() {
        if lam.abs() >= spectrum.zero_tol {
            min_projected = lam;
            min_index = Some(order[rank]);
            break;
        }
    }
    let passed = min_projected >= -PSD_TOL_FACTOR * lam_max.max(0.0);
    let offending_eigenvector = if passed {
        None
    } else {
        min_index.map(|col| eigen.eigenvectors.column(col).iter().copied().collect())
    };
    ProjectedSpectrum {
        num_projected: spectrum.num_near_zero,
        max_eigenvalue: lam_max,
        min_projected,
        passed,
        offending_eigenvector,
        spectrum,
    }
}

/// Central-difference gradient of `f` in all 2N generator coordinates.
///
/// Every perturbed evaluation must stay strictly inside the domain;
/// configurations closer than `h` to the boundary are rejected.
pub fn numeric_gradient<F>(
    f: &F,
    config: &Configuration,
    domain: &Domain,
    h: f64,
) -> Result<Vec<f64>, EnergyError>
where
    F: Fn(&[Point]) -> f64 + Sync,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let base = config.points();
    let dims = 2 * base.len();

    let entry = |k: usize| -> Result<f64, EnergyError> {
        let plus = perturbed(base, domain, &[(k, h)])?;
        let minus = perturbed(base, domain, &[(k, -h)])?;
        Ok((f(&plus) - f(&minus)) / (2.0 * h))
    };

    #[cfg(feature = "parallel")]
    let grad: Result<Vec<f64>, EnergyError> = (0..dims).into_par_iter().map(entry).collect();
    #[cfg(not(feature = "parallel"))]
    let grad: Result<Vec<f64>, EnergyError> = (0..dims).map(entry).collect();
    grad
}

/// Full symmetric 2N×2N second-difference Hessian of `f`.
pub fn numeric_hessian_matrix<F>(
    f: &F,
    config: &Configuration,
    domain: &Domain,
    h: f64,
) -> Result<DMatrix<f64>, EnergyError>
where
    F: Fn(&[Point]) -> f64 + Sync,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let base = config.points();
    let dims = 2 * base.len();
    let f0 = f(base);

    let mut entries = Vec::with_capacity(dims * (dims + 1) / 2);
    for k in 0..dims {
        for l in k..dims {
            entries.push((k, l));
        }
    }

    let eval = |&(k, l): &(usize, usize)| -> Result<(usize, usize, f64), EnergyError> {
        let v = if k == l {
            let fp = f(&perturbed(base, domain, &[(k, h)])?);
            let fm = f(&perturbed(base, domain, &[(k, -h)])?);
            (fp - 2.0 * f0 + fm) / (h * h)
        } else {
            let fpp = f(&perturbed(base, domain, &[(k, h), (l, h)])?);
            let fpm = f(&perturbed(base, domain, &[(k, h), (l, -h)])?);
            let fmp = f(&perturbed(base, domain, &[(k, -h), (l, h)])?);
            let fmm = f(&perturbed(base, domain, &[(k, -h), (l, -h)])?);
            (fpp - fpm - fmp + fmm) / (4.0 * h * h)
        };
        Ok((k, l, v))
    };

    #[cfg(feature = "parallel")]
    let computed: Result<Vec<_>, EnergyError> = entries.par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let computed: Result<Vec<_>, EnergyError> = entries.iter().map(eval).collect();

    let mut hess = DMatrix::zeros(dims, dims);
    for (k, l, v) in computed? {
        hess[(k, l)] = v;
        hess[(l, k)] = v;
    }
    // The stencil is already symmetric; averaging guards against any future
    // asymmetric assembly.
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok(sym)
}

/// Hessian spectrum of `f` at `config`: assemble, symmetrize, eigensolve.
pub fn numeric_hessian<F>(
    f: &F,
    config: &Configuration,
    domain: &Domain,
    h: f64,
) -> Result<SpectrumReport, EnergyError>
where
    F: Fn(&[Point]) -> f64 + Sync,
{
    let hess = numeric_hessian_matrix(f, config, domain, h)?;
    let eigen = hess.symmetric_eigen();
    Ok(SpectrumReport::from_eigenvalues(
        eigen.eigenvalues.iter().copied().collect(),
    ))
}

fn perturbed(
    base: &[Point],
    domain: &Domain,
    moves: &[(usize, f64)],
) -> Result<Vec<Point>, EnergyError> {
    let mut pts = base.to_vec();
    for &(coord, delta) in moves {
        let gen = coord / 2;
        if coord % 2 == 0 {
            pts[gen].x += delta;
        } else {
            pts[gen].y += delta;
        }
    }
    for &(coord, _) in moves {
        let gen = coord / 2;
        if !domain.contains_strictly(pts[gen]) {
            return Err(EnergyError::PerturbationExitsDomain {
                coordinate: coord,
                generator: gen,
            });
        }
    }
    Ok(pts)
}

/// The three functionals whose second variations the verification harness
/// compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Centroid,
    EdgeWeighted,
    Electrostatic,
}

impl Functional {
    pub const ALL: [Functional; 3] = [
        Functional::Centroid,
        Functional::EdgeWeighted,
        Functional::Electrostatic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Functional::Centroid => "centroid",
            Functional::EdgeWeighted => "edge_weighted",
            Functional::Electrostatic => "electrostatic",
        }
    }

    /// Evaluates the functional on raw interior points. Callers (the FD
    /// drivers) guarantee interiority and separation, so failures here are
    /// genuine bugs and panic.
    pub fn eval(self, points: &[Point], domain: &Domain, quad: &Quadrature) -> f64 {
        match self {
            Functional::Centroid | Functional::EdgeWeighted => {
                let config = Configuration::from_points_unchecked(points.to_vec());
                let tess = tessellate(domain, &config).expect("valid interior points");
                if self == Functional::Centroid {
                    centroid_energy(&tess, &config).expect("sizes match")
                } else {
                    edge_energy(&tess, &config).expect("sizes match")
                }
            }
            Functional::Electrostatic => electrostatic_total(points, domain, quad)
                .expect_finite("FD driver keeps points interior"),
        }
    }
}

/// Projected spectra of all three functionals at one configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvtSpectra {
    pub centroid: ProjectedSpectrum,
    pub edge_weighted: ProjectedSpectrum,
    pub electrostatic: ProjectedSpectrum,
}

impl CvtSpectra {
    pub fn all_passed(&self) -> bool {
        self.centroid.passed && self.edge_weighted.passed && self.electrostatic.passed
    }

    pub fn get(&self, functional: Functional) -> &ProjectedSpectrum {
        match functional {
            Functional::Centroid => &self.centroid,
            Functional::EdgeWeighted => &self.edge_weighted,
            Functional::Electrostatic => &self.electrostatic,
        }
    }
}

/// Assembles the three numeric Hessians at `config` (intended to be a
/// Lloyd-converged CVT) and runs the projected definiteness check on each.
pub fn cvt_spectra(
    domain: &Domain,
    config: &Configuration,
    quad: &Quadrature,
    h: f64,
) -> Result<CvtSpectra, EnergyError> {
    let mut out = Vec::with_capacity(3);
    for functional in Functional::ALL {
        let f = |pts: &[Point]| functional.eval(pts, domain, quad);
        let hess = numeric_hessian_matrix(&f, config, domain, h)?;
        out.push(projected_spectrum(&hess));
    }
    let electrostatic = out.pop().unwrap();
    let edge_weighted = out.pop().unwrap();
    let centroid = out.pop().unwrap();
    Ok(CvtSpectra {
        centroid,
        edge_weighted,
        electrostatic,
    })
}
