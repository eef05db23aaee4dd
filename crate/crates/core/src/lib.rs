//! Centroidal Voronoi tessellations as minimizers of a generalized
//! electrostatic energy in convex 2D domains.
//!
//! The crate is organized as four layers:
//!
//! * [`geometry`]: convex domains, generator configurations, clipped
//!   Voronoi tessellations, exact polygon moments.
//! * [`energy`]: the three energy functionals (centroid, edge-weighted,
//!   electrostatic with uniform boundary charge) and the finite-difference
//!   gradient/Hessian harness with spectrum reports.
//! * [`optimize`]: Lloyd iteration and Metropolis annealing with geometric
//!   or logarithmic cooling, hard-wall confinement, and seeded determinism.
//! * [`laam`]: annealing-rate sweeps, minima clustering, lattice anchors,
//!   anchored re-optimization, and the gap/timescale table.
//!
//! With the default `parallel` feature, tessellation, Hessian assembly, and
//! multi-seed sweeps fan out over rayon; results are deterministic and
//! identical to the sequential build.

pub mod energy;
pub mod geometry;
pub mod laam;
pub mod optimize;

pub use energy::{
    boundary_energy, boundary_potential, centroid_energy, cvt_spectra, default_fd_step,
    edge_energy, electrostatic_energy, electrostatic_total, numeric_gradient, numeric_hessian,
    numeric_hessian_matrix, pair_energy, pair_gradient, projected_spectrum, CvtSpectra, EnergyError,
    EnergyReport, Functional, Potential, ProjectedSpectrum, Quadrature, SpectrumReport,
};
pub use geometry::{
    second_moment, tessellate, Configuration, ConvexPolygon, Domain, GeometryError, Point,
    SharedEdge, Tessellation,
};
pub use laam::{
    anchored_optimize, build_anchor, cluster_minima, gap_timescale_table, recover_cluster,
    sweep_rates, LaamError, LatticeAnchor, MinimaAtlas, MinimaCluster, RecoveryParams,
    RecoveryReport, Signature, TilingKind,
};
pub use optimize::{
    anneal, greedy_polish, lloyd_run, lloyd_step, metropolis_accept, metropolis_sweep, mix_seed,
    random_configuration, AnnealParams, LloydOutcome, OptimizeError, RunRecord, Schedule,
};
