//! Deterministic (Lloyd) and stochastic (Metropolis annealing) minimization.
//!
//! Lloyd iteration descends the centroid energy by moving every generator to
//! its cell centroid. Annealing samples the Boltzmann distribution of the
//! total electrostatic energy under hard-wall confinement: proposals that
//! leave the domain are rejected without evaluating the potential. All
//! stochastic routines draw from a counter-based generator so a seed pins
//! the entire run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{
    boundary_potential, centroid_energy, electrostatic_energy, electrostatic_total, EnergyError,
    EnergyReport, Potential, Quadrature,
};
use crate::geometry::{
    tessellate, Configuration, Domain, GeometryError, Point, MIN_SEPARATION,
};

/// Acceptance is re-examined every this many sweeps when adaptation is on.
pub const ADAPT_WINDOW: u64 = 50;

/// Window acceptance below this rate halves the proposal scale.
pub const ADAPT_THRESHOLD: f64 = 0.1;

/// Greedy polish stops after this many consecutive rejected proposals.
pub const POLISH_REJECTION_LIMIT: u64 = 500;

/// Greedy descent only accepts decreases beyond this relative margin, so
/// roundoff noise in the incremental energy cannot masquerade as progress.
const GREEDY_DECREASE_TOL: f64 = 1e-12;

/// Proposal scale never adapts below this fraction of the domain diameter.
const PROPOSAL_FLOOR_FACTOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid schedule: {reason}")]
    InvalidSchedule { reason: String },
    #[error("sweep index {t} is outside a schedule of {steps} steps")]
    IndexOutOfSchedule { t: u64, steps: u64 },
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Cooling schedule: geometric T(t) = t0·alpha^t or logarithmic
/// T(t) = c / ln(t+2), both over a fixed number of sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    Geometric { t0: f64, alpha: f64, steps: u64 },
    Logarithmic { c: f64, steps: u64 },
}

impl Schedule {
    pub fn geometric(t0: f64, alpha: f64, steps: u64) -> Result<Self, OptimizeError> {
        let s = Schedule::Geometric { t0, alpha, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn logarithmic(c: f64, steps: u64) -> Result<Self, OptimizeError> {
        let s = Schedule::Logarithmic { c, steps };
        s.validate()?;
        Ok(s)
    }

    /// Geometric schedule whose last sweep runs at exactly `t_final`, which
    /// makes schedules of different lengths comparable on one time axis.
    pub fn geometric_with_ratio(t0: f64, t_final: f64, steps: u64) -> Result<Self, OptimizeError> {
        if !(t0 > 0.0 && t_final > 0.0 && t_final < t0) {
            return Err(OptimizeError::InvalidSchedule {
                reason: format!("need 0 < t_final < t0, got t0={t0}, t_final={t_final}"),
            });
        }
        if steps < 2 {
            return Err(OptimizeError::InvalidSchedule {
                reason: "ratio form needs at least 2 steps".into(),
            });
        }
        let alpha = (t_final / t0).powf(1.0 / (steps - 1) as f64);
        Schedule::geometric(t0, alpha, steps)
    }

    pub fn steps(&self) -> u64 {
        match *self {
            Schedule::Geometric { steps, .. } | Schedule::Logarithmic { steps, .. } => steps,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let fail = |reason: String| Err(OptimizeError::InvalidSchedule { reason });
        match *self {
            Schedule::Geometric { t0, alpha, steps } => {
                if steps < 1 {
                    return fail("steps must be at least 1".into());
                }
                if !(t0 > 0.0 && t0.is_finite()) {
                    return fail(format!("t0 must be positive and finite, got {t0}"));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return fail(format!("alpha must lie in (0,1), got {alpha}"));
                }
                // Deep schedules can underflow the final temperature to zero.
                if t0 * alpha.powf((steps - 1) as f64) <= 0.0 {
                    return fail(format!(
                        "temperature underflows to zero before step {steps}"
                    ));
                }
            }
            Schedule::Logarithmic { c, steps } => {
                if steps < 1 {
                    return fail("steps must be at least 1".into());
                }
                if !(c > 0.0 && c.is_finite()) {
                    return fail(format!("c must be positive and finite, got {c}"));
                }
            }
        }
        Ok(())
    }

    /// Temperature at sweep `t`; the schedule covers 0 <= t < steps.
    pub fn temperature(&self, t: u64) -> Result<f64, OptimizeError> {
        let steps = self.steps();
        if t >= steps {
            return Err(OptimizeError::IndexOutOfSchedule { t, steps });
        }
        Ok(match *self {
            Schedule::Geometric { t0, alpha, .. } => t0 * alpha.powf(t as f64),
            Schedule::Logarithmic { c, .. } => c / ((t + 2) as f64).ln(),
        })
    }
}

/// Proposal and bookkeeping knobs for one annealing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    /// Standard deviation of the isotropic Gaussian move, in length units.
    pub proposal_std: f64,
    pub seed: u64,
    /// Trajectory snapshot stride, in sweeps.
    pub record_every: u64,
    /// Halve proposal_std whenever a 50-sweep window accepts under 10%.
    pub adapt_proposal: bool,
}

impl AnnealParams {
    pub fn for_domain(domain: &Domain, seed: u64) -> Self {
        AnnealParams {
            proposal_std: 0.05 * domain.diameter(),
            seed,
            record_every: 100,
            adapt_proposal: true,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<(), OptimizeError> {
        if !(self.proposal_std > 0.0 && self.proposal_std < domain.diameter()) {
            return Err(OptimizeError::InvalidParams {
                reason: format!(
                    "proposal_std must lie in (0, diameter), got {}",
                    self.proposal_std
                ),
            });
        }
        if self.record_every == 0 {
            return Err(OptimizeError::InvalidParams {
                reason: "record_every must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Everything one annealing run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub final_config: Configuration,
    pub final_energy: EnergyReport,
    /// (sweep index, total electrostatic energy) snapshots; entry 0 is the
    /// initial state and the last entry is the final sweep.
    pub trajectory: Vec<(u64, f64)>,
    pub schedule: Schedule,
    pub accept_rate: f64,
    pub seed: u64,
    /// Position of this run within a rate sweep; 0 for standalone runs.
    pub run_index: u64,
    pub proposal_std_initial: f64,
    /// Differs from the initial value only if adaptation fired.
    pub proposal_std_final: f64,
    /// Worst relative disagreement between the incrementally tracked energy
    /// and a full recomputation, over all snapshots.
    pub bookkeeping_error: f64,
    /// Total anchored energy at the final configuration when the run was
    /// annealed against a lattice anchor.
    pub anchor_energy: Option<f64>,
}

/// Result of a Lloyd fixed-point iteration.
#[derive(Clone, Debug, Serialize)]
pub struct LloydOutcome {
    pub config: Configuration,
    /// max_i ‖x_i − c_i‖ before each step, one entry per iteration.
    pub residuals: Vec<f64>,
    /// False means max_iter elapsed first; the best-so-far state is returned.
    pub converged: bool,
    pub iterations: u64,
}

/// Deterministic 64-bit mix (splitmix64 finalizer) used to derive
/// independent per-run seeds from a master seed.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two independent standard normals by the polar variate method.
pub(crate) fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let factor = (-2.0 * s.ln() / s).sqrt();
            return (u * factor, v * factor);
        }
    }
}

/// The Metropolis rule: certain acceptance downhill, exp(−ΔU/T) uphill.
pub fn metropolis_accept(delta_u: f64, temperature: f64, rng: &mut impl Rng) -> bool {
    assert!(temperature > 0.0, "temperature must be positive");
    delta_u <= 0.0 || rng.random::<f64>() < (-delta_u / temperature).exp()
}

/// The annealing objective: total electrostatic energy, optionally extended
/// by fixed exterior anchor charges. Boundary charge density stays pinned to
/// the interior generator count.
pub(crate) struct Objective<'a> {
    pub domain: &'a Domain,
    pub quad: &'a Quadrature,
    pub n_charges: usize,
    pub anchor: &'a [Point],
}

impl<'a> Objective<'a> {
    pub(crate) fn plain(domain: &'a Domain, quad: &'a Quadrature, n_charges: usize) -> Self {
        Objective {
            domain,
            quad,
            n_charges,
            anchor: &[],
        }
    }

    fn boundary_term(&self, p: Point) -> Option<f64> {
        boundary_potential(p, self.domain, self.n_charges, self.quad).finite()
    }

    /// All objective terms that involve slot `i` evaluated with that slot at
    /// `p`, excluding the boundary term: doubled pair terms to the other
    /// generators plus single terms to the anchor charges. None signals a
    /// hard-wall rejection (coincidence).
    fn interaction(&self, pts: &[Point], i: usize, p: Point) -> Option<f64> {
        let mut sum = 0.0;
        for (j, q) in pts.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = p.distance(*q);
            if d <= MIN_SEPARATION {
                return None;
            }
            sum += 2.0 / d;
        }
        for a in self.anchor {
            let d = p.distance(*a);
            if d <= MIN_SEPARATION {
                return None;
            }
            sum += 1.0 / d;
        }
        Some(sum)
    }

    /// Full objective by fresh evaluation.
    pub(crate) fn total(&self, pts: &[Point]) -> Potential {
        let base = electrostatic_total(pts, self.domain, self.quad);
        let Potential::Finite(mut u) = base else {
            return Potential::Infinite;
        };
        for p in pts {
            for a in self.anchor {
                let d = p.distance(*a);
                if d <= MIN_SEPARATION {
                    return Potential::Infinite;
                }
                u += 1.0 / d;
            }
        }
        Potential::Finite(u)
    }
}

struct SweepStats {
    accepted: u64,
    proposals: u64,
    delta_sum: f64,
}

/// One Metropolis sweep: every generator visited once in a fresh random
/// permutation. `boundary_cache[i]` must hold the boundary term of `pts[i]`
/// on entry and is kept current. ΔU is assembled from the terms involving
/// the moved generator only.
fn sweep_once(
    obj: &Objective,
    pts: &mut [Point],
    boundary_cache: &mut [f64],
    temperature: f64,
    proposal_std: f64,
    rng: &mut ChaCha8Rng,
    order: &mut Vec<usize>,
) -> SweepStats {
    order.clear();
    order.extend(0..pts.len());
    order.shuffle(rng);
    let mut stats = SweepStats {
        accepted: 0,
        proposals: 0,
        delta_sum: 0.0,
    };
    for &i in order.iter() {
        stats.proposals += 1;
        let (gx, gy) = gaussian_pair(rng);
        let proposal = Point::new(
            pts[i].x + proposal_std * gx,
            pts[i].y + proposal_std * gy,
        );
        // Hard wall: exterior proposals are rejected outright, the
        // potential is never evaluated there.
        if !obj.domain.contains_strictly(proposal) {
            continue;
        }
        let Some(new_boundary) = obj.boundary_term(proposal) else {
            continue;
        };
        let Some(new_interaction) = obj.interaction(pts, i, proposal) else {
            continue;
        };
        let Some(old_interaction) = obj.interaction(pts, i, pts[i]) else {
            continue;
        };
        let delta_u = (new_interaction + new_boundary) - (old_interaction + boundary_cache[i]);
        if metropolis_accept(delta_u, temperature, rng) {
            pts[i] = proposal;
            boundary_cache[i] = new_boundary;
            stats.accepted += 1;
            stats.delta_sum += delta_u;
        }
    }
    stats
}

fn boundary_cache_for(obj: &Objective, pts: &[Point]) -> Vec<f64> {
    pts.iter()
        .map(|p| {
            obj.boundary_term(*p)
                .expect("valid configurations are strictly interior")
        })
        .collect()
}

/// One tempered sweep over a valid configuration. Returns the updated
/// configuration and the number of accepted moves.
pub fn metropolis_sweep(
    domain: &Domain,
    config: &Configuration,
    temperature: f64,
    params: &AnnealParams,
    quad: &Quadrature,
    rng: &mut ChaCha8Rng,
) -> Result<(Configuration, u64), OptimizeError> {
    assert!(temperature > 0.0, "temperature must be positive");
    params.validate(domain)?;
    let obj = Objective::plain(domain, quad, config.len());
    let mut pts = config.points().to_vec();
    let mut cache = boundary_cache_for(&obj, &pts);
    let mut order = Vec::new();
    let stats = sweep_once(
        &obj,
        &mut pts,
        &mut cache,
        temperature,
        params.proposal_std,
        rng,
        &mut order,
    );
    Ok((Configuration::new(pts, domain)?, stats.accepted))
}

/// Full annealing run over `schedule`, deterministic given `params.seed`.
pub fn anneal(
    domain: &Domain,
    config0: &Configuration,
    schedule: &Schedule,
    params: &AnnealParams,
    quad: &Quadrature,
) -> Result<RunRecord, OptimizeError> {
    anneal_impl(domain, config0, schedule, params, quad, &[])
}

pub(crate) fn anneal_impl(
    domain: &Domain,
    config0: &Configuration,
    schedule: &Schedule,
    params: &AnnealParams,
    quad: &Quadrature,
    anchor: &[Point],
) -> Result<RunRecord, OptimizeError> {
    schedule.validate()?;
    params.validate(domain)?;
    let obj = Objective {
        domain,
        quad,
        n_charges: config0.len(),
        anchor,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pts = config0.points().to_vec();
    let mut cache = boundary_cache_for(&obj, &pts);
    let mut energy = obj
        .total(&pts)
        .expect_finite("valid configurations have finite energy");
    let mut trajectory = vec![(0u64, energy)];

    let steps = schedule.steps();
    let mut proposal_std = params.proposal_std;
    let std_floor = PROPOSAL_FLOOR_FACTOR * domain.diameter();
    let mut accepted_total = 0u64;
    let mut proposals_total = 0u64;
    let mut window = (0u64, 0u64, 0u64); // (accepted, proposals, sweeps)
    let mut bookkeeping_error = 0.0f64;
    let mut order = Vec::new();

    for t in 0..steps {
        let temperature = schedule.temperature(t)?;
        let stats = sweep_once(
            &obj,
            &mut pts,
            &mut cache,
            temperature,
            proposal_std,
            &mut rng,
            &mut order,
        );
        energy += stats.delta_sum;
        accepted_total += stats.accepted;
        proposals_total += stats.proposals;
        window.0 += stats.accepted;
        window.1 += stats.proposals;
        window.2 += 1;
        if params.adapt_proposal && window.2 == ADAPT_WINDOW {
            if (window.0 as f64) < ADAPT_THRESHOLD * window.1 as f64 {
                proposal_std = (0.5 * proposal_std).max(std_floor);
            }
            window = (0, 0, 0);
        }

        let sweep_no = t + 1;
        if sweep_no % params.record_every == 0 || sweep_no == steps {
            for p in &pts {
                assert!(
                    domain.contains_strictly(*p),
                    "hard wall violated at sweep {sweep_no}"
                );
            }
            let full = obj.total(&pts).expect_finite("interior points");
            let err = (energy - full).abs() / full.abs().max(1.0);
            bookkeeping_error = bookkeeping_error.max(err);
            debug_assert!(err <= 1e-7, "incremental energy drifted by {err}");
            energy = full;
            trajectory.push((sweep_no, energy));
        }
    }

    let final_config = Configuration::new(pts, domain)?;
    let final_energy = electrostatic_energy(&final_config, domain, quad)?;
    let anchor_energy = if anchor.is_empty() {
        None
    } else {
        Some(
            obj.total(final_config.points())
                .expect_finite("interior points"),
        )
    };
    Ok(RunRecord {
        final_config,
        final_energy,
        trajectory,
        schedule: schedule.clone(),
        accept_rate: accepted_total as f64 / proposals_total.max(1) as f64,
        seed: params.seed,
        run_index: 0,
        proposal_std_initial: params.proposal_std,
        proposal_std_final: proposal_std,
        bookkeeping_error,
        anchor_energy,
    })
}

/// Zero-temperature local descent: Gaussian proposals, only strict energy
/// decreases accepted, proposal scale halved when a window stalls, stop
/// after 500 consecutive rejections. Returns the polished configuration and
/// its (plain or anchored) objective value.
pub fn greedy_polish(
    domain: &Domain,
    config: &Configuration,
    proposal_std: f64,
    quad: &Quadrature,
    rng: &mut ChaCha8Rng,
) -> Result<(Configuration, f64), OptimizeError> {
    polish_impl(domain, config, proposal_std, quad, rng, &[])
}

pub(crate) fn polish_impl(
    domain: &Domain,
    config: &Configuration,
    proposal_std: f64,
    quad: &Quadrature,
    rng: &mut ChaCha8Rng,
    anchor: &[Point],
) -> Result<(Configuration, f64), OptimizeError> {
    if !(proposal_std > 0.0 && proposal_std < domain.diameter()) {
        return Err(OptimizeError::InvalidParams {
            reason: format!("proposal_std must lie in (0, diameter), got {proposal_std}"),
        });
    }
    let obj = Objective {
        domain,
        quad,
        n_charges: config.len(),
        anchor,
    };
    let mut pts = config.points().to_vec();
    let mut cache = boundary_cache_for(&obj, &pts);
    let mut std = proposal_std;
    let std_floor = PROPOSAL_FLOOR_FACTOR * domain.diameter();
    let mut rejection_streak = 0u64;
    let mut window = (0u64, 0u64, 0u64);
    let mut order: Vec<usize> = Vec::new();

    'outer: loop {
        order.clear();
        order.extend(0..pts.len());
        order.shuffle(rng);
        for idx in 0..order.len() {
            let i = order[idx];
            window.1 += 1;
            let (gx, gy) = gaussian_pair(rng);
            let proposal = Point::new(pts[i].x + std * gx, pts[i].y + std * gy);
            let mut accepted = false;
            if obj.domain.contains_strictly(proposal) {
                if let (Some(new_boundary), Some(new_inter), Some(old_inter)) = (
                    obj.boundary_term(proposal),
                    obj.interaction(&pts, i, proposal),
                    obj.interaction(&pts, i, pts[i]),
                ) {
                    let old_local = old_inter + cache[i];
                    let delta_u = (new_inter + new_boundary) - old_local;
                    // Strict decrease with a roundoff margin; plain ΔU <= 0
                    // never terminates because cancellation noise flips the
                    // sign of tiny steps half the time.
                    if delta_u <= -GREEDY_DECREASE_TOL * old_local.abs().max(1.0) {
                        pts[i] = proposal;
                        cache[i] = new_boundary;
                        accepted = true;
                    }
                }
            }
            if accepted {
                window.0 += 1;
                rejection_streak = 0;
            } else {
                rejection_streak += 1;
                if rejection_streak >= POLISH_REJECTION_LIMIT {
                    break 'outer;
                }
            }
        }
        window.2 += 1;
        if window.2 == ADAPT_WINDOW {
            if (window.0 as f64) < ADAPT_THRESHOLD * window.1 as f64 {
                std = (0.5 * std).max(std_floor);
            }
            window = (0, 0, 0);
        }
    }

    let final_config = Configuration::new(pts, domain)?;
    let energy = obj
        .total(final_config.points())
        .expect_finite("interior points");
    Ok((final_config, energy))
}

/// One Lloyd step: every generator moves to the centroid of its cell.
pub fn lloyd_step(domain: &Domain, config: &Configuration) -> Result<Configuration, OptimizeError> {
    let tess = tessellate(domain, config)?;
    Ok(Configuration::new(tess.centroids().to_vec(), domain)?)
}

/// Lloyd iteration until the largest generator-to-centroid distance falls
/// below `tol` or `max_iter` steps elapse.
pub fn lloyd_run(
    domain: &Domain,
    config0: &Configuration,
    tol: f64,
    max_iter: u64,
) -> Result<LloydOutcome, OptimizeError> {
    if !(tol > 0.0) {
        return Err(OptimizeError::InvalidParams {
            reason: format!("tol must be positive, got {tol}"),
        });
    }
    let mut config = config0.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0u64;
    let mut prev_energy: Option<f64> = None;
    for _ in 0..max_iter {
        let tess = tessellate(domain, &config)?;
        if cfg!(debug_assertions) {
            let e = centroid_energy(&tess, &config)?;
            if let Some(prev) = prev_energy {
                debug_assert!(
                    e <= prev + 1e-12 * prev.abs().max(1.0),
                    "centroid energy increased across a Lloyd step: {prev} -> {e}"
                );
            }
            prev_energy = Some(e);
        }
        let centroids = tess.centroids().to_vec();
        let residual = config
            .points()
            .iter()
            .zip(&centroids)
            .map(|(p, c)| p.distance(*c))
            .fold(0.0, f64::max);
        residuals.push(residual);
        config = Configuration::new(centroids, domain)?;
        iterations += 1;
        if residual < tol {
            converged = true;
            break;
        }
    }
    Ok(LloydOutcome {
        config,
        residuals,
        converged,
        iterations,
    })
}

/// Uniform random interior configuration by rejection sampling on the
/// bounding box, with a minimum pairwise separation of 1e-6·diameter.
pub fn random_configuration(domain: &Domain, n: usize, rng: &mut ChaCha8Rng) -> Configuration {
    assert!(n > 0, "a configuration needs at least one generator");
    let (lo, hi) = domain.bounding_box();
    let min_sep = 1e-6 * domain.diameter();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while pts.len() < n {
        attempts += 1;
        assert!(
            attempts < 1_000_000,
            "rejection sampling stalled; domain too small for {n} separated points"
        );
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.random::<f64>(),
            lo.y + (hi.y - lo.y) * rng.random::<f64>(),
        );
        if !domain.contains_strictly(p) {
            continue;
        }
        if pts.iter().any(|q| q.distance(p) <= min_sep) {
            continue;
        }
        pts.push(p);
    }
    Configuration::new(pts, domain).expect("sampled points are interior and separated")
}
