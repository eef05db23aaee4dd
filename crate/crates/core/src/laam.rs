//! Lattice-anchored annealing mapping: sweep annealing rates, cluster the
//! discovered minima up to isometry, extend each minimum's structure past
//! the boundary as a fixed anchor of exterior charges, and check that
//! anchored re-optimization recovers the minimum it was built from.
//!
//! Minima are fingerprinted by their sorted pairwise distance list plus
//! energy, which is invariant under isometries and relabeling. Anchors come
//! in two constructions: translate-tile (periodic images, parallelogram
//! domains only) and mirror-tile (edge reflections and vertex
//! point-reflections, any convex polygon).

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::energy::{electrostatic_energy, EnergyError, Quadrature};
use crate::geometry::{Configuration, Domain, GeometryError, Point, MIN_SEPARATION};
use crate::optimize::{
    anneal, anneal_impl, gaussian_pair, greedy_polish, mix_seed, polish_impl, AnnealParams,
    OptimizeError, RunRecord, Schedule,
};

/// Relative welding tolerance for deduplicating reflected cells and points.
const TILE_WELD_FACTOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LaamError {
    #[error("no run records to cluster")]
    EmptyInput,
    #[error("gap/timescale table needs at least 2 clusters, got {got}")]
    TooFewClusters { got: usize },
    #[error("domain does not admit this tiling: {reason}")]
    UnsupportedDomainForTiling { reason: String },
    #[error("lattice anchor is empty; layers must be at least 1")]
    EmptyAnchor,
    #[error("cluster index {index} out of range for {clusters} clusters")]
    ClusterIndexOutOfRange { index: usize, clusters: usize },
    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Isometry- and relabeling-invariant fingerprint of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    /// Nondecreasing list of all N(N-1)/2 pairwise distances.
    pub sorted_pair_distances: Vec<f64>,
    pub energy_u: f64,
}

impl Signature {
    pub fn of(config: &Configuration, energy_u: f64) -> Signature {
        let pts = config.points();
        let mut d = Vec::with_capacity(pts.len() * (pts.len().saturating_sub(1)) / 2);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d.push(pts[i].distance(pts[j]));
            }
        }
        d.sort_by(f64::total_cmp);
        Signature {
            sorted_pair_distances: d,
            energy_u,
        }
    }

    /// L∞ distance between the sorted distance lists, relative to the
    /// configuration scale (the largest pair distance present). Signatures
    /// of different point counts are infinitely far apart. N=1 signatures
    /// (empty lists) are at distance zero, so clustering falls back to the
    /// energy criterion.
    pub fn distance(&self, other: &Signature) -> f64 {
        if self.sorted_pair_distances.len() != other.sorted_pair_distances.len() {
            return f64::INFINITY;
        }
        let scale = self
            .sorted_pair_distances
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(other.sorted_pair_distances.last().copied().unwrap_or(0.0))
            .max(MIN_SEPARATION);
        self.sorted_pair_distances
            .iter()
            .zip(&other.sorted_pair_distances)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// The single-linkage criterion: close in shape and close in energy.
    pub fn links(&self, other: &Signature, dist_tol: f64, energy_tol: f64) -> bool {
        let du = (self.energy_u - other.energy_u).abs();
        let scale = self.energy_u.abs().max(other.energy_u.abs());
        self.distance(other) <= dist_tol && du <= energy_tol * scale
    }
}

/// One basin of the empirical energy landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaCluster {
    /// Lowest-energy member.
    pub representative: Configuration,
    /// Total electrostatic energy of the representative.
    pub energy_u: f64,
    /// Centroid energy of the representative (diagnostic).
    pub energy_centroid: f64,
    /// ΔE above the global cluster; exactly 0 there.
    pub gap: f64,
    /// Indices into the record list passed to cluster_minima.
    pub members: Vec<usize>,
    /// Smallest schedule length (in sweeps) at which at least half of that
    /// length's runs land here; None means no length trapped this often.
    pub trap_timescale: Option<u64>,
}

/// All clusters found by a rate sweep, sorted by energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaAtlas {
    pub clusters: Vec<MinimaCluster>,
    pub global_index: usize,
}

impl MinimaAtlas {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn global(&self) -> &MinimaCluster {
        &self.clusters[self.global_index]
    }
}

/// How anchor charges continue a configuration past the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TilingKind {
    /// Periodic images under the domain's edge vectors; requires a
    /// parallelogram domain.
    TranslateTile,
    /// Edge reflections plus vertex point-reflections, level by level;
    /// works on any convex polygon.
    MirrorTile,
}

impl TilingKind {
    /// Translate tiling when the domain supports it, mirror otherwise.
    pub fn auto_for(domain: &Domain) -> TilingKind {
        if parallelogram_axes(domain).is_some() {
            TilingKind::TranslateTile
        } else {
            TilingKind::MirrorTile
        }
    }
}

/// Fixed exterior charges extending a configuration's structure outward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeAnchor {
    /// All strictly outside the domain, each carrying unit charge.
    pub anchor_points: Vec<Point>,
    pub layers: usize,
    pub construction: TilingKind,
}

/// The two independent edge vectors if the domain is a parallelogram.
fn parallelogram_axes(domain: &Domain) -> Option<(Point, Point)> {
    let v = domain.vertices();
    if v.len() != 4 {
        return None;
    }
    // Opposite vertices of a parallelogram share their midpoint.
    let m1 = Point::new((v[0].x + v[2].x) * 0.5, (v[0].y + v[2].y) * 0.5);
    let m2 = Point::new((v[1].x + v[3].x) * 0.5, (v[1].y + v[3].y) * 0.5);
    if m1.distance(m2) > TILE_WELD_FACTOR * domain.diameter() {
        return None;
    }
    Some((v[1] - v[0], v[3] - v[0]))
}

/// Builds the anchor for `config`: its images under the first `layers`
/// rings of the tiling, the domain itself excluded.
pub fn build_anchor(
    config: &Configuration,
    domain: &Domain,
    layers: usize,
    construction: TilingKind,
) -> Result<LatticeAnchor, LaamError> {
    if layers == 0 {
        return Err(LaamError::EmptyAnchor);
    }
    let anchor_points = match construction {
        TilingKind::TranslateTile => translate_images(config, domain, layers)?,
        TilingKind::MirrorTile => mirror_images(config, domain, layers),
    };
    if anchor_points.is_empty() {
        return Err(LaamError::EmptyAnchor);
    }
    for p in &anchor_points {
        assert!(
            domain.signed_margin(*p) < 0.0,
            "anchor point {p:?} is not strictly outside the domain"
        );
    }
    Ok(LatticeAnchor {
        anchor_points,
        layers,
        construction,
    })
}

fn translate_images(
    config: &Configuration,
    domain: &Domain,
    layers: usize,
) -> Result<Vec<Point>, LaamError> {
    let Some((e1, e2)) = parallelogram_axes(domain) else {
        return Err(LaamError::UnsupportedDomainForTiling {
            reason: format!(
                "translate-tile needs a parallelogram, domain has {} vertices",
                domain.vertices().len()
            ),
        });
    };
    let l = layers as i64;
    let mut out = Vec::with_capacity(((2 * layers + 1).pow(2) - 1) * config.len());
    for a in -l..=l {
        for b in -l..=l {
            if a == 0 && b == 0 {
                continue;
            }
            let offset = e1 * (a as f64) + e2 * (b as f64);
            for p in config.points() {
                out.push(*p + offset);
            }
        }
    }
    Ok(out)
}

/// Reflect `p` across the line through `a` and `b`.
fn reflect_across(p: Point, a: Point, b: Point) -> Point {
    let d = b - a;
    let len_sq = d.norm_sq();
    debug_assert!(len_sq > 0.0);
    let v = p - a;
    let proj = d * (v.dot(d) / len_sq);
    a + proj * 2.0 - v
}

/// A reflected copy of the domain carrying the reflected generator images.
#[derive(Clone)]
struct TileCell {
    poly: Vec<Point>,
    images: Vec<Point>,
}

impl TileCell {
    fn key(&self, grid: f64) -> Vec<(i64, i64)> {
        let mut k: Vec<(i64, i64)> = self
            .poly
            .iter()
            .map(|p| ((p.x / grid).round() as i64, (p.y / grid).round() as i64))
            .collect();
        k.sort_unstable();
        k
    }

    fn reflected_edge(&self, e: usize) -> TileCell {
        let a = self.poly[e];
        let b = self.poly[(e + 1) % self.poly.len()];
        TileCell {
            poly: self.poly.iter().map(|&p| reflect_across(p, a, b)).collect(),
            images: self
                .images
                .iter()
                .map(|&p| reflect_across(p, a, b))
                .collect(),
        }
    }

    fn reflected_vertex(&self, v: usize) -> TileCell {
        let c = self.poly[v];
        let flip = |p: Point| c + (c - p);
        TileCell {
            poly: self.poly.iter().map(|&p| flip(p)).collect(),
            images: self.images.iter().map(|&p| flip(p)).collect(),
        }
    }
}

fn mirror_images(config: &Configuration, domain: &Domain, layers: usize) -> Vec<Point> {
    let grid = TILE_WELD_FACTOR * domain.diameter();
    let root = TileCell {
        poly: domain.vertices().to_vec(),
        images: config.points().to_vec(),
    };
    let mut seen: BTreeSet<Vec<(i64, i64)>> = BTreeSet::new();
    seen.insert(root.key(grid));
    let mut frontier = vec![root];
    let mut collected: Vec<Point> = Vec::new();

    for _ in 0..layers {
        let mut next = Vec::new();
        for cell in &frontier {
            let n = cell.poly.len();
            let candidates = (0..n)
                .map(|e| cell.reflected_edge(e))
                .chain((0..n).map(|v| cell.reflected_vertex(v)));
            for cand in candidates {
                if seen.insert(cand.key(grid)) {
                    collected.extend_from_slice(&cand.images);
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }

    // Distinct reflection paths can produce coincident images; keep points
    // strictly outside the domain and weld duplicates.
    collected.retain(|p| domain.signed_margin(*p) < 0.0);
    collected.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    let mut out: Vec<Point> = Vec::with_capacity(collected.len());
    for p in collected {
        if out.last().is_none_or(|q| q.distance(p) > grid) {
            out.push(p);
        }
    }
    out
}

/// Runs |schedules| × seeds_per_schedule annealing chains, each from an
/// independent uniform-random start and each greedily polished afterwards so
/// every record sits at a local minimum of U. Record order is schedule-major
/// and fully determined by `base.seed`.
pub fn sweep_rates(
    domain: &Domain,
    n_points: usize,
    schedules: &[Schedule],
    seeds_per_schedule: usize,
    base: &AnnealParams,
    quad: &Quadrature,
) -> Result<Vec<RunRecord>, LaamError> {
    if schedules.is_empty() {
        return Err(LaamError::InvalidParams {
            reason: "schedules must be nonempty".into(),
        });
    }
    if n_points == 0 {
        return Err(LaamError::InvalidParams {
            reason: "n_points must be at least 1".into(),
        });
    }
    if seeds_per_schedule == 0 {
        return Err(LaamError::InvalidParams {
            reason: "seeds_per_schedule must be at least 1".into(),
        });
    }
    for s in schedules {
        s.validate()?;
    }
    base.validate(domain)?;

    let total = schedules.len() * seeds_per_schedule;
    let run_one = |run_index: usize| -> Result<RunRecord, LaamError> {
        let schedule = &schedules[run_index / seeds_per_schedule];
        let run_seed = mix_seed(base.seed, run_index as u64);
        let mut start_rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, 1));
        let config0 = crate::optimize::random_configuration(domain, n_points, &mut start_rng);
        let params = AnnealParams {
            seed: run_seed,
            ..base.clone()
        };
        let mut rec = anneal(domain, &config0, schedule, &params, quad)?;
        let mut polish_rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, 2));
        let (polished, _) = settle(
            domain,
            &rec.final_config,
            params.proposal_std,
            quad,
            &mut polish_rng,
        )?;
        rec.final_energy = electrostatic_energy(&polished, domain, quad)?;
        rec.final_config = polished;
        rec.run_index = run_index as u64;
        Ok(rec)
    };

    #[cfg(feature = "parallel")]
    let records: Result<Vec<RunRecord>, LaamError> =
        (0..total).into_par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let records: Result<Vec<RunRecord>, LaamError> = (0..total).map(run_one).collect();
    records
}

/// Greedy descent run as a three-stage ladder (std, std/10, std/100). A
/// single pass can hit the rejection terminator before scale adaptation
/// triggers (500 consecutive rejections is one adaptation window at ten
/// points), leaving the configuration ~1e-2 above its minimum; restarting
/// the descent at finer scales settles it to roundoff.
fn settle(
    domain: &Domain,
    config: &Configuration,
    proposal_std: f64,
    quad: &Quadrature,
    rng: &mut ChaCha8Rng,
) -> Result<(Configuration, f64), crate::optimize::OptimizeError> {
    let mut current = config.clone();
    let mut energy = f64::INFINITY;
    for factor in [1.0, 0.1, 0.01] {
        let (next, u) = greedy_polish(domain, &current, proposal_std * factor, quad, rng)?;
        current = next;
        energy = u;
    }
    Ok((current, energy))
}

/// Single-linkage clustering of polished run records by signature.
pub fn cluster_minima(
    records: &[RunRecord],
    dist_tol: f64,
    energy_tol: f64,
) -> Result<MinimaAtlas, LaamError> {
    if records.is_empty() {
        return Err(LaamError::EmptyInput);
    }
    if !(dist_tol > 0.0 && energy_tol > 0.0) {
        return Err(LaamError::InvalidParams {
            reason: "tolerances must be positive".into(),
        });
    }
    let sigs: Vec<Signature> = records
        .iter()
        .map(|r| Signature::of(&r.final_config, r.final_energy.total_electrostatic))
        .collect();

    let mut uf = UnionFind::new(records.len());
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            if sigs[i].links(&sigs[j], dist_tol, energy_tol) {
                uf.union(i, j);
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    {
        let mut root_to_group = std::collections::BTreeMap::new();
        for i in 0..records.len() {
            let root = uf.find(i);
            let slot = *root_to_group.entry(root).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[slot].push(i);
        }
    }

    let mut clusters: Vec<MinimaCluster> = groups
        .into_iter()
        .map(|members| {
            let rep = *members
                .iter()
                .min_by(|&&a, &&b| {
                    records[a]
                        .final_energy
                        .total_electrostatic
                        .total_cmp(&records[b].final_energy.total_electrostatic)
                })
                .unwrap();
            MinimaCluster {
                representative: records[rep].final_config.clone(),
                energy_u: records[rep].final_energy.total_electrostatic,
                energy_centroid: records[rep].final_energy.centroid_energy,
                gap: 0.0,
                members,
                trap_timescale: None,
            }
        })
        .collect();

    // Deterministic, permutation-independent ordering: by energy, ties by
    // the representative's distance list.
    clusters.sort_by(|a, b| {
        a.energy_u.total_cmp(&b.energy_u).then_with(|| {
            let sa = Signature::of(&a.representative, a.energy_u);
            let sb = Signature::of(&b.representative, b.energy_u);
            sa.sorted_pair_distances
                .iter()
                .map(|x| x.to_bits())
                .cmp(sb.sorted_pair_distances.iter().map(|x| x.to_bits()))
        })
    });

    // The sort placed the lowest-energy cluster first.
    let global_index = 0;
    let global_u = clusters[global_index].energy_u;
    for c in &mut clusters {
        c.gap = c.energy_u - global_u;
    }

    // Trap timescale: group runs by schedule length, ascending.
    let mut lengths: Vec<u64> = records.iter().map(|r| r.schedule.steps()).collect();
    lengths.sort_unstable();
    lengths.dedup();
    for cluster in &mut clusters {
        cluster.trap_timescale = lengths
            .iter()
            .copied()
            .find(|&s| {
                let total = records.iter().filter(|r| r.schedule.steps() == s).count();
                let here = cluster
                    .members
                    .iter()
                    .filter(|&&m| records[m].schedule.steps() == s)
                    .count();
                total > 0 && (here as f64) >= 0.5 * (total as f64)
            });
    }

    Ok(MinimaAtlas {
        clusters,
        global_index,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Anneals and polishes `config0` under the anchored objective
/// U + Σ_i Σ_a 1/‖x_i − a‖ with the anchor charges held fixed.
pub fn anchored_optimize(
    domain: &Domain,
    anchor: &LatticeAnchor,
    config0: &Configuration,
    schedule: &Schedule,
    params: &AnnealParams,
    quad: &Quadrature,
) -> Result<RunRecord, LaamError> {
    if anchor.anchor_points.is_empty() {
        return Err(LaamError::EmptyAnchor);
    }
    for a in &anchor.anchor_points {
        assert!(
            domain.signed_margin(*a) < 0.0,
            "anchor point {a:?} is not strictly outside the domain"
        );
    }
    let mut rec = anneal_impl(domain, config0, schedule, params, quad, &anchor.anchor_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, 3));
    let (polished, anchored_u) = polish_impl(
        domain,
        &rec.final_config,
        params.proposal_std,
        quad,
        &mut rng,
        &anchor.anchor_points,
    )?;
    rec.final_energy = electrostatic_energy(&polished, domain, quad)?;
    rec.final_config = polished;
    rec.anchor_energy = Some(anchored_u);
    Ok(rec)
}

/// Knobs for the anchored-recovery experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub trials: u32,
    /// Trials that must land back in the source cluster.
    pub threshold: u32,
    /// Smallest-anchor search tries layers 1..=layers_cap.
    pub layers_cap: usize,
    /// Start-perturbation scale as a fraction of the domain diameter.
    pub perturbation: f64,
    pub dist_tol: f64,
    pub energy_tol: f64,
    pub tiling: TilingKind,
    /// Schedule of the anchored anneal in each trial.
    pub schedule: Schedule,
    pub proposal_std: f64,
    pub seed: u64,
}

impl RecoveryParams {
    pub fn defaults(domain: &Domain, seed: u64) -> RecoveryParams {
        RecoveryParams {
            trials: 10,
            threshold: 8,
            layers_cap: 3,
            perturbation: 0.05,
            dist_tol: 1e-2,
            energy_tol: 1e-3,
            tiling: TilingKind::auto_for(domain),
            schedule: Schedule::geometric_with_ratio(0.2, 1e-4, 1500)
                .expect("static schedule is valid"),
            proposal_std: 0.05 * domain.diameter(),
            seed,
        }
    }
}

/// Result of the recovery experiment for one cluster. `layers` is the
/// smallest ring count that passed, or the cap if none did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub cluster_index: usize,
    pub layers: usize,
    pub trials: u32,
    pub successes: u32,
    pub passed: bool,
    pub anchor: LatticeAnchor,
}

/// Anchored-recovery check for one atlas cluster: perturb the
/// representative, re-optimize under the anchored objective, release the
/// anchor and re-polish under plain U, then ask whether the result still
/// links to the source cluster's signature. Layers grow from 1 until the
/// success threshold is met or the cap is reached.
pub fn recover_cluster(
    domain: &Domain,
    atlas: &MinimaAtlas,
    cluster_index: usize,
    params: &RecoveryParams,
    quad: &Quadrature,
) -> Result<RecoveryReport, LaamError> {
    let Some(cluster) = atlas.clusters.get(cluster_index) else {
        return Err(LaamError::ClusterIndexOutOfRange {
            index: cluster_index,
            clusters: atlas.clusters.len(),
        });
    };
    if params.layers_cap == 0 {
        return Err(LaamError::InvalidParams {
            reason: "layers_cap must be at least 1".into(),
        });
    }
    if params.threshold > params.trials || params.trials == 0 {
        return Err(LaamError::InvalidParams {
            reason: format!(
                "need 0 < threshold <= trials, got {}/{}",
                params.threshold, params.trials
            ),
        });
    }
    let rep = &cluster.representative;
    let rep_sig = Signature::of(rep, cluster.energy_u);
    let cluster_seed = mix_seed(params.seed, cluster_index as u64);

    let mut last: Option<RecoveryReport> = None;
    for layers in 1..=params.layers_cap {
        let anchor = build_anchor(rep, domain, layers, params.tiling)?;
        let trial_results: Result<Vec<bool>, LaamError> = run_trials(
            domain,
            rep,
            &rep_sig,
            &anchor,
            cluster_seed,
            layers,
            params,
            quad,
        );
        let successes = trial_results?.iter().filter(|&&ok| ok).count() as u32;
        let passed = successes >= params.threshold;
        let report = RecoveryReport {
            cluster_index,
            layers,
            trials: params.trials,
            successes,
            passed,
            anchor,
        };
        if passed {
            return Ok(report);
        }
        last = Some(report);
    }
    Ok(last.expect("layers_cap >= 1 ran at least one attempt"))
}

#[allow(clippy::too_many_arguments)]
fn run_trials(
    domain: &Domain,
    rep: &Configuration,
    rep_sig: &Signature,
    anchor: &LatticeAnchor,
    cluster_seed: u64,
    layers: usize,
    params: &RecoveryParams,
    quad: &Quadrature,
) -> Result<Vec<bool>, LaamError> {
    let one_trial = |trial: u32| -> Result<bool, LaamError> {
        let trial_seed = mix_seed(cluster_seed, (layers as u64) << 32 | trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let start = perturb_configuration(
            rep,
            domain,
            params.perturbation * domain.diameter(),
            &mut rng,
        );
        let anneal_params = AnnealParams {
            proposal_std: params.proposal_std,
            seed: mix_seed(trial_seed, 4),
            record_every: params.schedule.steps().max(1),
            adapt_proposal: true,
        };
        let anchored = anchored_optimize(domain, anchor, &start, &params.schedule, &anneal_params, quad)?;
        // Release the anchor: the anchored minimum is slightly compressed
        // towards the interior, so classify the nearest plain-U minimum.
        let mut release_rng = ChaCha8Rng::seed_from_u64(mix_seed(trial_seed, 5));
        let (released, released_u) = settle(
            domain,
            &anchored.final_config,
            params.proposal_std,
            quad,
            &mut release_rng,
        )?;
        let sig = Signature::of(&released, released_u);
        Ok(sig.links(rep_sig, params.dist_tol, params.energy_tol))
    };

    #[cfg(feature = "parallel")]
    let results: Result<Vec<bool>, LaamError> =
        (0..params.trials).into_par_iter().map(one_trial).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<bool>, LaamError> = (0..params.trials).map(one_trial).collect();
    results
}

/// Gaussian-perturbed copy of `config`, resampling each point until it is
/// strictly interior and separated from the points already placed.
fn perturb_configuration(
    config: &Configuration,
    domain: &Domain,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Configuration {
    let mut pts: Vec<Point> = Vec::with_capacity(config.len());
    for p in config.points() {
        let mut attempts = 0;
        loop {
            attempts += 1;
            assert!(attempts < 100_000, "perturbation sampling stalled");
            let (gx, gy) = gaussian_pair(rng);
            let cand = Point::new(p.x + std * gx, p.y + std * gy);
            if domain.contains_strictly(cand)
                && pts.iter().all(|q| q.distance(cand) > MIN_SEPARATION)
            {
                pts.push(cand);
                break;
            }
        }
    }
    Configuration::new(pts, domain).expect("perturbed points are interior and separated")
}

/// Rows of (gap, trap_timescale) sorted by gap, plus the Spearman rank
/// correlation between gap and inverse timescale over the non-global rows
/// (None when fewer than two such rows exist or a variance vanishes). A
/// None timescale means "never trapped" and enters the correlation as
/// 1/τ = 0.
pub fn gap_timescale_table(
    atlas: &MinimaAtlas,
) -> Result<(Vec<(f64, Option<u64>)>, Option<f64>), LaamError> {
    if atlas.clusters.len() < 2 {
        return Err(LaamError::TooFewClusters {
            got: atlas.clusters.len(),
        });
    }
    let mut rows: Vec<(usize, f64, Option<u64>)> = atlas
        .clusters
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.gap, c.trap_timescale))
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let non_global: Vec<&(usize, f64, Option<u64>)> = rows
        .iter()
        .filter(|(k, _, _)| *k != atlas.global_index)
        .collect();
    let gaps: Vec<f64> = non_global.iter().map(|r| r.1).collect();
    let inv_tau: Vec<f64> = non_global
        .iter()
        .map(|r| r.2.map_or(0.0, |t| 1.0 / t as f64))
        .collect();
    let spearman = spearman_correlation(&gaps, &inv_tau);

    Ok((rows.into_iter().map(|(_, g, t)| (g, t)).collect(), spearman))
}

/// Tie-averaged ranks.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 * 0.5 + 1.0;
        for &slot in &idx[i..=j] {
            out[slot] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
