//! Experiment configuration: the one JSON file every subcommand reads.
//!
//! Unknown fields are rejected and parse errors name the offending field
//! path, so a typo in a config never silently falls back to a default.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use cvt_core::{AnnealParams, Configuration, Domain, Point, Quadrature, Schedule, TilingKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub n_points: usize,
    /// Explicit starting generators; random uniform when absent. Required by
    /// the `energy` command, optional elsewhere.
    #[serde(default)]
    pub initial_points: Option<Vec<[f64; 2]>>,
    /// Cooling schedules for `anneal` and `laam`. The default is the
    /// canonical four-rate sweep: T 1.0 → 1e-4 over 200/1000/5000/20000
    /// sweeps (constant temperature ratio, varying step budget).
    #[serde(default = "defaults::schedules")]
    pub schedules: Vec<ScheduleSpec>,
    #[serde(default = "defaults::seeds_per_schedule")]
    pub seeds_per_schedule: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Gauss-Legendre points per boundary edge.
    #[serde(default = "defaults::quadrature")]
    pub quadrature: usize,
    /// Metropolis proposal standard deviation; 0.05 × diameter when absent.
    #[serde(default)]
    pub proposal_std: Option<f64>,
    #[serde(default = "defaults::record_every")]
    pub record_every: u64,
    #[serde(default = "defaults::adapt_proposal")]
    pub adapt_proposal: bool,
    #[serde(default = "defaults::lloyd_tol")]
    pub lloyd_tol: f64,
    #[serde(default = "defaults::lloyd_max_iter")]
    pub lloyd_max_iter: u64,
    /// Signature distance tolerance for clustering (relative to diameter).
    #[serde(default = "defaults::dist_tol")]
    pub dist_tol: f64,
    /// Relative energy tolerance for clustering.
    #[serde(default = "defaults::energy_tol")]
    pub energy_tol: f64,
    #[serde(default = "defaults::layers_cap")]
    pub layers_cap: usize,
    #[serde(default = "defaults::recovery_trials")]
    pub recovery_trials: u32,
    #[serde(default = "defaults::recovery_threshold")]
    pub recovery_threshold: u32,
    #[serde(default)]
    pub tiling: TilingSpec,
    /// Recovery perturbation as a fraction of the domain diameter.
    #[serde(default = "defaults::perturbation_factor")]
    pub perturbation_factor: f64,
    /// Finite-difference step for `verify`; 1e-5 × diameter when absent.
    #[serde(default)]
    pub fd_step: Option<f64>,
}

mod defaults {
    use super::ScheduleSpec;

    pub fn schedules() -> Vec<ScheduleSpec> {
        [200u64, 1_000, 5_000, 20_000]
            .iter()
            .map(|&steps| {
                ScheduleSpec::GeometricRatio(super::GeometricRatioSpec {
                    t0: 1.0,
                    t_final: 1e-4,
                    steps,
                })
            })
            .collect()
    }
    pub fn seeds_per_schedule() -> usize {
        10
    }
    pub fn seed() -> u64 {
        42
    }
    pub fn quadrature() -> usize {
        32
    }
    pub fn record_every() -> u64 {
        100
    }
    pub fn adapt_proposal() -> bool {
        true
    }
    pub fn lloyd_tol() -> f64 {
        1e-10
    }
    pub fn lloyd_max_iter() -> u64 {
        20_000
    }
    pub fn dist_tol() -> f64 {
        1e-2
    }
    pub fn energy_tol() -> f64 {
        1e-3
    }
    pub fn layers_cap() -> usize {
        3
    }
    pub fn recovery_trials() -> u32 {
        10
    }
    pub fn recovery_threshold() -> u32 {
        8
    }
    pub fn perturbation_factor() -> f64 {
        0.05
    }
}

/// Domain description: either a named preset or an explicit vertex list.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// "unit-square" or "regular-k-gon".
    #[serde(default)]
    pub preset: Option<String>,
    /// Vertex count for "regular-k-gon".
    #[serde(default)]
    pub k: Option<usize>,
    /// Circumradius for "regular-k-gon" (default 1.0).
    #[serde(default)]
    pub radius: Option<f64>,
    /// Convex polygon vertices, counter-clockwise.
    #[serde(default)]
    pub vertices: Option<Vec<[f64; 2]>>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain, ConfigError> {
        match (&self.preset, &self.vertices) {
            (Some(_), Some(_)) => err("domain: give either a preset or vertices, not both"),
            (None, None) => err("domain: give a preset or a vertex list"),
            (None, Some(vs)) => {
                if self.k.is_some() || self.radius.is_some() {
                    return err("domain: k/radius only apply to the regular-k-gon preset");
                }
                let points: Vec<Point> = vs.iter().map(|&[x, y]| Point::new(x, y)).collect();
                Domain::new(points).map_err(|e| ConfigError(format!("domain.vertices: {e}")))
            }
            (Some(name), None) => match name.as_str() {
                "unit-square" => {
                    if self.k.is_some() || self.radius.is_some() {
                        return err("domain: unit-square takes no k or radius");
                    }
                    Ok(Domain::unit_square())
                }
                "regular-k-gon" => {
                    let k = self
                        .k
                        .ok_or_else(|| ConfigError("domain.k: required for regular-k-gon".into()))?;
                    let radius = self.radius.unwrap_or(1.0);
                    Domain::regular_polygon(k, radius)
                        .map_err(|e| ConfigError(format!("domain: {e}")))
                }
                other => err(format!(
                    "domain.preset: unknown preset {other:?} (expected \"unit-square\" or \"regular-k-gon\")"
                )),
            },
        }
    }
}

/// One cooling schedule. `geometric-ratio` is sugar for a geometric schedule
/// hitting an exact final temperature: alpha = (t_final/t0)^(1/steps).
#[derive(Debug, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    Geometric(GeometricSpec),
    GeometricRatio(GeometricRatioSpec),
    Logarithmic(LogarithmicSpec),
}

#[derive(Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub t0: f64,
    pub alpha: f64,
    pub steps: u64,
}

#[derive(Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometricRatioSpec {
    pub t0: f64,
    pub t_final: f64,
    pub steps: u64,
}

#[derive(Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LogarithmicSpec {
    pub c: f64,
    pub steps: u64,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule, ConfigError> {
        let built = match self {
            ScheduleSpec::Geometric(s) => Schedule::geometric(s.t0, s.alpha, s.steps),
            ScheduleSpec::GeometricRatio(s) => {
                Schedule::geometric_with_ratio(s.t0, s.t_final, s.steps)
            }
            ScheduleSpec::Logarithmic(s) => Schedule::logarithmic(s.c, s.steps),
        };
        built.map_err(|e| ConfigError(format!("schedules: {e}")))
    }
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TilingSpec {
    /// Translate tiling when the domain supports it, mirror otherwise.
    #[default]
    Auto,
    MirrorTile,
    TranslateTile,
}

impl TilingSpec {
    pub fn resolve(self, domain: &Domain) -> TilingKind {
        match self {
            TilingSpec::Auto => TilingKind::auto_for(domain),
            TilingSpec::MirrorTile => TilingKind::MirrorTile,
            TilingSpec::TranslateTile => TilingKind::TranslateTile,
        }
    }
}

/// Fully validated, override-applied experiment ready to run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub domain: Domain,
    pub quadrature: Quadrature,
    pub schedules: Vec<Schedule>,
    pub seed: u64,
}

impl Experiment {
    pub fn base_anneal_params(&self) -> AnnealParams {
        let mut params = AnnealParams::for_domain(&self.domain, self.seed);
        if let Some(std) = self.config.proposal_std {
            params.proposal_std = std;
        }
        params.record_every = self.config.record_every;
        params.adapt_proposal = self.config.adapt_proposal;
        params
    }

    /// The explicit starting configuration, when the config carries one.
    pub fn initial_configuration(&self) -> Result<Option<Configuration>, ConfigError> {
        let Some(raw) = &self.config.initial_points else {
            return Ok(None);
        };
        if raw.len() != self.config.n_points {
            return err(format!(
                "initial_points: got {} points but n_points = {}",
                raw.len(),
                self.config.n_points
            ));
        }
        let points: Vec<Point> = raw.iter().map(|&[x, y]| Point::new(x, y)).collect();
        Configuration::new(points, &self.domain)
            .map(Some)
            .map_err(|e| ConfigError(format!("initial_points: {e}")))
    }
}

/// Reads, parses, validates, and applies CLI overrides. Every failure mode
/// here is a "config error" in the exit-code vocabulary.
pub fn load(
    path: &Path,
    seed_override: Option<u64>,
    quadrature_override: Option<usize>,
) -> Result<Experiment, ConfigError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&raw);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        ConfigError(format!("field `{field}`: {}", e.inner()))
    })?;
    de.end()
        .map_err(|e| ConfigError(format!("trailing content after the config object: {e}")))?;

    if config.schema_version != SCHEMA_VERSION {
        return err(format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            config.schema_version
        ));
    }
    if config.n_points == 0 {
        return err("n_points: must be at least 1");
    }
    if config.schedules.is_empty() {
        return err("schedules: must be nonempty");
    }
    if config.seeds_per_schedule == 0 {
        return err("seeds_per_schedule: must be at least 1");
    }

    let domain = config.domain.build()?;
    let quadrature = Quadrature::new(quadrature_override.unwrap_or(config.quadrature))
        .map_err(|e| ConfigError(format!("quadrature: {e}")))?;
    let schedules: Vec<Schedule> = config
        .schedules
        .iter()
        .map(|s| s.build())
        .collect::<Result<_, _>>()?;
    let seed = seed_override.unwrap_or(config.seed);

    if let Some(std) = config.proposal_std {
        if !(std > 0.0 && std < domain.diameter()) {
            return err(format!(
                "proposal_std: must lie in (0, diameter = {}), got {std}",
                domain.diameter()
            ));
        }
    }
    if let Some(h) = config.fd_step {
        if !(h > 0.0 && h.is_finite()) {
            return err(format!("fd_step: must be positive and finite, got {h}"));
        }
    }
    if !(config.perturbation_factor > 0.0 && config.perturbation_factor < 1.0) {
        return err(format!(
            "perturbation_factor: must lie in (0, 1), got {}",
            config.perturbation_factor
        ));
    }
    if config.recovery_threshold > config.recovery_trials {
        return err(format!(
            "recovery_threshold: {} exceeds recovery_trials {}",
            config.recovery_threshold, config.recovery_trials
        ));
    }
    if config.layers_cap == 0 {
        return err("layers_cap: must be at least 1");
    }

    Ok(Experiment {
        config,
        domain,
        quadrature,
        schedules,
        seed,
    })
}
