//! The five subcommands. Each returns a process exit code on its success
//! path; `Err` means a configuration or runtime fault and maps to exit 1.
//!
//! Exit-code vocabulary: 0 success, 1 config error, 2 non-convergence,
//! 3 recovery failure, 4 spectrum violation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use cvt_core::{
    anneal, cluster_minima, cvt_spectra, default_fd_step, electrostatic_energy, lloyd_run,
    mix_seed, random_configuration, recover_cluster, sweep_rates, Configuration, CvtSpectra,
    EnergyReport, LatticeAnchor, MinimaCluster, Point, ProjectedSpectrum, RecoveryParams,
    RecoveryReport, RunRecord, Schedule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, SCHEMA_VERSION};
use crate::io::{write_atomic, write_json};
use crate::svg::tessellation_svg;

fn starting_configuration(exp: &Experiment, stream: u64) -> Result<Configuration> {
    if let Some(given) = exp.initial_configuration()? {
        return Ok(given);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(exp.seed, stream));
    Ok(random_configuration(
        &exp.domain,
        exp.config.n_points,
        &mut rng,
    ))
}

#[derive(Serialize)]
struct LloydArtifact {
    schema_version: u32,
    converged: bool,
    iterations: u64,
    /// Largest generator-to-centroid distance before each step.
    residuals: Vec<f64>,
    points: Vec<Point>,
    energy: EnergyReport,
}

pub fn lloyd(exp: &Experiment, out: &Path) -> Result<i32> {
    let start = starting_configuration(exp, 0)?;
    let outcome = lloyd_run(
        &exp.domain,
        &start,
        exp.config.lloyd_tol,
        exp.config.lloyd_max_iter,
    )?;
    let energy = electrostatic_energy(&outcome.config, &exp.domain, &exp.quadrature)?;
    let final_residual = outcome.residuals.last().copied().unwrap_or(f64::NAN);
    write_json(
        &out.join("cvt.json"),
        &LloydArtifact {
            schema_version: SCHEMA_VERSION,
            converged: outcome.converged,
            iterations: outcome.iterations,
            residuals: outcome.residuals,
            points: outcome.config.points().to_vec(),
            energy,
        },
    )?;
    let drawing = tessellation_svg(&exp.domain, &outcome.config)?;
    write_atomic(&out.join("cvt.svg"), drawing.as_bytes())?;
    if outcome.converged {
        Ok(0)
    } else {
        eprintln!(
            "lloyd: not converged after {} iterations (final residual {final_residual:.3e})",
            outcome.iterations
        );
        Ok(2)
    }
}

#[derive(Serialize)]
struct RunArtifact {
    schema_version: u32,
    schedule_index: usize,
    seed_index: usize,
    record: RunRecord,
}

fn trajectory_csv(record: &RunRecord) -> String {
    let mut csv = String::from("sweep,energy,running_min\n");
    let mut running = f64::INFINITY;
    for &(sweep, energy) in &record.trajectory {
        running = running.min(energy);
        let _ = writeln!(csv, "{sweep},{energy},{running}");
    }
    csv
}

pub fn anneal_cmd(exp: &Experiment, out: &Path) -> Result<i32> {
    let per = exp.config.seeds_per_schedule;
    let base = exp.base_anneal_params();
    let total = exp.schedules.len() * per;

    let run_one = |run_index: usize| -> Result<(PathBuf, RunArtifact, String)> {
        let schedule = &exp.schedules[run_index / per];
        let run_seed = mix_seed(exp.seed, run_index as u64);
        let config0 = match exp.initial_configuration()? {
            Some(given) => given,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, 1));
                random_configuration(&exp.domain, exp.config.n_points, &mut rng)
            }
        };
        let params = cvt_core::AnnealParams {
            seed: run_seed,
            ..base.clone()
        };
        let mut record = anneal(&exp.domain, &config0, schedule, &params, &exp.quadrature)?;
        record.run_index = run_index as u64;
        let csv = trajectory_csv(&record);
        let stem = format!("run_s{:02}_r{:03}", run_index / per, run_index % per);
        Ok((
            out.join(stem),
            RunArtifact {
                schema_version: SCHEMA_VERSION,
                schedule_index: run_index / per,
                seed_index: run_index % per,
                record,
            },
            csv,
        ))
    };

    #[cfg(feature = "parallel")]
    let runs: Result<Vec<_>> = (0..total).into_par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Result<Vec<_>> = (0..total).map(run_one).collect();

    for (stem, artifact, csv) in runs? {
        write_json(&stem.with_extension("json"), &artifact)?;
        write_atomic(&stem.with_extension("csv"), csv.as_bytes())?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct AtlasArtifact {
    schema_version: u32,
    n_points: usize,
    schedules: Vec<Schedule>,
    seeds_per_schedule: usize,
    clusters: Vec<MinimaCluster>,
    global_index: usize,
    /// (gap, trap_timescale) rows sorted by gap; absent with fewer than two
    /// clusters.
    gap_table: Option<Vec<(f64, Option<u64>)>>,
    /// Spearman rank correlation between gap and inverse trap timescale over
    /// the non-global rows; absent when undefined.
    spearman: Option<f64>,
    anchors: Vec<LatticeAnchor>,
    recovery: Vec<RecoveryReport>,
    all_recovered: bool,
}

pub fn laam(exp: &Experiment, out: &Path) -> Result<i32> {
    // Duplicate schedules add no information: clustering would absorb the
    // repeated runs, so the sweep runs each distinct schedule once.
    let mut schedules: Vec<Schedule> = Vec::new();
    for s in &exp.schedules {
        if !schedules.contains(s) {
            schedules.push(s.clone());
        }
    }

    let base = exp.base_anneal_params();
    let records = sweep_rates(
        &exp.domain,
        exp.config.n_points,
        &schedules,
        exp.config.seeds_per_schedule,
        &base,
        &exp.quadrature,
    )?;
    let atlas = cluster_minima(&records, exp.config.dist_tol, exp.config.energy_tol)?;

    let (gap_table, spearman) = if atlas.len() >= 2 {
        let (rows, rho) = cvt_core::gap_timescale_table(&atlas)?;
        (Some(rows), rho)
    } else {
        (None, None)
    };

    let mut recovery = Vec::with_capacity(atlas.len());
    for ci in 0..atlas.len() {
        let mut params = RecoveryParams::defaults(&exp.domain, mix_seed(exp.seed, 0xACE0 + ci as u64));
        params.trials = exp.config.recovery_trials;
        params.threshold = exp.config.recovery_threshold;
        params.layers_cap = exp.config.layers_cap;
        params.perturbation = exp.config.perturbation_factor;
        params.dist_tol = exp.config.dist_tol;
        params.energy_tol = exp.config.energy_tol;
        params.tiling = exp.config.tiling.resolve(&exp.domain);
        if let Some(std) = exp.config.proposal_std {
            params.proposal_std = std;
        }
        recovery.push(recover_cluster(
            &exp.domain,
            &atlas,
            ci,
            &params,
            &exp.quadrature,
        )?);
    }
    let all_recovered = recovery.iter().all(|r| r.passed);

    for (ci, cluster) in atlas.clusters.iter().enumerate() {
        let drawing = tessellation_svg(&exp.domain, &cluster.representative)?;
        write_atomic(&out.join(format!("cluster_{ci:02}.svg")), drawing.as_bytes())?;
    }
    write_json(
        &out.join("atlas.json"),
        &AtlasArtifact {
            schema_version: SCHEMA_VERSION,
            n_points: exp.config.n_points,
            schedules,
            seeds_per_schedule: exp.config.seeds_per_schedule,
            anchors: recovery.iter().map(|r| r.anchor.clone()).collect(),
            clusters: atlas.clusters,
            global_index: atlas.global_index,
            gap_table,
            spearman,
            all_recovered,
            recovery,
        },
    )?;

    if all_recovered {
        Ok(0)
    } else {
        eprintln!("laam: at least one cluster failed anchored recovery at the layer cap");
        Ok(3)
    }
}

#[derive(Serialize)]
struct SpectraArtifact {
    schema_version: u32,
    converged: bool,
    iterations: u64,
    fd_step: f64,
    points: Vec<Point>,
    energy: EnergyReport,
    spectra: CvtSpectra,
}

fn report_violation(name: &str, spectrum: &ProjectedSpectrum) {
    if spectrum.passed {
        return;
    }
    eprintln!(
        "verify: {name} spectrum violates projected positive-semidefiniteness: \
         min projected eigenvalue {:.6e} (max {:.6e}, {} symmetry modes removed)",
        spectrum.min_projected, spectrum.max_eigenvalue, spectrum.num_projected
    );
    if let Some(v) = &spectrum.offending_eigenvector {
        let joined: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
        eprintln!("verify: offending eigenvector [{}]", joined.join(", "));
    }
}

pub fn verify(exp: &Experiment, out: &Path) -> Result<i32> {
    let start = starting_configuration(exp, 0)?;
    let outcome = lloyd_run(
        &exp.domain,
        &start,
        exp.config.lloyd_tol,
        exp.config.lloyd_max_iter,
    )?;
    if !outcome.converged {
        eprintln!(
            "verify: Lloyd iteration did not converge after {} iterations; no CVT to check",
            outcome.iterations
        );
        return Ok(2);
    }
    let h = exp
        .config
        .fd_step
        .unwrap_or_else(|| default_fd_step(&exp.domain));
    let spectra = cvt_spectra(&exp.domain, &outcome.config, &exp.quadrature, h)?;
    let energy = electrostatic_energy(&outcome.config, &exp.domain, &exp.quadrature)?;
    let all_passed = spectra.all_passed();
    report_violation("centroid", &spectra.centroid);
    report_violation("edge-weighted", &spectra.edge_weighted);
    report_violation("electrostatic", &spectra.electrostatic);
    write_json(
        &out.join("spectra.json"),
        &SpectraArtifact {
            schema_version: SCHEMA_VERSION,
            converged: outcome.converged,
            iterations: outcome.iterations,
            fd_step: h,
            points: outcome.config.points().to_vec(),
            energy,
            spectra,
        },
    )?;
    Ok(if all_passed { 0 } else { 4 })
}

#[derive(Serialize)]
struct EnergyArtifact {
    schema_version: u32,
    points: Vec<Point>,
    energy: EnergyReport,
}

pub fn energy(exp: &Experiment, out: &Path) -> Result<i32> {
    let config = exp
        .initial_configuration()?
        .ok_or_else(|| anyhow!("config error: the energy command requires initial_points"))?;
    let report = electrostatic_energy(&config, &exp.domain, &exp.quadrature)
        .context("evaluating the energy report")?;
    write_json(
        &out.join("energy.json"),
        &EnergyArtifact {
            schema_version: SCHEMA_VERSION,
            points: config.points().to_vec(),
            energy: report,
        },
    )?;
    Ok(0)
}
