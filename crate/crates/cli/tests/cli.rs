//! End-to-end checks of the `cvt` binary: exit codes, artifact structure,
//! determinism, and override handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvt_core::RunRecord;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cvt")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawning the cvt binary")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

const BASIC: &str = r#"{
  "schema_version": 1,
  "domain": { "preset": "unit-square" },
  "n_points": 2,
  "schedules": [ { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 120 } } ],
  "seeds_per_schedule": 2
}"#;

#[test]
fn missing_config_flag_is_a_config_error() {
    let out = run(&["lloyd"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--config"), "{}", stderr(&out));
}

#[test]
fn bad_flags_exit_one_and_help_exits_zero() {
    assert_eq!(code(&run(&["--bogus-flag", "lloyd"])), 1);
    assert_eq!(code(&run(&["definitely-not-a-command"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn malformed_config_errors_name_the_offending_field() {
    let tmp = TempDir::new().unwrap();
    // Wrong type deep inside the schedule list.
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 2,
          "schedules": [ { "geometric-ratio": { "t0": "hot", "t_final": 1e-3, "steps": 10 } } ]
        }"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "lloyd"]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("t0"),
        "error does not name the field: {}",
        stderr(&out)
    );

    // Unknown top-level field.
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 2,
          "scheduless": []
        }"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "lloyd"]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("scheduless"),
        "error does not name the unknown field: {}",
        stderr(&out)
    );

    // Not JSON at all.
    let cfg = write_config(tmp.path(), "not json {");
    let out = run(&["--config", cfg.to_str().unwrap(), "lloyd"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn invalid_schedules_and_exterior_points_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 1,
          "schedules": [ { "geometric": { "t0": 1.0, "alpha": 0.9, "steps": 0 } } ]
        }"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "anneal"]);
    assert_eq!(code(&out), 1, "steps = 0 must be rejected: {}", stderr(&out));

    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 1,
          "initial_points": [[2.0, 0.5]]
        }"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "verify"]);
    assert_eq!(code(&out), 1, "exterior start must be rejected: {}", stderr(&out));

    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 3,
          "domain": { "preset": "unit-square" },
          "n_points": 1
        }"#,
    );
    let out = run(&["--config", cfg.to_str().unwrap(), "lloyd"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("schema_version"), "{}", stderr(&out));
}

#[test]
fn lloyd_centers_a_single_point_and_draws_the_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 1
        }"#,
    );
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "lloyd",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let artifact: Value = serde_json::from_str(&read(&outdir.join("cvt.json"))).unwrap();
    assert_eq!(artifact["schema_version"], 1);
    assert_eq!(artifact["converged"], true);
    let (x, y) = (
        artifact["points"][0]["x"].as_f64().unwrap(),
        artifact["points"][0]["y"].as_f64().unwrap(),
    );
    assert!((x - 0.5).abs() < 1e-9 && (y - 0.5).abs() < 1e-9, "({x}, {y})");

    let svg = read(&outdir.join("cvt.svg"));
    assert!(svg.starts_with("<svg ") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polygon").count(), 1, "one polygon per cell");
    assert_eq!(svg.matches("<circle").count(), 1, "one marker per generator");
}

#[test]
fn lloyd_two_point_energies_match_the_analytic_minimum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASIC);
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "lloyd",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let artifact: Value = serde_json::from_str(&read(&outdir.join("cvt.json"))).unwrap();
    let centroid = artifact["energy"]["centroid_energy"].as_f64().unwrap();
    assert!(
        (centroid - 5.0 / 48.0).abs() < 1e-6,
        "centroid energy {centroid} is not the two-cell optimum"
    );
    let svg = read(&outdir.join("cvt.svg"));
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert_eq!(svg.matches("<circle").count(), 2);
}

#[test]
fn identical_seeds_reproduce_artifacts_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASIC);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "anneal",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["run_s00_r000.json", "run_s00_r001.json", "run_s00_r000.csv"] {
        assert_eq!(
            read(&a.join(name)),
            read(&b.join(name)),
            "{name} differs between identical runs"
        );
    }

    // A different master seed must give a different walk.
    let c = tmp.path().join("c");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "777",
        "anneal",
    ]);
    assert_eq!(code(&out), 0);
    assert_ne!(
        read(&a.join("run_s00_r000.json")),
        read(&c.join("run_s00_r000.json")),
        "--seed override had no effect"
    );
}

#[test]
fn run_records_round_trip_bit_equal_through_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASIC);
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "anneal",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let body = read(&outdir.join("run_s00_r000.json"));
    let parsed: Value = serde_json::from_str(&body).unwrap();
    let record: RunRecord = serde_json::from_value(parsed["record"].clone()).unwrap();
    let reserialized = serde_json::to_string(&record).unwrap();
    let reparsed: RunRecord = serde_json::from_str(&reserialized).unwrap();
    assert_eq!(record, reparsed, "JSON round-trip changed the record");
}

#[test]
fn trajectory_csv_has_monotone_running_min() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASIC);
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "anneal",
    ]);
    assert_eq!(code(&out), 0);

    let csv = read(&outdir.join("run_s00_r000.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sweep,energy,running_min"));
    let mut prev = f64::INFINITY;
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 3, "bad row {line:?}");
        let energy: f64 = cols[1].parse().unwrap();
        let running: f64 = cols[2].parse().unwrap();
        assert!(running <= prev, "running_min increased: {line:?}");
        assert!(running <= energy);
        prev = running;
        rows += 1;
    }
    assert!(rows >= 2, "trajectory too short: {rows} rows");
}

#[test]
fn quadrature_override_changes_the_energy_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 2,
          "initial_points": [[0.31, 0.44], [0.71, 0.62]]
        }"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "energy",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--quadrature",
        "4",
        "energy",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let val = |dir: &Path| -> f64 {
        let v: Value = serde_json::from_str(&read(&dir.join("energy.json"))).unwrap();
        v["energy"]["boundary_energy"].as_f64().unwrap()
    };
    let (full, coarse) = (val(&a), val(&b));
    assert_ne!(full, coarse, "--quadrature override had no effect");
    assert!((full - coarse).abs() < 1e-2, "orders disagree wildly: {full} vs {coarse}");

    let out = run(&["--config", cfg.to_str().unwrap(), "--quadrature", "1", "energy"]);
    assert_eq!(code(&out), 1, "quadrature below 2 nodes must be rejected");
}

#[test]
fn verify_reports_the_known_two_point_spectra() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASIC);
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "verify",
    ]);
    // The two-point CVT is a genuine electrostatic saddle: the check must
    // fail with exit 4 and log the offending direction.
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("offending eigenvector"), "{}", stderr(&out));

    let artifact: Value = serde_json::from_str(&read(&outdir.join("spectra.json"))).unwrap();
    let spectra = &artifact["spectra"];

    // Centroid energy: strictly positive spectrum, no symmetry modes.
    assert_eq!(spectra["centroid"]["passed"], true);
    assert_eq!(spectra["centroid"]["num_projected"], 0);

    // Edge energy: both rigid translations preserve the shared edge length
    // and the pair distance, so exactly two near-zero modes are projected
    // out and the rest are positive.
    assert_eq!(spectra["edge_weighted"]["passed"], true);
    assert_eq!(spectra["edge_weighted"]["num_projected"], 2);

    // Electrostatic energy: the shear mode is a genuine descent direction,
    // not a near-zero symmetry mode.
    assert_eq!(spectra["electrostatic"]["passed"], false);
    assert_eq!(spectra["electrostatic"]["num_projected"], 0);
    let vec = spectra["electrostatic"]["offending_eigenvector"]
        .as_array()
        .expect("offending eigenvector recorded in the artifact");
    assert_eq!(vec.len(), 4);
    let min = spectra["electrostatic"]["min_projected"].as_f64().unwrap();
    assert!(min < -1.0, "violation should be far from roundoff: {min}");
}

#[test]
fn laam_single_point_atlas_has_one_cluster_with_zero_gap() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 1,
          "schedules": [
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 100 } },
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 400 } }
          ],
          "seeds_per_schedule": 3
        }"#,
    );
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "laam",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let atlas: Value = serde_json::from_str(&read(&outdir.join("atlas.json"))).unwrap();
    assert_eq!(atlas["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(atlas["clusters"][0]["gap"], 0.0);
    assert_eq!(atlas["global_index"], 0);
    assert_eq!(atlas["all_recovered"], true);
    assert!(atlas["gap_table"].is_null(), "no gap table with one cluster");
    assert!(outdir.join("cluster_00.svg").exists());

    // Anchor points live strictly outside the domain.
    for a in atlas["anchors"][0]["anchor_points"].as_array().unwrap() {
        let (x, y) = (a["x"].as_f64().unwrap(), a["y"].as_f64().unwrap());
        let inside = x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0;
        assert!(!inside, "anchor ({x}, {y}) inside the unit square");
    }
}

#[test]
fn laam_duplicate_schedules_collapse_to_the_deduplicated_atlas() {
    let tmp = TempDir::new().unwrap();
    let with_dupes = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 2,
          "schedules": [
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 120 } },
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 120 } },
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 500 } }
          ],
          "seeds_per_schedule": 2
        }"#,
    );
    let deduped = {
        let path = tmp.path().join("dedup.json");
        std::fs::write(
            &path,
            r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 2,
          "schedules": [
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 120 } },
            { "geometric-ratio": { "t0": 0.5, "t_final": 1e-3, "steps": 500 } }
          ],
          "seeds_per_schedule": 2
        }"#,
        )
        .unwrap();
        path
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (cfg, dir) in [(&with_dupes, &a), (&deduped, &b)] {
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "laam",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(
        read(&a.join("atlas.json")),
        read(&b.join("atlas.json")),
        "duplicate schedules changed the atlas"
    );
}

#[test]
fn laam_flags_recovery_failure_with_exit_three() {
    // Ten points split into two basins; the deep one is measurably not
    // recoverable under mirror anchors, so the run must exit 3 while still
    // writing the full atlas with the failure recorded.
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "schema_version": 1,
          "domain": { "preset": "unit-square" },
          "n_points": 10,
          "schedules": [
            { "geometric-ratio": { "t0": 1.0, "t_final": 1e-4, "steps": 300 } },
            { "geometric-ratio": { "t0": 1.0, "t_final": 1e-4, "steps": 3000 } }
          ],
          "seeds_per_schedule": 8,
          "seed": 77
        }"#,
    );
    let outdir = tmp.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        outdir.to_str().unwrap(),
        "laam",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let atlas: Value = serde_json::from_str(&read(&outdir.join("atlas.json"))).unwrap();
    let clusters = atlas["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2, "expected the two known basins");
    assert_eq!(atlas["all_recovered"], false);
    let passed: Vec<bool> = atlas["recovery"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["passed"].as_bool().unwrap())
        .collect();
    assert!(passed.contains(&false), "exit 3 without a failed cluster");
    assert!(passed.contains(&true), "the shallow basin should recover");
    // One drawing per cluster representative.
    assert!(outdir.join("cluster_00.svg").exists());
    assert!(outdir.join("cluster_01.svg").exists());
    // The gap table is present and sorted global-first.
    let rows = atlas["gap_table"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.0);
}
