//! Drives the compiled binary through the full pipeline on a small cohort
//! and checks the exit-code contract, the emitted files, and same-seed
//! reproducibility.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_latentsna");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_sim_config(path: &Path, seed: u64) {
    fs::write(
        path,
        format!(
            r#"{{"n_subjects": 40, "n_nodes": 8, "n_attributes": 2,
                "signal_proportion": 0.25, "signal_magnitude": 0.9,
                "snr": 1.0, "attr_noise_var": 0.5, "seed": {seed}}}"#
        ),
    )
    .unwrap();
}

fn write_fit_config(path: &Path, retain_latents: bool) {
    fs::write(
        path,
        format!(
            r#"{{"n_iterations": 80, "burn_in": 40, "thin": 1, "seed": 11,
                "init_scale": 1.0, "retain_latents": {retain_latents}}}"#
        ),
    )
    .unwrap();
}

/// Recursive file snapshot: relative path -> bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Asserts two snapshots are identical, allowing manifests to differ in
/// their creation timestamp only.
fn assert_identical_modulo_timestamps(
    before: &BTreeMap<String, Vec<u8>>,
    after: &BTreeMap<String, Vec<u8>>,
) {
    let keys: Vec<_> = before.keys().collect();
    assert_eq!(keys, after.keys().collect::<Vec<_>>(), "file sets differ");
    for (name, old_bytes) in before {
        let new_bytes = &after[name];
        if name.ends_with("manifest.json") {
            let strip = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v.as_object_mut().unwrap().remove("created_unix");
                v
            };
            assert_eq!(strip(old_bytes), strip(new_bytes), "{name} differs beyond timestamp");
        } else {
            assert_eq!(old_bytes, new_bytes, "{name} differs between same-seed runs");
        }
    }
}

#[test]
fn pipeline_runs_end_to_end_and_writes_expected_files() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let sim = root.join("sim.json");
    let fit = root.join("fit.json");
    write_sim_config(&sim, 7);
    write_fit_config(&fit, true);

    let data = root.join("data");
    let out = run(&["simulate", "--config", sim.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert_ok(&out, "simulate");
    for name in [
        "attributes.csv",
        "covariates_conn.csv",
        "covariates_attr.csv",
        "connectivity.csv",
        "truth.json",
        "manifest.json",
    ] {
        assert!(data.join(name).exists(), "simulate did not write {name}");
    }

    let chain = root.join("chain");
    let out = run(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--config",
        fit.to_str().unwrap(),
        "--out",
        chain.to_str().unwrap(),
        "--plots",
    ]);
    assert_ok(&out, "fit");
    for name in [
        "meta.json",
        "lambda_z_theta.csv",
        "scalars.csv",
        "z.csv",
        "theta.csv",
        "convergence.csv",
        "traces.svg",
        "manifest.json",
    ] {
        assert!(chain.join(name).exists(), "fit did not write {name}");
    }

    let report = root.join("report.csv");
    let out = run(&["detect", "--chain", chain.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_ok(&out, "detect");
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("rank,region,posterior_mean,lower,upper,significant"));
    assert_eq!(text.lines().count(), 9, "one row per region plus header");
    assert!(root.join("report.csv.manifest.json").exists());

    let metrics = root.join("metrics.csv");
    let out =
        run(&["netstats", "--chain", chain.to_str().unwrap(), "--out", metrics.to_str().unwrap()]);
    assert_ok(&out, "netstats");
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("node,strength,closeness,betweenness"));
    let shape = fs::read_to_string(root.join("metrics-shape.csv")).unwrap();
    assert!(shape.contains("skewness"), "V=8 admits the skewness test: {shape}");
    assert!(!shape.contains("kurtosis"), "V=8 is below the kurtosis-test minimum: {shape}");

    // An independently generated cohort provides the "new subjects": its
    // connectivity is the observed block, its attributes the held-out truth.
    let new_sim = root.join("sim2.json");
    write_sim_config(&new_sim, 8);
    let new_data = root.join("new");
    let out = run(&[
        "simulate",
        "--config",
        new_sim.to_str().unwrap(),
        "--out",
        new_data.to_str().unwrap(),
    ]);
    assert_ok(&out, "simulate new subjects");

    let pred = root.join("pred.csv");
    let out = run(&[
        "predict",
        "--train",
        data.to_str().unwrap(),
        "--new",
        new_data.to_str().unwrap(),
        "--mode",
        "theta",
        "--config",
        fit.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
        "--truth",
    ]);
    assert_ok(&out, "predict theta");
    let text = fs::read_to_string(&pred).unwrap();
    assert!(text.starts_with("subject_id,"));
    assert_eq!(text.lines().count(), 41, "one row per new subject plus header");
    let scores = fs::read_to_string(root.join("pred-scores.csv")).unwrap();
    assert!(scores.starts_with("target,correlation"));

    // Averaging baseline needs no sampler config.
    let avg = root.join("avg.csv");
    let out = run(&[
        "predict",
        "--train",
        data.to_str().unwrap(),
        "--new",
        new_data.to_str().unwrap(),
        "--mode",
        "averaging",
        "--out",
        avg.to_str().unwrap(),
        "--truth",
    ]);
    assert_ok(&out, "predict averaging");
    let scores = fs::read_to_string(root.join("avg-scores.csv")).unwrap();
    assert!(scores.starts_with("subject_id,correlation"));
}

#[test]
fn compare_grid_writes_table_and_failures() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let grid = root.join("grid.json");
    fs::write(
        &grid,
        r#"{
          "grid": [{"n_subjects": 30, "n_nodes": 6, "n_attributes": 1,
                    "signal_proportion": 0.3, "signal_magnitude": 0.9,
                    "snr": 1.0, "attr_noise_var": 0.5, "seed": 0}],
          "methods": ["CPM", "CCA"],
          "replicates": 2,
          "sampler": {"n_iterations": 40, "burn_in": 20, "thin": 1, "seed": 0,
                      "init_scale": 1.0, "retain_latents": false},
          "master_seed": 55
        }"#,
    )
    .unwrap();
    let table = root.join("table.csv");
    let out = run(&["compare", "--grid", grid.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    assert_ok(&out, "compare");
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("cell,method,replicates,"));
    assert_eq!(text.lines().count(), 3, "one row per (cell, method) plus header");
    assert!(root.join("table-failures.csv").exists());
}

#[test]
fn same_seed_reruns_are_byte_identical_modulo_timestamps() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let sim = root.join("sim.json");
    let fit = root.join("fit.json");
    write_sim_config(&sim, 21);
    write_fit_config(&fit, false);
    let data = root.join("data");
    let chain = root.join("chain");

    let run_once = || {
        assert_ok(
            &run(&["simulate", "--config", sim.to_str().unwrap(), "--out", data.to_str().unwrap()]),
            "simulate",
        );
        assert_ok(
            &run(&[
                "fit",
                "--data",
                data.to_str().unwrap(),
                "--config",
                fit.to_str().unwrap(),
                "--out",
                chain.to_str().unwrap(),
            ]),
            "fit",
        );
    };

    run_once();
    let first: BTreeMap<String, Vec<u8>> = {
        let mut all = snapshot(&data);
        all.extend(snapshot(&chain).into_iter().map(|(k, v)| (format!("chain/{k}"), v)));
        all
    };
    fs::remove_dir_all(&data).unwrap();
    fs::remove_dir_all(&chain).unwrap();

    run_once();
    let second: BTreeMap<String, Vec<u8>> = {
        let mut all = snapshot(&data);
        all.extend(snapshot(&chain).into_iter().map(|(k, v)| (format!("chain/{k}"), v)));
        all
    };
    assert_identical_modulo_timestamps(&first, &second);
}

#[test]
fn seed_override_changes_outputs_and_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let sim = root.join("sim.json");
    write_sim_config(&sim, 21);

    let base = root.join("base");
    let over = root.join("over");
    assert_ok(
        &run(&["simulate", "--config", sim.to_str().unwrap(), "--out", base.to_str().unwrap()]),
        "simulate base",
    );
    assert_ok(
        &run(&[
            "simulate",
            "--seed",
            "99",
            "--config",
            sim.to_str().unwrap(),
            "--out",
            over.to_str().unwrap(),
        ]),
        "simulate override",
    );

    let base_conn = fs::read(base.join("connectivity.csv")).unwrap();
    let over_conn = fs::read(over.join("connectivity.csv")).unwrap();
    assert_ne!(base_conn, over_conn, "--seed 99 must change the generated cohort");

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(over.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], serde_json::json!(99));
    assert_eq!(manifest["config"]["seed"], serde_json::json!(99));
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = run(&["simulate", "--config", "x.json", "--out", "y", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_input_file_exits_one() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        tmp.path().join("absent.json").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.json"), "{}", stderr(&out));
}

#[test]
fn out_of_range_credible_level_exits_one() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let sim = root.join("sim.json");
    let fit = root.join("fit.json");
    write_sim_config(&sim, 5);
    write_fit_config(&fit, false);
    let data = root.join("data");
    let chain = root.join("chain");
    assert_ok(
        &run(&["simulate", "--config", sim.to_str().unwrap(), "--out", data.to_str().unwrap()]),
        "simulate",
    );
    assert_ok(
        &run(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--config",
            fit.to_str().unwrap(),
            "--out",
            chain.to_str().unwrap(),
        ]),
        "fit",
    );

    let out = run(&[
        "detect",
        "--chain",
        chain.to_str().unwrap(),
        "--level",
        "1.5",
        "--out",
        root.join("report.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("credible level"), "{}", stderr(&out));

    // The same chain was fit without retained latents, so netstats must
    // refuse it with a validation error naming the setting.
    let out = run(&[
        "netstats",
        "--chain",
        chain.to_str().unwrap(),
        "--out",
        root.join("metrics.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("retain_latents"), "{}", stderr(&out));
}

#[test]
fn predict_without_config_exits_one_except_averaging() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "predict",
        "--train",
        tmp.path().to_str().unwrap(),
        "--new",
        tmp.path().to_str().unwrap(),
        "--mode",
        "theta",
        "--out",
        tmp.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"), "{}", stderr(&out));
}
