//! `simulate`: generate a synthetic cohort dataset directory plus the
//! generating truth needed to score detection and prediction against it.

use std::path::Path;

use serde::Serialize;

use latentsna::simulate::{generate_cohort, SimulationConfig};

use crate::commands::{ensure_dir, parse_json_config, to_value};
use crate::error::CliResult;
use crate::io::{save_dataset, write_json};
use crate::manifest::write_run_manifest;

/// The generating values a consumer needs to score against: which regions
/// carry signal (1-based), the latent covariance column, and the noise
/// variances.
#[derive(Debug, Serialize)]
struct TruthSummary {
    format_version: u32,
    signal_regions: Vec<usize>,
    lambda_z_theta: Vec<f64>,
    lambda_theta: f64,
    sigma2: f64,
    tau2: f64,
}

pub fn run(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    argv: &[String],
) -> CliResult<()> {
    let mut config: SimulationConfig = parse_json_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let cohort = generate_cohort(&config)?;

    ensure_dir(out)?;
    let mut written = save_dataset(out, &cohort.dataset)?;

    let v = cohort.dataset.n_nodes();
    let truth = TruthSummary {
        format_version: 1,
        signal_regions: cohort.signal_regions.iter().map(|&u| u + 1).collect(),
        lambda_z_theta: (0..v).map(|u| cohort.truth.sigma[(u, v)]).collect(),
        lambda_theta: cohort.truth.sigma[(v, v)],
        sigma2: cohort.truth.sigma2,
        tau2: cohort.truth.tau2,
    };
    let truth_path = out.join("truth.json");
    write_json(&truth_path, &truth)?;
    written.push(truth_path);

    write_run_manifest(
        out,
        "simulate",
        argv,
        to_value(&config)?,
        Some(config.seed),
        &[config_path],
        &written,
    )?;
    Ok(())
}
