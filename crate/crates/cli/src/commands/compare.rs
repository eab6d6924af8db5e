//! `compare`: run the simulation grid over the detection methods and write
//! the aggregated power/specificity table, plus a companion file listing
//! any replicate failures (always written, possibly header-only).

use std::path::Path;

use serde::{Deserialize, Serialize};

use latentsna::sampler::SamplerConfig;
use latentsna::simulate::{run_comparison, Method, SimulationConfig};

use crate::commands::{ensure_parent, opt_float, parse_json_config, sibling_file, to_value};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_float, write_csv};
use crate::manifest::write_run_manifest;

/// The grid file: cohort configurations, method labels, replicates per
/// cell, sampler settings, and the master seed that derives every
/// replicate's generator and chain seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSpec {
    pub grid: Vec<SimulationConfig>,
    pub methods: Vec<String>,
    pub replicates: usize,
    pub sampler: SamplerConfig,
    pub master_seed: u64,
}

fn parse_method(label: &str) -> CliResult<Method> {
    match label.to_ascii_lowercase().as_str() {
        "latentsna" => Ok(Method::LatentSna),
        "cpm" => Ok(Method::Cpm),
        "lasso" => Ok(Method::Lasso),
        "cca" => Ok(Method::Cca),
        _ => Err(CliError::validation(format!(
            "unknown method {label:?} (valid: LatentSNA, CPM, Lasso, CCA)"
        ))),
    }
}

pub fn run(grid_path: &Path, out: &Path, seed: Option<u64>, argv: &[String]) -> CliResult<()> {
    let mut spec: CompareSpec = parse_json_config(grid_path)?;
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    let methods: Vec<Method> =
        spec.methods.iter().map(|label| parse_method(label)).collect::<CliResult<_>>()?;

    let table = run_comparison(
        &spec.grid,
        &methods,
        spec.replicates,
        &spec.sampler,
        spec.master_seed,
    )?;

    ensure_parent(out)?;
    let header: Vec<String> = [
        "cell",
        "method",
        "replicates",
        "n_subjects",
        "n_nodes",
        "n_attributes",
        "signal_proportion",
        "signal_magnitude",
        "snr",
        "attr_noise_var",
        "power_mean",
        "power_se",
        "specificity_mean",
        "specificity_se",
    ]
    .map(str::to_string)
    .to_vec();
    write_csv(
        out,
        &header,
        table.rows.iter().map(|row| {
            vec![
                (row.cell + 1).to_string(),
                row.method.clone(),
                row.replicates.to_string(),
                row.config.n_subjects.to_string(),
                row.config.n_nodes.to_string(),
                row.config.n_attributes.to_string(),
                fmt_float(row.config.signal_proportion),
                fmt_float(row.config.signal_magnitude),
                fmt_float(row.config.snr),
                fmt_float(row.config.attr_noise_var),
                opt_float(row.power_mean),
                opt_float(row.power_se),
                opt_float(row.specificity_mean),
                opt_float(row.specificity_se),
            ]
        }),
    )?;

    let failures_path = sibling_file(out, "-failures");
    let header: Vec<String> =
        ["cell", "replicate", "method", "message"].map(str::to_string).to_vec();
    write_csv(
        &failures_path,
        &header,
        table.failures.iter().map(|f| {
            vec![
                (f.cell + 1).to_string(),
                (f.replicate + 1).to_string(),
                f.method.clone(),
                f.message.clone(),
            ]
        }),
    )?;

    write_run_manifest(
        out,
        "compare",
        argv,
        to_value(&spec)?,
        Some(spec.master_seed),
        &[grid_path],
        &[out.to_path_buf(), failures_path],
    )?;
    Ok(())
}
