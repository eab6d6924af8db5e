//! `fit`: run the Gibbs sampler on a dataset directory and persist the
//! chain, convergence diagnostics, and optional trace plots.

use std::path::Path;

use latentsna::data::check_edge_standardized;
use latentsna::diagnostics::convergence_summary;
use latentsna::sampler::SamplerConfig;
use latentsna::{run_chain, standardize_connectivity};

use crate::commands::{ensure_dir, opt_float, parse_json_config, to_value};
use crate::error::CliResult;
use crate::io::{atomic_write, fmt_float, load_dataset, save_chain, write_csv};
use crate::manifest::write_run_manifest;
use crate::svg::trace_svg;

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: &Path,
    config_path: &Path,
    out: &Path,
    standardize: bool,
    plots: bool,
    seed: Option<u64>,
    argv: &[String],
) -> CliResult<()> {
    let mut config: SamplerConfig = parse_json_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let loaded = load_dataset(data)?;
    let dataset = if standardize {
        standardize_connectivity(&loaded.dataset)?
    } else {
        check_edge_standardized(&loaded.dataset)?;
        loaded.dataset
    };

    let chain = run_chain(&dataset, &config)?;

    ensure_dir(out)?;
    let mut written = save_chain(out, &chain)?;

    if chain.len() >= 10 {
        let diagnostics = convergence_summary(&chain)?;
        let path = out.join("convergence.csv");
        let header: Vec<String> =
            ["parameter", "mean", "mcse", "lag1_autocorr", "ess"].map(str::to_string).to_vec();
        write_csv(
            &path,
            &header,
            diagnostics.iter().map(|d| {
                vec![
                    d.name.clone(),
                    fmt_float(d.mean),
                    opt_float(d.mcse),
                    opt_float(d.lag1_autocorr),
                    opt_float(d.ess),
                ]
            }),
        )?;
        written.push(path);
    }

    if plots {
        let v = dataset.n_nodes();
        let mut traces: Vec<(String, Vec<f64>)> = (0..v)
            .map(|u| {
                (
                    format!("lambda_z_theta[{}]", u + 1),
                    chain.lambda_z_theta.iter().map(|draw| draw[u]).collect(),
                )
            })
            .collect();
        traces.push(("sigma2".to_string(), chain.sigma2.clone()));
        traces.push(("tau2".to_string(), chain.tau2.clone()));
        let path = out.join("traces.svg");
        atomic_write(&path, trace_svg(&traces).as_bytes())?;
        written.push(path);
    }

    write_run_manifest(
        out,
        "fit",
        argv,
        serde_json::json!({ "sampler": to_value(&config)?, "standardize": standardize }),
        Some(config.seed),
        &[config_path, data],
        &written,
    )?;
    Ok(())
}
