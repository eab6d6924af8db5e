//! `detect`: credible-interval biomarker report from a fitted chain,
//! written in rank order (largest |posterior mean| first).

use std::path::Path;

use latentsna::detect::{covariance_intervals, rank_regions};

use crate::commands::ensure_parent;
use crate::error::CliResult;
use crate::io::{fmt_float, load_chain, write_csv};
use crate::manifest::write_run_manifest;

pub fn run(chain_dir: &Path, level: f64, out: &Path, argv: &[String]) -> CliResult<()> {
    let chain = load_chain(chain_dir)?;
    let report = covariance_intervals(&chain, level)?;
    let order = rank_regions(&report);

    ensure_parent(out)?;
    let header: Vec<String> = ["rank", "region", "posterior_mean", "lower", "upper", "significant"]
        .map(str::to_string)
        .to_vec();
    write_csv(
        out,
        &header,
        order.iter().enumerate().map(|(k, &idx)| {
            let r = &report.regions[idx];
            vec![
                (k + 1).to_string(),
                (r.region + 1).to_string(),
                fmt_float(r.posterior_mean),
                fmt_float(r.lower),
                fmt_float(r.upper),
                r.significant.to_string(),
            ]
        }),
    )?;

    write_run_manifest(
        out,
        "detect",
        argv,
        serde_json::json!({ "level": level, "sign_flipped": report.sign_flipped }),
        None,
        &[chain_dir],
        &[out.to_path_buf()],
    )?;
    Ok(())
}
