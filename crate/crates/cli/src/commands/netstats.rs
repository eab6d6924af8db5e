//! `netstats`: centrality metrics of the posterior-mean latent network.
//!
//! Strength is computed on the raw (possibly negative) latent weights;
//! closeness and betweenness on the positive-shifted graph with shifted
//! weights as shortest-path distances — that convention is recorded in the
//! manifest. A companion `-shape` file reports distribution-shape tests of
//! the strength vector when the network is large enough for them.

use std::path::Path;

use latentsna::netmetrics::{
    betweenness, closeness, kurtosis_test, latent_network, node_strength, positive_shift,
    skewness_test,
};

use crate::commands::ensure_parent;
use crate::error::CliResult;
use crate::io::{fmt_float, load_chain, write_csv};
use crate::manifest::write_run_manifest;

pub fn run(chain_dir: &Path, out: &Path, argv: &[String]) -> CliResult<()> {
    let chain = load_chain(chain_dir)?;
    let n = chain.reference_signs.nrows();
    let subjects: Vec<usize> = (0..n).collect();
    let graph = latent_network(&chain, &subjects)?;
    let v = graph.n_nodes();

    let strength = node_strength(&graph);
    let shifted = positive_shift(&graph);
    let close = closeness(&shifted);
    let between = betweenness(&shifted);

    ensure_parent(out)?;
    let header: Vec<String> =
        ["node", "strength", "closeness", "betweenness"].map(str::to_string).to_vec();
    write_csv(
        out,
        &header,
        (0..v).map(|u| {
            vec![
                (u + 1).to_string(),
                fmt_float(strength[u]),
                fmt_float(close[u]),
                fmt_float(between[u]),
            ]
        }),
    )?;

    let shape_path = crate::commands::sibling_file(out, "-shape");
    let mut shape_rows: Vec<Vec<String>> = Vec::new();
    if v >= 8 {
        let (statistic, p_value) = skewness_test(&strength)?;
        shape_rows.push(vec!["skewness".to_string(), fmt_float(statistic), fmt_float(p_value)]);
    }
    if v >= 20 {
        let (statistic, p_value) = kurtosis_test(&strength)?;
        shape_rows.push(vec!["kurtosis".to_string(), fmt_float(statistic), fmt_float(p_value)]);
    }
    let header: Vec<String> = ["test", "statistic", "p_value"].map(str::to_string).to_vec();
    write_csv(&shape_path, &header, shape_rows)?;

    write_run_manifest(
        out,
        "netstats",
        argv,
        serde_json::json!({
            "subjects": "all",
            "distance_convention":
                "closeness/betweenness treat positive-shifted edge weights as path distances; \
                 strength uses unshifted weights",
            "shape_tests": "node strength distribution (skewness needs V >= 8, kurtosis V >= 20)",
        }),
        None,
        &[chain_dir],
        &[out.to_path_buf(), shape_path],
    )?;
    Ok(())
}
