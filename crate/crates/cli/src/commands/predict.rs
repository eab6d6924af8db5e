//! `predict`: impute the missing data block for new subjects from a
//! training dataset, in either direction, with two baselines.
//!
//! Modes: `theta` and `z` predict attributes from new subjects'
//! connectivity; `connectivity` predicts networks from new subjects'
//! attributes; `averaging` is the training-mean-network baseline. With
//! `--truth` the held-out block must be present in the new-subject
//! directory and a `-scores` companion file reports per-target
//! correlations.

use std::path::Path;

use nalgebra::DMatrix;

use latentsna::predict::{
    averaging_baseline, predict_attributes_theta, predict_attributes_z, predict_connectivity,
    PredictedBlock, PredictionResult,
};
use latentsna::sampler::SamplerConfig;

use crate::commands::{ensure_parent, parse_json_config, sibling_file, to_value};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_float, load_dataset, load_new_subjects, write_csv, NewSubjects};
use crate::manifest::write_run_manifest;
use crate::PredictMode;

fn require<T>(block: Option<T>, what: &str, mode: &str) -> CliResult<T> {
    block.ok_or_else(|| {
        CliError::validation(format!("--mode {mode} requires {what} in the new-subject directory"))
    })
}

/// Missing covariate files default to an intercept-only column; training
/// sets with richer covariates will get a dimension error from the model,
/// which is the correct complaint.
fn covariates_or_intercept(block: &Option<DMatrix<f64>>, m: usize) -> DMatrix<f64> {
    block.clone().unwrap_or_else(|| DMatrix::from_element(m, 1, 1.0))
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    train_dir: &Path,
    new_dir: &Path,
    mode: PredictMode,
    config_path: Option<&Path>,
    out: &Path,
    truth: bool,
    seed: Option<u64>,
    argv: &[String],
) -> CliResult<()> {
    let sampler = match (mode, config_path) {
        (PredictMode::Averaging, _) => None,
        (_, Some(path)) => {
            let mut config: SamplerConfig = parse_json_config(path)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            Some(config)
        }
        (_, None) => {
            return Err(CliError::validation(format!(
                "--mode {} requires --config with sampler settings",
                mode.as_str()
            )))
        }
    };

    let train = load_dataset(train_dir)?;
    let new = load_new_subjects(new_dir, train.dataset.n_nodes())?;
    let m = new.subject_ids.len();

    let result = run_mode(&train.dataset, &new, mode, sampler.as_ref(), truth, m)?;

    ensure_parent(out)?;
    let mut written = vec![out.to_path_buf()];
    match &result.predicted {
        PredictedBlock::Attributes(block) => {
            let mut header = vec!["subject_id".to_string()];
            header.extend(train.dataset.attribute_labels.iter().cloned());
            write_csv(
                out,
                &header,
                (0..m).map(|i| {
                    let mut row = vec![new.subject_ids[i].clone()];
                    row.extend((0..block.ncols()).map(|j| fmt_float(block[(i, j)])));
                    row
                }),
            )?;
        }
        PredictedBlock::Connectivity(networks) => {
            let v = train.dataset.n_nodes();
            let header: Vec<String> =
                ["subject_id", "node_u", "node_v", "weight"].map(str::to_string).to_vec();
            write_csv(
                out,
                &header,
                (0..m).flat_map(|i| {
                    let ids = &new.subject_ids;
                    let net = &networks[i];
                    (0..v).flat_map(move |u| {
                        ((u + 1)..v).map(move |w| {
                            vec![
                                ids[i].clone(),
                                (u + 1).to_string(),
                                (w + 1).to_string(),
                                fmt_float(net[(u, w)]),
                            ]
                        })
                    })
                }),
            )?;
        }
    }

    if truth {
        let correlations = result.correlations.as_ref().ok_or_else(|| {
            CliError::runtime("prediction scored no correlations despite --truth".to_string())
        })?;
        let scores_path = sibling_file(out, "-scores");
        match &result.predicted {
            PredictedBlock::Attributes(_) => {
                let header: Vec<String> = ["target", "correlation"].map(str::to_string).to_vec();
                write_csv(
                    &scores_path,
                    &header,
                    correlations.iter().enumerate().map(|(j, &r)| {
                        vec![train.dataset.attribute_labels[j].clone(), fmt_float(r)]
                    }),
                )?;
            }
            PredictedBlock::Connectivity(_) => {
                let header: Vec<String> =
                    ["subject_id", "correlation"].map(str::to_string).to_vec();
                write_csv(
                    &scores_path,
                    &header,
                    correlations
                        .iter()
                        .enumerate()
                        .map(|(i, &r)| vec![new.subject_ids[i].clone(), fmt_float(r)]),
                )?;
            }
        }
        written.push(scores_path);
    }

    let sampler_value = match &sampler {
        Some(config) => to_value(config)?,
        None => serde_json::Value::Null,
    };
    write_run_manifest(
        out,
        "predict",
        argv,
        serde_json::json!({
            "mode": mode.as_str(),
            "method": result.method,
            "truth": truth,
            "sampler": sampler_value,
        }),
        sampler.as_ref().map(|c| c.seed),
        &[train_dir, new_dir],
        &written,
    )?;
    Ok(())
}

fn run_mode(
    train: &latentsna::ConnectomeDataset,
    new: &NewSubjects,
    mode: PredictMode,
    sampler: Option<&SamplerConfig>,
    truth: bool,
    m: usize,
) -> CliResult<PredictionResult> {
    let mode_name = mode.as_str();
    match mode {
        PredictMode::Theta | PredictMode::Z => {
            let connectivity = require(new.connectivity.as_ref(), "connectivity.csv", mode_name)?;
            let conn_cov = covariates_or_intercept(&new.conn_covariates, m);
            let truth_block = if truth {
                Some(require(new.attributes.as_ref(), "attributes.csv (--truth)", mode_name)?)
            } else {
                None
            };
            let config = sampler.expect("sampling modes carry a config");
            let result = match mode {
                PredictMode::Theta => {
                    let attr_cov = covariates_or_intercept(&new.attr_covariates, m);
                    predict_attributes_theta(
                        train,
                        connectivity,
                        &conn_cov,
                        &attr_cov,
                        config,
                        truth_block,
                    )?
                }
                _ => predict_attributes_z(train, connectivity, &conn_cov, config, truth_block)?,
            };
            Ok(result)
        }
        PredictMode::Connectivity => {
            let attributes = require(new.attributes.as_ref(), "attributes.csv", mode_name)?;
            let conn_cov = covariates_or_intercept(&new.conn_covariates, m);
            let attr_cov = covariates_or_intercept(&new.attr_covariates, m);
            let truth_block = if truth {
                Some(require(new.connectivity.as_deref(), "connectivity.csv (--truth)", mode_name)?)
            } else {
                None
            };
            let config = sampler.expect("sampling modes carry a config");
            Ok(predict_connectivity(
                train,
                attributes,
                &conn_cov,
                &attr_cov,
                config,
                truth_block,
            )?)
        }
        PredictMode::Averaging => {
            let truth_block = if truth {
                Some(require(new.connectivity.as_deref(), "connectivity.csv (--truth)", mode_name)?)
            } else {
                None
            };
            Ok(averaging_baseline(train, m, truth_block)?)
        }
    }
}
