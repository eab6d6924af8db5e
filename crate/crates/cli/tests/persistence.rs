//! Round-trip and validation tests for the dataset and chain directory
//! formats: everything written must reload bit-exactly, and malformed
//! inputs must fail with messages naming the file, subject, and edge.

use latentsna::data::ConnectomeDataset;
use latentsna::detect::covariance_intervals;
use latentsna::sampler::{run_chain, SamplerConfig};
use latentsna::simulate::{generate_cohort, SimulationConfig};
use latentsna_cli::io::{load_dataset, load_chain, save_chain, save_dataset};
use nalgebra::DMatrix;
use std::fs;
use std::path::Path;
use tempfile::TempDir;

fn small_dataset() -> ConnectomeDataset {
    // N = 3, V = 4, P = 2, with a real (non-intercept) covariate column on
    // both sides so the round-trip exercises multi-column covariate tables.
    let weights = [
        [0.25f64, -0.5, 1.125, 0.75, -0.375, 2.0],
        [-1.0, 0.5, 0.3, -0.7, 1.1, 0.01],
        [3.5, -2.25, 0.125, 0.625, -0.875, 1.4375],
    ];
    let connectivity: Vec<DMatrix<f64>> = weights
        .iter()
        .map(|w| {
            let mut x = DMatrix::zeros(4, 4);
            let mut k = 0;
            for u in 0..4 {
                for v in (u + 1)..4 {
                    x[(u, v)] = w[k];
                    x[(v, u)] = w[k];
                    k += 1;
                }
            }
            x
        })
        .collect();
    let attributes =
        DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 1.0 / 3.0, 0.4, -0.55, 6.02e3]);
    let conn_cov = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 1.0, -0.25, 1.0, 2.5]);
    let attr_cov = DMatrix::from_row_slice(3, 2, &[1.0, -1.5, 1.0, 0.75, 1.0, 0.0]);
    ConnectomeDataset::new(
        connectivity,
        attributes,
        conn_cov,
        attr_cov,
        ConnectomeDataset::default_node_labels(4),
        vec!["anxiety".into(), "withdrawal".into()],
    )
    .unwrap()
}

fn small_chain(retain_latents: bool) -> latentsna::PosteriorChain {
    let cohort = generate_cohort(&SimulationConfig {
        n_subjects: 12,
        n_nodes: 5,
        n_attributes: 2,
        signal_proportion: 0.2,
        signal_magnitude: 0.9,
        snr: 1.0,
        attr_noise_var: 1.0,
        seed: 31,
    })
    .unwrap();
    let config = SamplerConfig {
        n_iterations: 30,
        burn_in: 10,
        thin: 2,
        seed: 32,
        init_scale: 1.0,
        retain_latents,
    };
    run_chain(&cohort.dataset, &config).unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).unwrap();
}

/// A syntactically complete N=2, V=3, P=1 dataset directory.
fn write_minimal(dir: &Path) {
    write(
        dir,
        "attributes.csv",
        "subject_id,score\na,0.5\nb,-0.5\n",
    );
    write(dir, "covariates_conn.csv", "subject_id,c1\na,1.0\nb,1.0\n");
    write(dir, "covariates_attr.csv", "subject_id,g1\na,1.0\nb,1.0\n");
    write(
        dir,
        "connectivity.csv",
        "subject_id,node_u,node_v,weight\n\
         a,1,2,0.1\na,1,3,0.2\na,2,3,0.3\n\
         b,1,2,-0.1\nb,1,3,-0.2\nb,2,3,-0.3\n",
    );
}

#[test]
fn minimal_dataset_loads_with_three_edges_per_subject() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.subject_ids, vec!["a", "b"]);
    assert_eq!(loaded.dataset.n_subjects(), 2);
    assert_eq!(loaded.dataset.n_nodes(), 3);
    assert_eq!(loaded.dataset.n_edges(), 3);
    assert_eq!(loaded.dataset.n_attributes(), 1);
    assert_eq!(loaded.dataset.connectivity[0][(0, 1)], 0.1);
    assert_eq!(loaded.dataset.connectivity[1][(1, 2)], -0.3);
    assert_eq!(loaded.dataset.attribute_labels, vec!["score"]);
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let original = small_dataset();
    save_dataset(dir.path(), &original).unwrap();
    let reloaded = load_dataset(dir.path()).unwrap().dataset;

    assert_eq!(reloaded.n_subjects(), original.n_subjects());
    assert_eq!(reloaded.n_nodes(), original.n_nodes());
    for i in 0..original.n_subjects() {
        assert_eq!(reloaded.connectivity[i], original.connectivity[i]);
    }
    assert_eq!(reloaded.attributes, original.attributes);
    assert_eq!(reloaded.conn_covariates, original.conn_covariates);
    assert_eq!(reloaded.attr_covariates, original.attr_covariates);
    assert_eq!(reloaded.attribute_labels, original.attribute_labels);
}

#[test]
fn duplicate_edge_row_names_subject_and_edge() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(
        dir.path(),
        "connectivity.csv",
        "subject_id,node_u,node_v,weight\n\
         a,1,2,0.1\na,1,2,0.1\na,1,3,0.2\na,2,3,0.3\n\
         b,1,2,-0.1\nb,1,3,-0.2\nb,2,3,-0.3\n",
    );
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("subject a edge (1, 2)"), "{err}");
    assert!(err.contains("duplicate edge row"), "{err}");
}

#[test]
fn conflicting_duplicate_weights_report_both_values() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(
        dir.path(),
        "connectivity.csv",
        "subject_id,node_u,node_v,weight\n\
         a,1,2,0.1\na,1,2,0.9\na,1,3,0.2\na,2,3,0.3\n\
         b,1,2,-0.1\nb,1,3,-0.2\nb,2,3,-0.3\n",
    );
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("subject a edge (1, 2)"), "{err}");
    assert!(err.contains("conflicting weights"), "{err}");
}

#[test]
fn missing_edge_pair_is_rejected() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(
        dir.path(),
        "connectivity.csv",
        "subject_id,node_u,node_v,weight\n\
         a,1,2,0.1\na,1,3,0.2\na,2,3,0.3\n\
         b,1,2,-0.1\nb,2,3,-0.3\n",
    );
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("subject b is missing edge (1, 3)"), "{err}");
}

#[test]
fn subject_mismatch_across_files_names_both_files() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(
        dir.path(),
        "covariates_conn.csv",
        "subject_id,c1\na,1.0\nc,1.0\n",
    );
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("lacks subject b"), "{err}");
    assert!(err.contains("attributes.csv"), "{err}");
    assert!(err.contains("covariates_conn.csv"), "{err}");
}

#[test]
fn malformed_header_is_rejected() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(dir.path(), "attributes.csv", "id,score\na,0.5\nb,-0.5\n");
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("malformed header"), "{err}");
    assert!(err.contains("subject_id"), "{err}");
}

#[test]
fn unparseable_weight_names_file_and_row() {
    let dir = TempDir::new().unwrap();
    write_minimal(dir.path());
    write(
        dir.path(),
        "connectivity.csv",
        "subject_id,node_u,node_v,weight\n\
         a,1,2,abc\na,1,3,0.2\na,2,3,0.3\n\
         b,1,2,-0.1\nb,1,3,-0.2\nb,2,3,-0.3\n",
    );
    let err = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("connectivity.csv"), "{err}");
    assert!(err.contains("abc"), "{err}");
}

#[test]
fn chain_round_trip_is_bit_exact_with_latents() {
    let dir = TempDir::new().unwrap();
    let chain = small_chain(true);
    save_chain(dir.path(), &chain).unwrap();
    let reloaded = load_chain(dir.path()).unwrap();

    assert_eq!(reloaded.len(), chain.len());
    assert_eq!(reloaded.lambda_z_theta, chain.lambda_z_theta);
    assert_eq!(reloaded.lambda_theta, chain.lambda_theta);
    assert_eq!(reloaded.sigma2, chain.sigma2);
    assert_eq!(reloaded.tau2, chain.tau2);
    assert_eq!(reloaded.z, chain.z);
    assert_eq!(reloaded.theta, chain.theta);
    assert_eq!(reloaded.reference_signs, chain.reference_signs);
    assert_eq!(reloaded.config, chain.config);
    assert_eq!(reloaded.counters, chain.counters);
}

#[test]
fn chain_without_latents_omits_latent_files_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let chain = small_chain(false);
    assert!(chain.z.is_none());
    save_chain(dir.path(), &chain).unwrap();
    assert!(!dir.path().join("z.csv").exists());
    assert!(!dir.path().join("theta.csv").exists());

    let reloaded = load_chain(dir.path()).unwrap();
    assert_eq!(reloaded.lambda_z_theta, chain.lambda_z_theta);
    assert!(reloaded.z.is_none());
    assert!(reloaded.theta.is_none());
}

#[test]
fn detection_report_from_reloaded_chain_matches_original() {
    let dir = TempDir::new().unwrap();
    let chain = small_chain(false);
    let before = covariance_intervals(&chain, 0.95).unwrap();
    save_chain(dir.path(), &chain).unwrap();
    let after = covariance_intervals(&load_chain(dir.path()).unwrap(), 0.95).unwrap();

    assert_eq!(before.sign_flipped, after.sign_flipped);
    assert_eq!(before.regions.len(), after.regions.len());
    for (a, b) in before.regions.iter().zip(&after.regions) {
        assert_eq!(a.region, b.region);
        assert_eq!(a.posterior_mean, b.posterior_mean);
        assert_eq!(a.lower, b.lower);
        assert_eq!(a.upper, b.upper);
        assert_eq!(a.significant, b.significant);
    }
}

#[test]
fn chain_format_version_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let chain = small_chain(false);
    save_chain(dir.path(), &chain).unwrap();

    let meta_path = dir.path().join("meta.json");
    let meta = fs::read_to_string(&meta_path).unwrap();
    fs::write(
        &meta_path,
        meta.replace("\"format_version\": 1", "\"format_version\": 99"),
    )
    .unwrap();
    let err = load_chain(dir.path()).unwrap_err().to_string();
    assert!(err.contains("format version 99"), "{err}");
}

#[test]
fn truncated_chain_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let chain = small_chain(false);
    save_chain(dir.path(), &chain).unwrap();

    let lambda_path = dir.path().join("lambda_z_theta.csv");
    let contents = fs::read_to_string(&lambda_path).unwrap();
    let kept: Vec<&str> = contents.lines().take(chain.len()).collect();
    fs::write(&lambda_path, format!("{}\n", kept.join("\n"))).unwrap();

    let err = load_chain(dir.path()).unwrap_err().to_string();
    assert!(err.contains("truncated chain file"), "{err}");
}
