//! Synthetic coupled network/attribute cohorts with known ground truth,
//! plus the benchmarking harness that scores detection methods on power and
//! specificity over replicated cohort grids.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    cca_fit, cca_flag_regions, cpm_fit, cpm_region_flags, lasso_fit_cv, lasso_region_flags,
};
use crate::data::{standardize_connectivity, ConnectomeDataset};
use crate::detect::covariance_intervals;
use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_spd, mean, pearson, sample_variance};
use crate::model::{ModelState, LATENT_DIM};
use crate::predict::{predict_attributes_theta, PredictedBlock};
use crate::sampler::{derive_seed, run_chain, SamplerConfig};

fn default_signal_magnitude() -> f64 {
    0.9
}

fn default_attr_noise_var() -> f64 {
    0.5
}

/// Generator settings for one synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Subjects.
    pub n_subjects: usize,
    /// Network nodes.
    pub n_nodes: usize,
    /// Attribute columns.
    pub n_attributes: usize,
    /// Fraction of regions carrying latent-covariance signal.
    pub signal_proportion: f64,
    /// Latent covariance placed on each signal region.
    #[serde(default = "default_signal_magnitude")]
    pub signal_magnitude: f64,
    /// Ratio of bilinear-signal variance to connectivity noise variance.
    pub snr: f64,
    /// Attribute noise variance.
    #[serde(default = "default_attr_noise_var")]
    pub attr_noise_var: f64,
    /// Generator seed.
    pub seed: u64,
}

impl SimulationConfig {
    /// Validates counts and ranges.
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Config(
                "cohort generation requires at least 2 subjects (edge standardization)".into(),
            ));
        }
        if self.n_nodes == 0 || self.n_attributes == 0 {
            return Err(Error::Config("node and attribute counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.signal_proportion) {
            return Err(Error::Config(format!(
                "signal proportion must lie in [0, 1], got {}",
                self.signal_proportion
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Config("snr must be positive".into()));
        }
        if !(self.attr_noise_var > 0.0) {
            return Err(Error::Config("attribute noise variance must be positive".into()));
        }
        Ok(())
    }

    /// Number of signal regions: round(signal_proportion * V).
    pub fn n_signal_regions(&self) -> usize {
        (self.signal_proportion * self.n_nodes as f64).round() as usize
    }
}

/// A generated cohort: the (connectivity-standardized) dataset, the exact
/// generating state, the raw pre-standardization networks, and the signal
/// region indices.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub dataset: ConnectomeDataset,
    pub raw_connectivity: Vec<DMatrix<f64>>,
    pub truth: ModelState,
    pub signal_regions: Vec<usize>,
    pub config: SimulationConfig,
}

/// Builds the latent covariance: unit diagonal, `signal_magnitude` between
/// each signal region and the attribute latent, 0.85 among signal regions,
/// with a power-of-ten ridge ladder on the z block if the result is not
/// positive definite.
fn build_sigma(
    v: usize,
    signal_regions: &[usize],
    signal_magnitude: f64,
) -> Result<DMatrix<f64>> {
    let dim = v + LATENT_DIM;
    let mut sigma = DMatrix::identity(dim, dim);
    for &u in signal_regions {
        sigma[(u, v)] = signal_magnitude;
        sigma[(v, u)] = signal_magnitude;
    }
    for (a, &u) in signal_regions.iter().enumerate() {
        for &w in signal_regions.iter().skip(a + 1) {
            sigma[(u, w)] = 0.85;
            sigma[(w, u)] = 0.85;
        }
    }
    if cholesky_spd(&sigma, "latent covariance").is_ok() {
        return Ok(sigma);
    }
    for j in 0..10 {
        let ridge = 1e-6 * 10f64.powi(j);
        let mut repaired = sigma.clone();
        for u in 0..v {
            repaired[(u, u)] += ridge;
        }
        if cholesky_spd(&repaired, "latent covariance").is_ok() {
            return Ok(repaired);
        }
    }
    Err(Error::NotPositiveDefinite(format!(
        "latent covariance is not positive definite for magnitude {signal_magnitude} with {} \
         signal regions among {v}, even after the ridge ladder",
        signal_regions.len()
    )))
}

/// Generates one cohort: selects signal regions uniformly at random, builds
/// the latent covariance, draws latents and noise, assembles both data
/// blocks with zero covariate effects, and standardizes connectivity
/// edge-wise. The raw networks are kept alongside.
pub fn generate_cohort(config: &SimulationConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let n = config.n_subjects;
    let v = config.n_nodes;
    let p = config.n_attributes;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let k = config.n_signal_regions();
    let mut signal_regions: Vec<usize> = sample(&mut rng, v, k).into_iter().collect();
    signal_regions.sort_unstable();

    let sigma = build_sigma(v, &signal_regions, config.signal_magnitude)?;
    let chol = cholesky_spd(&sigma, "latent covariance")?;

    // Latents per subject: t_i = L eps, eps ~ N(0, I).
    let dim = v + LATENT_DIM;
    let mut z = DMatrix::zeros(n, v);
    let mut theta = DVector::zeros(n);
    for i in 0..n {
        let eps = DVector::from_fn(dim, |_, _| linalg::draw_std_normal(&mut rng));
        let t = chol.l() * eps;
        for u in 0..v {
            z[(i, u)] = t[u];
        }
        theta[i] = t[v];
    }

    // Connectivity noise variance from the realized bilinear signal.
    let mut bilinear = Vec::with_capacity(n * v * (v - 1) / 2);
    for i in 0..n {
        for u in 0..v {
            for w in (u + 1)..v {
                bilinear.push(z[(i, u)] * z[(i, w)]);
            }
        }
    }
    let sigma2 = if bilinear.len() >= 2 {
        let var = sample_variance(&bilinear);
        if var > 0.0 {
            var / config.snr
        } else {
            1.0
        }
    } else {
        1.0
    };
    let noise_sd = sigma2.sqrt();

    let mut raw_connectivity = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = DMatrix::zeros(v, v);
        for u in 0..v {
            for w in (u + 1)..v {
                let value =
                    z[(i, u)] * z[(i, w)] + noise_sd * linalg::draw_std_normal(&mut rng);
                x[(u, w)] = value;
                x[(w, u)] = value;
            }
        }
        raw_connectivity.push(x);
    }

    let attr_sd = config.attr_noise_var.sqrt();
    let attributes = DMatrix::from_fn(n, p, |i, _| {
        theta[i] + attr_sd * linalg::draw_std_normal(&mut rng)
    });

    let intercept_only = DMatrix::from_element(n, 1, 1.0);
    let raw_dataset = ConnectomeDataset::new(
        raw_connectivity.clone(),
        attributes,
        intercept_only.clone(),
        intercept_only,
        ConnectomeDataset::default_node_labels(v),
        ConnectomeDataset::default_attribute_labels(p),
    )?;
    let dataset = standardize_connectivity(&raw_dataset)?;

    let truth = ModelState {
        z,
        theta,
        sigma,
        beta: DVector::zeros(1),
        gamma: DVector::zeros(1),
        a: DVector::zeros(n),
        b: DVector::zeros(p),
        sigma2,
        tau2: config.attr_noise_var,
    };

    Ok(SyntheticCohort {
        dataset,
        raw_connectivity,
        truth,
        signal_regions,
        config: config.clone(),
    })
}

/// Power, specificity, and optional held-out prediction correlation for one
/// method on one cohort. Power (specificity) is `None` when the cohort has
/// no signal (no null) regions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub power: Option<f64>,
    pub specificity: Option<f64>,
    pub prediction_correlation: Option<f64>,
}

/// Scores region flags against the cohort's ground truth: power =
/// flagged-true / total-true, specificity = unflagged-null / total-null.
pub fn score_method(
    cohort: &SyntheticCohort,
    method: &str,
    flags: &[bool],
    prediction_correlation: Option<f64>,
) -> Result<MethodScore> {
    let v = cohort.dataset.n_nodes();
    if flags.len() != v {
        return Err(Error::Dimension(format!(
            "{} flags for {v} regions",
            flags.len()
        )));
    }
    let is_signal = |u: usize| cohort.signal_regions.binary_search(&u).is_ok();
    let total_true = cohort.signal_regions.len();
    let total_null = v - total_true;
    let flagged_true = (0..v).filter(|&u| is_signal(u) && flags[u]).count();
    let unflagged_null = (0..v).filter(|&u| !is_signal(u) && !flags[u]).count();
    Ok(MethodScore {
        method: method.to_string(),
        power: (total_true > 0).then(|| flagged_true as f64 / total_true as f64),
        specificity: (total_null > 0).then(|| unflagged_null as f64 / total_null as f64),
        prediction_correlation,
    })
}

/// Detection methods the harness can run on a cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    LatentSna,
    Cpm,
    Lasso,
    Cca,
}

impl Method {
    /// Stable method label used in tables and CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Method::LatentSna => "LatentSNA",
            Method::Cpm => "CPM",
            Method::Lasso => "Lasso",
            Method::Cca => "CCA",
        }
    }
}

/// Univariate target for the edge-screening and penalized baselines: the
/// attribute itself at P = 1, otherwise the per-subject row sum.
pub fn baseline_target(dataset: &ConnectomeDataset) -> DVector<f64> {
    DVector::from_fn(dataset.n_subjects(), |i, _| {
        dataset.attributes.row(i).sum()
    })
}

/// Runs one method on one cohort and returns its region flags.
pub fn method_region_flags(
    cohort: &SyntheticCohort,
    method: Method,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<Vec<bool>> {
    let v = cohort.dataset.n_nodes();
    let e = cohort.dataset.n_edges();
    match method {
        Method::LatentSna => {
            let mut cfg = sampler.clone();
            cfg.seed = seed;
            cfg.retain_latents = false;
            let chain = run_chain(&cohort.dataset, &cfg)?;
            let report = covariance_intervals(&chain, 0.95)?;
            let mut flags = vec![false; v];
            for r in report.flagged() {
                flags[r] = true;
            }
            Ok(flags)
        }
        Method::Cpm => {
            let edges = cohort.dataset.edge_matrix();
            let target = baseline_target(&cohort.dataset);
            let model = cpm_fit(&edges, &target, 0.01)?;
            cpm_region_flags(&model, v, e)
        }
        Method::Lasso => {
            let edges = cohort.dataset.edge_matrix();
            let target = baseline_target(&cohort.dataset);
            let model = lasso_fit_cv(&edges, &target, 10, seed)?;
            lasso_region_flags(&model, v, e)
        }
        Method::Cca => {
            let edges = cohort.dataset.edge_matrix();
            let model = cca_fit(&edges, &cohort.dataset.attributes)?;
            cca_flag_regions(&model, v, cohort.config.signal_proportion)
        }
    }
}

/// One aggregated comparison row: a method's replicate-averaged metrics on
/// one grid cell, with Monte Carlo standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub cell: usize,
    pub config: SimulationConfig,
    pub method: String,
    pub replicates: usize,
    pub power_mean: Option<f64>,
    pub power_se: Option<f64>,
    pub specificity_mean: Option<f64>,
    pub specificity_se: Option<f64>,
}

/// A replicate that errored, identified by cell, replicate, and method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub cell: usize,
    pub replicate: usize,
    pub method: String,
    pub message: String,
}

/// The full comparison study output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub failures: Vec<ReplicateFailure>,
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let m = mean(values);
    let se = if values.len() >= 2 {
        Some((sample_variance(values) / values.len() as f64).sqrt())
    } else {
        None
    };
    (Some(m), se)
}

/// Runs every method on every grid cell for `replicates` cohorts each,
/// aggregating power and specificity with MC standard errors. Failures are
/// recorded per (cell, replicate, method) and never dropped silently;
/// results are deterministic given the master seed.
pub fn run_comparison(
    grid: &[SimulationConfig],
    methods: &[Method],
    replicates: usize,
    sampler: &SamplerConfig,
    master_seed: u64,
) -> Result<ComparisonTable> {
    if grid.is_empty() || methods.is_empty() || replicates == 0 {
        return Err(Error::InvalidInput(
            "comparison needs a nonempty grid, methods, and replicates >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell, base) in grid.iter().enumerate() {
        let mut per_method: Vec<(Vec<f64>, Vec<f64>, usize)> =
            vec![(Vec::new(), Vec::new(), 0); methods.len()];
        for rep in 0..replicates {
            let mut cfg = base.clone();
            cfg.seed = derive_seed(master_seed, &[cell as u64, rep as u64, 0]);
            let cohort = match generate_cohort(&cfg) {
                Ok(c) => c,
                Err(e) => {
                    for m in methods {
                        failures.push(ReplicateFailure {
                            cell,
                            replicate: rep,
                            method: m.label().to_string(),
                            message: format!("cohort generation failed: {e}"),
                        });
                    }
                    continue;
                }
            };
            for (mi, m) in methods.iter().enumerate() {
                let seed = derive_seed(master_seed, &[cell as u64, rep as u64, 1 + mi as u64]);
                match method_region_flags(&cohort, *m, sampler, seed)
                    .and_then(|flags| score_method(&cohort, m.label(), &flags, None))
                {
                    Ok(score) => {
                        per_method[mi].2 += 1;
                        if let Some(p) = score.power {
                            per_method[mi].0.push(p);
                        }
                        if let Some(s) = score.specificity {
                            per_method[mi].1.push(s);
                        }
                    }
                    Err(e) => failures.push(ReplicateFailure {
                        cell,
                        replicate: rep,
                        method: m.label().to_string(),
                        message: e.to_string(),
                    }),
                }
            }
        }
        for (mi, m) in methods.iter().enumerate() {
            let (powers, specs, ok) = &per_method[mi];
            let (power_mean, power_se) = mean_and_se(powers);
            let (specificity_mean, specificity_se) = mean_and_se(specs);
            rows.push(ComparisonRow {
                cell,
                config: base.clone(),
                method: m.label().to_string(),
                replicates: *ok,
                power_mean,
                power_se,
                specificity_mean,
                specificity_se,
            });
        }
    }
    Ok(ComparisonTable { rows, failures })
}

/// Paired held-out prediction accuracy of the joint model fitted on the
/// full multivariate attribute block versus on its single-column row sum.
/// Both fits are scored against the held-out row-sum target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultivariateVsSum {
    /// Per-split correlation of the multivariate fit's predicted row sum
    /// with the held-out true row sum.
    pub multivariate: Vec<f64>,
    /// Per-split correlation of the sum-score fit's prediction with the
    /// held-out true row sum.
    pub sum_score: Vec<f64>,
    /// Per-split, per-column correlations of the multivariate fit.
    pub per_column: Vec<Vec<f64>>,
}

impl MultivariateVsSum {
    pub fn multivariate_mean(&self) -> f64 {
        mean(&self.multivariate)
    }

    pub fn sum_score_mean(&self) -> f64 {
        mean(&self.sum_score)
    }
}

fn subset_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn split_dataset(
    dataset: &ConnectomeDataset,
    train_rows: &[usize],
) -> Result<ConnectomeDataset> {
    ConnectomeDataset::new(
        train_rows.iter().map(|&i| dataset.connectivity[i].clone()).collect(),
        subset_rows(&dataset.attributes, train_rows),
        subset_rows(&dataset.conn_covariates, train_rows),
        subset_rows(&dataset.attr_covariates, train_rows),
        dataset.node_labels.clone(),
        dataset.attribute_labels.clone(),
    )
}

fn with_attributes(
    dataset: &ConnectomeDataset,
    attributes: DMatrix<f64>,
    labels: Vec<String>,
) -> Result<ConnectomeDataset> {
    ConnectomeDataset::new(
        dataset.connectivity.clone(),
        attributes,
        dataset.conn_covariates.clone(),
        dataset.attr_covariates.clone(),
        dataset.node_labels.clone(),
        labels,
    )
}

/// Fits the joint model twice per split — once on the P-column attribute
/// block, once on its single-column row sum — and reports the held-out
/// attribute prediction correlations for both on the common row-sum target.
/// Requires P >= 2.
pub fn compare_multivariate_vs_sum(
    dataset: &ConnectomeDataset,
    sampler: &SamplerConfig,
    n_splits: usize,
    test_fraction: f64,
    master_seed: u64,
) -> Result<MultivariateVsSum> {
    if dataset.n_attributes() < 2 {
        return Err(Error::InvalidInput(
            "multivariate comparison requires P >= 2".into(),
        ));
    }
    if n_splits == 0 {
        return Err(Error::InvalidInput("need at least one split".into()));
    }
    let n = dataset.n_subjects();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} leaves an empty train or test side"
        )));
    }

    let sums = baseline_target(dataset);
    let sum_dataset = with_attributes(
        dataset,
        DMatrix::from_fn(n, 1, |i, _| sums[i]),
        vec!["attribute_sum".to_string()],
    )?;

    let mut multivariate = Vec::with_capacity(n_splits);
    let mut sum_score = Vec::with_capacity(n_splits);
    let mut per_column = Vec::with_capacity(n_splits);

    for split in 0..n_splits {
        let mut rng =
            ChaCha12Rng::seed_from_u64(derive_seed(master_seed, &[split as u64, 0]));
        let test_rows: Vec<usize> = {
            let mut s: Vec<usize> = sample(&mut rng, n, n_test).into_iter().collect();
            s.sort_unstable();
            s
        };
        let train_rows: Vec<usize> =
            (0..n).filter(|i| test_rows.binary_search(i).is_err()).collect();

        let test_conn: Vec<DMatrix<f64>> = test_rows
            .iter()
            .map(|&i| dataset.connectivity[i].clone())
            .collect();
        let test_conn_cov = subset_rows(&dataset.conn_covariates, &test_rows);
        let test_attr_cov = subset_rows(&dataset.attr_covariates, &test_rows);
        let truth_multi = subset_rows(&dataset.attributes, &test_rows);
        let truth_sum = DVector::from_fn(test_rows.len(), |i, _| sums[test_rows[i]]);

        let mut cfg = sampler.clone();

        // Multivariate fit.
        cfg.seed = derive_seed(master_seed, &[split as u64, 1]);
        let train_multi = split_dataset(dataset, &train_rows)?;
        let result = predict_attributes_theta(
            &train_multi,
            &test_conn,
            &test_conn_cov,
            &test_attr_cov,
            &cfg,
            Some(&truth_multi),
        )?;
        let predicted = match &result.predicted {
            PredictedBlock::Attributes(m) => m.clone(),
            PredictedBlock::Connectivity(_) => unreachable!("attribute prediction"),
        };
        per_column.push(result.correlations.clone().unwrap_or_default());
        let predicted_sum: Vec<f64> =
            (0..predicted.nrows()).map(|i| predicted.row(i).sum()).collect();
        multivariate
            .push(pearson(&predicted_sum, truth_sum.as_slice()).unwrap_or(0.0));

        // Row-sum fit.
        cfg.seed = derive_seed(master_seed, &[split as u64, 2]);
        let train_sum = split_dataset(&sum_dataset, &train_rows)?;
        let truth_sum_mat = DMatrix::from_fn(test_rows.len(), 1, |i, _| truth_sum[i]);
        let result = predict_attributes_theta(
            &train_sum,
            &test_conn,
            &test_conn_cov,
            &test_attr_cov,
            &cfg,
            Some(&truth_sum_mat),
        )?;
        let r = result
            .correlations
            .as_ref()
            .and_then(|c| c.first().copied())
            .unwrap_or(0.0);
        sum_score.push(r);
    }

    Ok(MultivariateVsSum {
        multivariate,
        sum_score,
        per_column,
    })
}
