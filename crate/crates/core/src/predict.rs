//! Out-of-sample prediction in both directions: attributes from a new
//! subject's network (two estimator variants plus the joint imputation
//! path) and a new subject's network from their attributes, with a
//! mean-network baseline for the latter.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::data::ConnectomeDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, invert_spd, ols, pearson, sample_variance};
use crate::sampler::{derive_seed, run_chain_masked, ObservationMask, SamplerConfig};

/// The predicted missing block, shaped like the data it stands in for.
#[derive(Debug, Clone)]
pub enum PredictedBlock {
    /// M×P attribute rows for the new subjects.
    Attributes(DMatrix<f64>),
    /// One symmetric V×V network per new subject.
    Connectivity(Vec<DMatrix<f64>>),
}

/// A prediction with its method tag and, when ground truth was supplied,
/// per-target Pearson correlations: one per attribute column for attribute
/// predictions, one per subject (across edges) for network predictions.
#[derive(Debug, Clone)]
pub struct PredictionResult {
    pub method: &'static str,
    pub predicted: PredictedBlock,
    pub correlations: Option<Vec<f64>>,
}

impl PredictionResult {
    /// The attribute block, or an error for network predictions.
    pub fn attributes(&self) -> Result<&DMatrix<f64>> {
        match &self.predicted {
            PredictedBlock::Attributes(m) => Ok(m),
            PredictedBlock::Connectivity(_) => Err(Error::InvalidInput(
                "prediction holds networks, not attributes".into(),
            )),
        }
    }

    /// The network block, or an error for attribute predictions.
    pub fn networks(&self) -> Result<&[DMatrix<f64>]> {
        match &self.predicted {
            PredictedBlock::Connectivity(m) => Ok(m),
            PredictedBlock::Attributes(_) => Err(Error::InvalidInput(
                "prediction holds attributes, not networks".into(),
            )),
        }
    }
}

/// Pearson correlation with a guard: near-constant inputs score 0 instead
/// of amplifying floating-point dust into a spurious correlation.
fn guarded_pearson(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || sample_variance(x) < 1e-24 || sample_variance(y) < 1e-24 {
        return 0.0;
    }
    pearson(x, y).unwrap_or(0.0)
}

/// Per-column correlations between predicted and true attribute blocks.
pub fn score_attribute_predictions(
    predicted: &DMatrix<f64>,
    truth: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if predicted.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "predicted block is {}x{}, truth is {}x{}",
            predicted.nrows(),
            predicted.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    Ok((0..predicted.ncols())
        .map(|p| {
            let a: Vec<f64> = predicted.column(p).iter().copied().collect();
            let b: Vec<f64> = truth.column(p).iter().copied().collect();
            guarded_pearson(&a, &b)
        })
        .collect())
}

fn edge_values(m: &DMatrix<f64>, nodes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len() * (nodes.len().saturating_sub(1)) / 2);
    for (i, &u) in nodes.iter().enumerate() {
        for &w in nodes.iter().skip(i + 1) {
            out.push(m[(u, w)]);
        }
    }
    out
}

/// Per-subject edge-level correlations between predicted and true networks,
/// restricted to the edges among `nodes` (pass all nodes for whole-network
/// scoring).
pub fn score_connectivity_predictions(
    predicted: &[DMatrix<f64>],
    truth: &[DMatrix<f64>],
    nodes: &[usize],
) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predicted networks against {} true networks",
            predicted.len(),
            truth.len()
        )));
    }
    if nodes.len() < 2 {
        return Err(Error::InvalidInput(
            "network scoring needs at least two nodes".into(),
        ));
    }
    let mut seen = vec![false; predicted.first().map_or(0, |m| m.nrows())];
    for &u in nodes {
        if u >= seen.len() {
            return Err(Error::InvalidInput(format!(
                "node index {u} out of range for {} nodes",
                seen.len()
            )));
        }
        if seen[u] {
            return Err(Error::InvalidInput(format!("node index {u} repeated")));
        }
        seen[u] = true;
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| guarded_pearson(&edge_values(p, nodes), &edge_values(t, nodes)))
        .collect())
}

/// Per-subject anomaly correlations: how well each predicted network's
/// departure from the *ensemble of predictions* matches the observed
/// network's departure from a reference (typically the training mean).
///
/// Predictions are centered per edge by their own cross-subject mean so
/// that a shared bias — a constant edge pattern every prediction carries,
/// which says nothing about any individual subject — cannot masquerade as
/// (or drown) per-subject skill. Observations are centered by `reference`.
/// A method that predicts the same network for everyone (e.g. the
/// mean-network baseline) has zero anomaly and scores 0, as does a single
/// prediction with no ensemble to deviate from.
pub fn deviation_correlations(
    predicted: &[DMatrix<f64>],
    truth: &[DMatrix<f64>],
    reference: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let nodes: Vec<usize> = (0..reference.nrows()).collect();
    let prediction_mean = match predicted.len() {
        0 => reference.clone(),
        n => {
            let mut sum = DMatrix::zeros(reference.nrows(), reference.ncols());
            for m in predicted {
                if m.shape() != reference.shape() {
                    return Err(Error::Dimension(format!(
                        "predicted network is {}x{}, reference is {}x{}",
                        m.nrows(),
                        m.ncols(),
                        reference.nrows(),
                        reference.ncols()
                    )));
                }
                sum += m;
            }
            sum / n as f64
        }
    };
    let centered = |ms: &[DMatrix<f64>], origin: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        ms.iter().map(|m| m - origin).collect()
    };
    score_connectivity_predictions(
        &centered(predicted, &prediction_mean),
        &centered(truth, reference),
        &nodes,
    )
}

/// Loose guard against raw (unstandardized) training connectivity.
fn validate_standardized(train: &ConnectomeDataset) -> Result<()> {
    crate::data::check_edge_standardized(train)
}

fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    DMatrix::from_fn(top.nrows() + bottom.nrows(), top.ncols(), |i, j| {
        if i < top.nrows() {
            top[(i, j)]
        } else {
            bottom[(i - top.nrows(), j)]
        }
    })
}

fn check_new_covariates(
    train: &ConnectomeDataset,
    m: usize,
    new_conn_covariates: &DMatrix<f64>,
    new_attr_covariates: &DMatrix<f64>,
) -> Result<()> {
    if new_conn_covariates.nrows() != m || new_attr_covariates.nrows() != m {
        return Err(Error::Dimension(format!(
            "covariates for {} / {} new subjects, expected {m}",
            new_conn_covariates.nrows(),
            new_attr_covariates.nrows()
        )));
    }
    if new_conn_covariates.ncols() != train.conn_covariates.ncols() {
        return Err(Error::Dimension(format!(
            "new connectivity covariates have {} columns, training has {}",
            new_conn_covariates.ncols(),
            train.conn_covariates.ncols()
        )));
    }
    if new_attr_covariates.ncols() != train.attr_covariates.ncols() {
        return Err(Error::Dimension(format!(
            "new attribute covariates have {} columns, training has {}",
            new_attr_covariates.ncols(),
            train.attr_covariates.ncols()
        )));
    }
    Ok(())
}

/// Stacks training subjects with new subjects whose attribute rows are
/// unobserved (networks observed). The placeholder attribute rows are never
/// read by the masked sampler.
fn augment_missing_attributes(
    train: &ConnectomeDataset,
    new_connectivity: &[DMatrix<f64>],
    new_conn_covariates: &DMatrix<f64>,
    new_attr_covariates: &DMatrix<f64>,
) -> Result<(ConnectomeDataset, ObservationMask)> {
    let n = train.n_subjects();
    let m = new_connectivity.len();
    check_new_covariates(train, m, new_conn_covariates, new_attr_covariates)?;
    let mut connectivity = train.connectivity.clone();
    connectivity.extend_from_slice(new_connectivity);
    let dataset = ConnectomeDataset::new(
        connectivity,
        vstack(
            &train.attributes,
            &DMatrix::zeros(m, train.n_attributes()),
        ),
        vstack(&train.conn_covariates, new_conn_covariates),
        vstack(&train.attr_covariates, new_attr_covariates),
        train.node_labels.clone(),
        train.attribute_labels.clone(),
    )?;
    let mut mask = ObservationMask::all_observed(n + m);
    for i in n..n + m {
        mask.has_attributes[i] = false;
    }
    Ok((dataset, mask))
}

/// Stacks training subjects with new subjects whose networks are unobserved
/// (attributes observed). The placeholder network slices are never read by
/// the masked sampler.
fn augment_missing_connectivity(
    train: &ConnectomeDataset,
    new_attributes: &DMatrix<f64>,
    new_conn_covariates: &DMatrix<f64>,
    new_attr_covariates: &DMatrix<f64>,
) -> Result<(ConnectomeDataset, ObservationMask)> {
    let n = train.n_subjects();
    let m = new_attributes.nrows();
    check_new_covariates(train, m, new_conn_covariates, new_attr_covariates)?;
    if new_attributes.ncols() != train.n_attributes() {
        return Err(Error::Dimension(format!(
            "new attributes have {} columns, training has {}",
            new_attributes.ncols(),
            train.n_attributes()
        )));
    }
    let v = train.n_nodes();
    let mut connectivity = train.connectivity.clone();
    connectivity.extend((0..m).map(|_| DMatrix::zeros(v, v)));
    let dataset = ConnectomeDataset::new(
        connectivity,
        vstack(&train.attributes, new_attributes),
        vstack(&train.conn_covariates, new_conn_covariates),
        vstack(&train.attr_covariates, new_attr_covariates),
        train.node_labels.clone(),
        train.attribute_labels.clone(),
    )?;
    let mut mask = ObservationMask::all_observed(n + m);
    for i in n..n + m {
        mask.has_connectivity[i] = false;
    }
    Ok((dataset, mask))
}

/// Predicts new subjects' attributes by data augmentation: the new
/// networks join the chain with attribute rows treated as missing, and each
/// retained draw imputes y from its full conditional (mean plus attribute
/// noise). The prediction is the posterior mean of those imputations.
pub fn predict_attributes_theta(
    train: &ConnectomeDataset,
    new_connectivity: &[DMatrix<f64>],
    new_conn_covariates: &DMatrix<f64>,
    new_attr_covariates: &DMatrix<f64>,
    config: &SamplerConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<PredictionResult> {
    validate_standardized(train)?;
    config.validate()?;
    let (dataset, mask) = augment_missing_attributes(
        train,
        new_connectivity,
        new_conn_covariates,
        new_attr_covariates,
    )?;
    let n = train.n_subjects();
    let m = new_connectivity.len();
    let p = train.n_attributes();

    // Imputation noise comes from its own stream so augmentation leaves the
    // chain's draws untouched.
    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, &[1]));
    let mut acc = DMatrix::zeros(m, p);
    let mut cfg = config.clone();
    cfg.retain_latents = false;
    let chain = run_chain_masked(&dataset, &mask, &cfg, |_, state| {
        for j in 0..m {
            let i = n + j;
            let base =
                dataset.attr_covariates.row(i).transpose().dot(&state.gamma) + state.theta[i];
            let sd = state.tau2.sqrt();
            for col in 0..p {
                acc[(j, col)] +=
                    base + state.b[col] + sd * linalg::draw_std_normal(&mut noise_rng);
            }
        }
    })?;
    let predicted = acc / chain.len() as f64;
    let correlations = match truth {
        Some(t) => Some(score_attribute_predictions(&predicted, t)?),
        None => None,
    };
    Ok(PredictionResult {
        method: "THETA",
        predicted: PredictedBlock::Attributes(predicted),
        correlations,
    })
}

/// Training-chain summaries consumed by the two-stage predictor.
struct TrainingSummary {
    z_mean: DMatrix<f64>,
    beta_mean: DVector<f64>,
    sigma2_mean: f64,
    sigma_mean: DMatrix<f64>,
}

fn training_summary(
    train: &ConnectomeDataset,
    config: &SamplerConfig,
) -> Result<TrainingSummary> {
    let n = train.n_subjects();
    let v = train.n_nodes();
    let mut z_sum = DMatrix::zeros(n, v);
    let mut beta_sum = DVector::zeros(train.conn_covariates.ncols());
    let mut sigma2_sum = 0.0;
    let mut sigma_sum = DMatrix::zeros(v + 1, v + 1);
    let mut cfg = config.clone();
    cfg.retain_latents = false;
    let mask = ObservationMask::all_observed(n);
    let chain = run_chain_masked(train, &mask, &cfg, |_, state| {
        z_sum += &state.z;
        beta_sum += &state.beta;
        sigma2_sum += state.sigma2;
        sigma_sum += &state.sigma;
    })?;
    let k = chain.len() as f64;
    Ok(TrainingSummary {
        z_mean: z_sum / k,
        beta_mean: beta_sum / k,
        sigma2_mean: sigma2_sum / k,
        sigma_mean: sigma_sum / k,
    })
}

/// Gibbs chain over a single new subject's latent positions (and network
/// intercept) with model parameters frozen at training posterior means;
/// returns the sign-aligned posterior-mean latent vector.
fn single_subject_latents(
    x: &DMatrix<f64>,
    shift: f64,
    sigma2: f64,
    qzz: &DMatrix<f64>,
    config: &SamplerConfig,
    seed: u64,
) -> DVector<f64> {
    let v = x.nrows();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut z =
        DVector::from_fn(v, |_, _| config.init_scale * linalg::draw_std_normal(&mut rng));
    let mut reference = DVector::zeros(v);
    let mut z_sum = DVector::zeros(v);
    let e = (v * (v - 1) / 2) as f64;

    for k in 1..=config.n_iterations {
        // Subject intercept given z, prior N(0, 1).
        let prec_a = 1.0 + e / sigma2;
        let mut rsum = 0.0;
        for u in 0..v {
            for w in (u + 1)..v {
                rsum += x[(u, w)] - shift - z[u] * z[w];
            }
        }
        let a = linalg::draw_normal(rsum / sigma2 / prec_a, 1.0 / prec_a, &mut rng);

        // Coordinate updates of z under the exact MVN(0, Lambda_z) prior.
        for u in 0..v {
            let mut prec = qzz[(u, u)];
            let mut lin = 0.0;
            for w in 0..v {
                if w == u {
                    continue;
                }
                lin -= qzz[(u, w)] * z[w];
                let zw = z[w];
                prec += zw * zw / sigma2;
                lin += (x[(u.min(w), u.max(w))] - shift - a) * zw / sigma2;
            }
            z[u] = linalg::draw_normal(lin / prec, 1.0 / prec, &mut rng);
        }

        if k == config.burn_in + 1 {
            reference = z.map(|x| if x < 0.0 { -1.0 } else { 1.0 });
        }
        if k > config.burn_in {
            if z.dot(&reference) < 0.0 {
                z.neg_mut();
            }
            if (k - config.burn_in) % config.thin == 0 {
                z_sum += &z;
            }
        }
    }
    z_sum / config.retained_len() as f64
}

/// Predicts new subjects' attributes in two stages: a training fit yields
/// posterior-mean latents, a linear readout regresses training attributes
/// on them, and each new subject's latents come from a connectivity-only
/// chain with parameters frozen at training posterior means. The latent
/// sign of a lone network is not identified (both the prior and the
/// bilinear likelihood are even in z), so each new subject's parity is an
/// unresolvable coin flip; the joint imputation path does not share this
/// weakness.
pub fn predict_attributes_z(
    train: &ConnectomeDataset,
    new_connectivity: &[DMatrix<f64>],
    new_conn_covariates: &DMatrix<f64>,
    config: &SamplerConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<PredictionResult> {
    validate_standardized(train)?;
    config.validate()?;
    let n = train.n_subjects();
    let v = train.n_nodes();
    let p = train.n_attributes();
    let m = new_connectivity.len();
    if new_conn_covariates.nrows() != m {
        return Err(Error::Dimension(format!(
            "connectivity covariates for {} new subjects, expected {m}",
            new_conn_covariates.nrows()
        )));
    }
    if new_conn_covariates.ncols() != train.conn_covariates.ncols() {
        return Err(Error::Dimension(format!(
            "new connectivity covariates have {} columns, training has {}",
            new_conn_covariates.ncols(),
            train.conn_covariates.ncols()
        )));
    }
    for (j, slice) in new_connectivity.iter().enumerate() {
        if slice.nrows() != v || slice.ncols() != v {
            return Err(Error::Dimension(format!(
                "new network {j} is {}x{}, expected {v}x{v}",
                slice.nrows(),
                slice.ncols()
            )));
        }
    }

    let summary = training_summary(train, config)?;

    // Linear readout: each attribute on [1 | posterior-mean latents].
    let design = DMatrix::from_fn(n, v + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            summary.z_mean[(i, j - 1)]
        }
    });
    let mut readouts = Vec::with_capacity(p);
    for col in 0..p {
        let y = DVector::from_fn(n, |i, _| train.attributes[(i, col)]);
        readouts.push(ols(&design, &y)?);
    }

    let qzz = invert_spd(
        &summary.sigma_mean.view((0, 0), (v, v)).into_owned(),
        "posterior-mean latent covariance (z block)",
    )?;

    let mut predicted = DMatrix::zeros(m, p);
    for j in 0..m {
        let shift = new_conn_covariates.row(j).transpose().dot(&summary.beta_mean);
        let z_bar = single_subject_latents(
            &new_connectivity[j],
            shift,
            summary.sigma2_mean,
            &qzz,
            config,
            derive_seed(config.seed, &[2, j as u64]),
        );
        for col in 0..p {
            let coef = &readouts[col];
            let mut value = coef[0];
            for u in 0..v {
                value += coef[u + 1] * z_bar[u];
            }
            predicted[(j, col)] = value;
        }
    }
    let correlations = match truth {
        Some(t) => Some(score_attribute_predictions(&predicted, t)?),
        None => None,
    };
    Ok(PredictionResult {
        method: "Z",
        predicted: PredictedBlock::Attributes(predicted),
        correlations,
    })
}

/// Predicts new subjects' networks by data augmentation: the new subjects'
/// attributes join the chain with network slices treated as missing, and
/// each retained draw contributes its edge means (covariate shift plus
/// subject intercept plus bilinear term). The prediction is the posterior
/// mean; supplied truth is scored per subject across edges.
pub fn predict_connectivity(
    train: &ConnectomeDataset,
    new_attributes: &DMatrix<f64>,
    new_conn_covariates: &DMatrix<f64>,
    new_attr_covariates: &DMatrix<f64>,
    config: &SamplerConfig,
    truth: Option<&[DMatrix<f64>]>,
) -> Result<PredictionResult> {
    validate_standardized(train)?;
    config.validate()?;
    let (dataset, mask) = augment_missing_connectivity(
        train,
        new_attributes,
        new_conn_covariates,
        new_attr_covariates,
    )?;
    let n = train.n_subjects();
    let m = new_attributes.nrows();
    let v = train.n_nodes();

    let mut acc = vec![DMatrix::zeros(v, v); m];
    let mut cfg = config.clone();
    cfg.retain_latents = false;
    let chain = run_chain_masked(&dataset, &mask, &cfg, |_, state| {
        for (j, slot) in acc.iter_mut().enumerate() {
            let i = n + j;
            let shift =
                dataset.conn_covariates.row(i).transpose().dot(&state.beta) + state.a[i];
            for u in 0..v {
                for w in (u + 1)..v {
                    slot[(u, w)] += shift + state.z[(i, u)] * state.z[(i, w)];
                }
            }
        }
    })?;
    let k = chain.len() as f64;
    let predicted: Vec<DMatrix<f64>> = acc
        .into_iter()
        .map(|mut slot| {
            slot /= k;
            for u in 0..v {
                for w in (u + 1)..v {
                    slot[(w, u)] = slot[(u, w)];
                }
            }
            slot
        })
        .collect();
    let correlations = match truth {
        Some(t) => {
            let nodes: Vec<usize> = (0..v).collect();
            Some(score_connectivity_predictions(&predicted, t, &nodes)?)
        }
        None => None,
    };
    Ok(PredictionResult {
        method: "CONNECTIVITY",
        predicted: PredictedBlock::Connectivity(predicted),
        correlations,
    })
}

/// Baseline network prediction: every new subject gets the training mean
/// network. With a single training subject that subject's network is the
/// mean.
pub fn averaging_baseline(
    train: &ConnectomeDataset,
    n_new: usize,
    truth: Option<&[DMatrix<f64>]>,
) -> Result<PredictionResult> {
    if n_new == 0 {
        return Err(Error::InvalidInput(
            "averaging baseline needs at least one new subject".into(),
        ));
    }
    let mean = train.mean_network();
    let predicted = vec![mean; n_new];
    let correlations = match truth {
        Some(t) => {
            let nodes: Vec<usize> = (0..train.n_nodes()).collect();
            Some(score_connectivity_predictions(&predicted, t, &nodes)?)
        }
        None => None,
    };
    Ok(PredictionResult {
        method: "AVERAGING",
        predicted: PredictedBlock::Connectivity(predicted),
        correlations,
    })
}
