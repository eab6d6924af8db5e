//! Model state and the joint log-density of the latent network-attribute
//! model.
//!
//! The generative model couples, per subject i, a symmetric network slice
//! x_{u,v,i} = w_i'beta + a_i + z_{u,i} z_{v,i} + e_{u,v,i} with attribute
//! responses y_{i,p} = h_i'gamma + b_p + theta_i + eps_{i,p}. The latent
//! vector (z_i, theta_i) carries a joint MVN(0, Sigma) prior whose
//! off-diagonal block Lambda_{z theta} is the per-region biomarker
//! covariance. [`joint_log_density`] is the reference density every sampler
//! step is tested against.

use nalgebra::{DMatrix, DVector};

use crate::data::{edge_pairs, ConnectomeDataset};
use crate::error::{Error, Result};
use crate::linalg;

/// Latent attribute dimension; the model is defined and estimated at D = 1.
pub const LATENT_DIM: usize = 1;

/// One full assignment of latent variables and parameters.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// N×V latent connectivity variables; row i is subject i's z_i.
    pub z: DMatrix<f64>,
    /// Length-N latent attribute variables (the N×D matrix at D = 1).
    pub theta: DVector<f64>,
    /// (V+1)×(V+1) joint latent covariance with blocks
    /// [Lambda_z, Lambda_{z theta}; Lambda_{z theta}', Lambda_theta].
    pub sigma: DMatrix<f64>,
    /// Connectivity covariate coefficients (length Q).
    pub beta: DVector<f64>,
    /// Attribute covariate coefficients (length Q′).
    pub gamma: DVector<f64>,
    /// Per-subject connectivity intercepts (length N).
    pub a: DVector<f64>,
    /// Per-attribute intercepts (length P).
    pub b: DVector<f64>,
    /// Connectivity error variance.
    pub sigma2: f64,
    /// Attribute error variance.
    pub tau2: f64,
}

impl ModelState {
    /// Checks that all blocks agree with the dataset's dimensions.
    pub fn validate_against(&self, dataset: &ConnectomeDataset) -> Result<()> {
        let (n, v, p) = (dataset.n_subjects(), dataset.n_nodes(), dataset.n_attributes());
        let checks = [
            (self.z.nrows() == n && self.z.ncols() == v, format!("Z must be {n}x{v}")),
            (self.theta.len() == n, format!("theta must have length {n}")),
            (
                self.sigma.nrows() == v + LATENT_DIM && self.sigma.ncols() == v + LATENT_DIM,
                format!("Sigma must be {0}x{0}", v + LATENT_DIM),
            ),
            (
                self.beta.len() == dataset.conn_covariates.ncols(),
                format!("beta must have length {}", dataset.conn_covariates.ncols()),
            ),
            (
                self.gamma.len() == dataset.attr_covariates.ncols(),
                format!("gamma must have length {}", dataset.attr_covariates.ncols()),
            ),
            (self.a.len() == n, format!("a must have length {n}")),
            (self.b.len() == p, format!("b must have length {p}")),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Dimension(msg));
            }
        }
        if self.sigma2 <= 0.0 || self.tau2 <= 0.0 {
            return Err(Error::InvalidInput(
                "sigma2 and tau2 must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of latent network coordinates V.
    pub fn n_nodes(&self) -> usize {
        self.z.ncols()
    }

    /// Per-region covariance block Lambda_{z theta} of Sigma (length V).
    pub fn lambda_z_theta(&self) -> DVector<f64> {
        let v = self.n_nodes();
        DVector::from_fn(v, |u, _| self.sigma[(u, v)])
    }

    /// Latent attribute variance block Lambda_theta.
    pub fn lambda_theta(&self) -> f64 {
        let v = self.n_nodes();
        self.sigma[(v, v)]
    }

    /// Subject i's stacked latent vector (z_i, theta_i), length V+1.
    pub fn latent_row(&self, i: usize) -> DVector<f64> {
        let v = self.n_nodes();
        let mut t = DVector::zeros(v + 1);
        for u in 0..v {
            t[u] = self.z[(i, u)];
        }
        t[v] = self.theta[i];
        t
    }
}

/// Connectivity and attribute residuals of a state on a dataset.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// Per-subject V×V matrices F_i = X_i - a_i - w_i'beta (diagonal zero).
    pub f: Vec<DMatrix<f64>>,
    /// Scaled residuals c·F_i with c = 1/sqrt(sigma2).
    pub f_tilde: Vec<DMatrix<f64>>,
    /// N×P attribute residuals T = Y - 1 b' - H gamma 1'.
    pub t: DMatrix<f64>,
}

/// Computes [`Residuals`] for a state/dataset pair.
pub fn residuals(state: &ModelState, dataset: &ConnectomeDataset) -> Result<Residuals> {
    state.validate_against(dataset)?;
    let (n, v, p) = (dataset.n_subjects(), dataset.n_nodes(), dataset.n_attributes());
    let c = 1.0 / state.sigma2.sqrt();
    let mut f = Vec::with_capacity(n);
    let mut f_tilde = Vec::with_capacity(n);
    for i in 0..n {
        let shift = dataset.conn_covariates.row(i).transpose().dot(&state.beta) + state.a[i];
        let mut fi = DMatrix::zeros(v, v);
        for (u, w) in edge_pairs(v) {
            let r = dataset.connectivity[i][(u, w)] - shift;
            fi[(u, w)] = r;
            fi[(w, u)] = r;
        }
        f_tilde.push(&fi * c);
        f.push(fi);
    }
    let mut t = DMatrix::zeros(n, p);
    for i in 0..n {
        let hg = dataset.attr_covariates.row(i).transpose().dot(&state.gamma);
        for q in 0..p {
            t[(i, q)] = dataset.attributes[(i, q)] - state.b[q] - hg;
        }
    }
    Ok(Residuals { f, f_tilde, t })
}

/// Log-likelihood of the connectivity block alone (all subjects, upper
/// triangle edges). Exposed separately because it is exactly invariant
/// under per-subject sign flips z_i -> -z_i.
pub fn connectivity_log_likelihood(state: &ModelState, dataset: &ConnectomeDataset) -> f64 {
    let (n, v) = (dataset.n_subjects(), dataset.n_nodes());
    let mut total = 0.0;
    for i in 0..n {
        let shift = dataset.conn_covariates.row(i).transpose().dot(&state.beta) + state.a[i];
        for (u, w) in edge_pairs(v) {
            let mean = shift + state.z[(i, u)] * state.z[(i, w)];
            total += linalg::normal_log_pdf(dataset.connectivity[i][(u, w)], mean, state.sigma2);
        }
    }
    total
}

/// Log-likelihood of the attribute block alone.
pub fn attribute_log_likelihood(state: &ModelState, dataset: &ConnectomeDataset) -> f64 {
    let (n, p) = (dataset.n_subjects(), dataset.n_attributes());
    let mut total = 0.0;
    for i in 0..n {
        let hg = dataset.attr_covariates.row(i).transpose().dot(&state.gamma);
        for q in 0..p {
            let mean = hg + state.b[q] + state.theta[i];
            total += linalg::normal_log_pdf(dataset.attributes[(i, q)], mean, state.tau2);
        }
    }
    total
}

/// Full joint log-density: likelihoods plus all prior terms.
///
/// Priors: beta ~ MVN(0, I), gamma ~ MVN(0, I), a_i ~ N(0,1), b_p ~ N(0,1),
/// the precisions 1/sigma2 and 1/tau2 ~ Gamma(1/2, 1/2) (shape-rate), the
/// latent rows (z_i, theta_i) ~ MVN(0, Sigma), and Sigma ~
/// inverse-Wishart(I_{V+1}, V+3). Variance parameters are measured on the
/// precision scale (the Gamma prior's natural scale); density differences
/// between states are therefore directly comparable with the sampler's
/// Gamma full conditionals.
pub fn joint_log_density(state: &ModelState, dataset: &ConnectomeDataset) -> Result<f64> {
    state.validate_against(dataset)?;
    let v = dataset.n_nodes();
    let n = dataset.n_subjects();
    let dim = v + LATENT_DIM;

    // Fails fast on non-PD Sigma before any term is accumulated.
    let sigma_chol = linalg::cholesky_spd(&state.sigma, "Sigma")?;
    let log_det_sigma = 2.0 * sigma_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();

    let mut total = connectivity_log_likelihood(state, dataset);
    total += attribute_log_likelihood(state, dataset);

    // Latent prior: sum_i log MVN((z_i, theta_i); 0, Sigma).
    let ln_2pi = std::f64::consts::TAU.ln();
    for i in 0..n {
        let t = state.latent_row(i);
        let solved = sigma_chol.solve(&t);
        total += -0.5 * (dim as f64 * ln_2pi + log_det_sigma + t.dot(&solved));
    }

    // Coefficient and intercept priors (all standard normal).
    for x in state.beta.iter().chain(state.gamma.iter()) {
        total += linalg::normal_log_pdf(*x, 0.0, 1.0);
    }
    for x in state.a.iter().chain(state.b.iter()) {
        total += linalg::normal_log_pdf(*x, 0.0, 1.0);
    }

    // Precision priors Gamma(1/2, 1/2).
    total += linalg::gamma_log_pdf_shape_rate(1.0 / state.sigma2, 0.5, 0.5);
    total += linalg::gamma_log_pdf_shape_rate(1.0 / state.tau2, 0.5, 0.5);

    // Sigma prior: inverse-Wishart(I, V+3).
    let eye = DMatrix::<f64>::identity(dim, dim);
    total += linalg::inverse_wishart_log_pdf(&state.sigma, &eye, (v + 3) as f64)?;

    Ok(total)
}
