//! Joint Bayesian modeling of symmetric weighted networks and multivariate
//! nodal attributes.
//!
//! The crate implements a latent-variable model in which each subject's
//! network arises from bilinear products of per-node latent scores and each
//! subject's attributes arise from a latent severity factor; a joint
//! MVN prior couples the two sides so that per-region covariances act as
//! detectable biomarkers. Modules:
//!
//! - [`data`]: dataset container, edge enumeration, standardization.
//! - [`model`]: model state, residuals, and the joint log-density oracle.
//! - [`sampler`]: Gibbs sampler with conjugate full-conditional updates.
//! - [`detect`]: credible-interval biomarker reports from posterior chains.
//! - [`predict`]: cross-modal prediction of attributes or networks.
//! - [`simulate`]: synthetic cohort generation and method benchmarking.
//! - [`baselines`]: CPM, Lasso, and CCA reference methods.
//! - [`netmetrics`]: latent-network construction, weighted centralities,
//!   and distribution-shape tests.
//! - [`diagnostics`]: MCMC convergence summaries.

pub mod baselines;
pub mod data;
pub mod detect;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod netmetrics;
pub mod predict;
pub mod sampler;
pub mod simulate;

pub use data::{standardize_connectivity, fisher_z, ConnectomeDataset};
pub use error::{Error, Result};
pub use model::{joint_log_density, ModelState, Residuals};
pub use sampler::{run_chain, PosteriorChain, SamplerConfig};
