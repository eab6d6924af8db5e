//! Reference methods the joint model is benchmarked against: edge-screening
//! regression (CPM), L1-penalized regression with cross-validated penalty
//! (Lasso), and regularized canonical correlation analysis (CCA). All three
//! consume the N x E matrix of vectorized upper-triangle edges.

mod cca;
mod cpm;
mod lasso;

pub use cca::{cca_fit, cca_flag_regions, CcaModel};
pub use cpm::{cpm_fit, cpm_predict, cpm_region_flags, CpmModel};
pub use lasso::{lasso_fit_cv, lasso_lambda_grid, lasso_region_flags, LassoModel};

use crate::data::edge_pairs;
use crate::error::{Error, Result};

/// Marks both endpoints of every listed edge; used by the per-method
/// region-flag rules.
pub(crate) fn flag_edge_endpoints(
    edge_indices: impl IntoIterator<Item = usize>,
    n_nodes: usize,
    n_edges: usize,
) -> Result<Vec<bool>> {
    let pairs: Vec<(usize, usize)> = edge_pairs(n_nodes).collect();
    if pairs.len() != n_edges {
        return Err(Error::Dimension(format!(
            "{n_edges} edges do not correspond to {n_nodes} nodes (expected {})",
            pairs.len()
        )));
    }
    let mut flags = vec![false; n_nodes];
    for e in edge_indices {
        let (u, v) = pairs[e];
        flags[u] = true;
        flags[v] = true;
    }
    Ok(flags)
}
