//! Connectome-style edge-screening regression: select edges marginally
//! correlated with the target, split by correlation sign, and regress the
//! target on the per-subject sums of each set.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{ols, pearson};

use super::flag_edge_endpoints;

/// Edge-screening regression model.
#[derive(Debug, Clone)]
pub struct CpmModel {
    /// Edges positively correlated with the target at p < p_threshold.
    pub positive_edges: Vec<usize>,
    /// Edges negatively correlated with the target at p < p_threshold.
    pub negative_edges: Vec<usize>,
    /// Regression coefficients in fixed layout (intercept, positive-sum
    /// slope, negative-sum slope); a slope is 0.0 when its edge set is
    /// empty.
    pub coefficients: [f64; 3],
    /// Selection threshold on the two-sided correlation p-value.
    pub p_threshold: f64,
    /// True when no edge survived screening and the model is the training
    /// mean alone.
    pub intercept_only: bool,
}

/// Two-sided p-value of a Pearson correlation under the exact null
/// t-distribution with n - 2 degrees of freedom.
fn correlation_p_value(r: f64, n: usize) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn set_sums(edges: &DMatrix<f64>, set: &[usize]) -> DVector<f64> {
    let mut sums = DVector::zeros(edges.nrows());
    for i in 0..edges.nrows() {
        sums[i] = set.iter().map(|&e| edges[(i, e)]).sum();
    }
    sums
}

/// Screens edges against the target at `p_threshold` and fits ordinary
/// least squares of the target on the selected-edge sums (positive and
/// negative sets separately). Degenerate (constant) edges are never
/// selected; with no selected edges the model is intercept-only.
pub fn cpm_fit(
    train_edges: &DMatrix<f64>,
    train_target: &DVector<f64>,
    p_threshold: f64,
) -> Result<CpmModel> {
    let n = train_edges.nrows();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "edge screening requires at least 3 subjects, got {n}"
        )));
    }
    if train_target.len() != n {
        return Err(Error::Dimension(format!(
            "target length {} does not match {} subjects",
            train_target.len(),
            n
        )));
    }
    if !(p_threshold > 0.0 && p_threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "p threshold must lie in (0, 1), got {p_threshold}"
        )));
    }
    let target: Vec<f64> = train_target.iter().copied().collect();
    let mut positive_edges = Vec::new();
    let mut negative_edges = Vec::new();
    let mut column = vec![0.0; n];
    for e in 0..train_edges.ncols() {
        for i in 0..n {
            column[i] = train_edges[(i, e)];
        }
        let Some(r) = pearson(&column, &target) else {
            continue;
        };
        if correlation_p_value(r, n) < p_threshold {
            if r > 0.0 {
                positive_edges.push(e);
            } else {
                negative_edges.push(e);
            }
        }
    }

    let mut coefficients = [0.0; 3];
    let intercept_only = positive_edges.is_empty() && negative_edges.is_empty();
    if intercept_only {
        coefficients[0] = train_target.mean();
    } else {
        let mut columns: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0)];
        let mut slots: Vec<usize> = vec![0];
        if !positive_edges.is_empty() {
            columns.push(set_sums(train_edges, &positive_edges));
            slots.push(1);
        }
        if !negative_edges.is_empty() {
            columns.push(set_sums(train_edges, &negative_edges));
            slots.push(2);
        }
        let design = DMatrix::from_columns(&columns);
        let coefs = ols(&design, train_target)?;
        for (k, &slot) in slots.iter().enumerate() {
            coefficients[slot] = coefs[k];
        }
    }

    Ok(CpmModel {
        positive_edges,
        negative_edges,
        coefficients,
        p_threshold,
        intercept_only,
    })
}

/// Applies the fitted two-sum regression to new subjects' edges.
pub fn cpm_predict(model: &CpmModel, test_edges: &DMatrix<f64>) -> DVector<f64> {
    let pos = set_sums(test_edges, &model.positive_edges);
    let neg = set_sums(test_edges, &model.negative_edges);
    let [b0, b_pos, b_neg] = model.coefficients;
    DVector::from_fn(test_edges.nrows(), |i, _| {
        b0 + b_pos * pos[i] + b_neg * neg[i]
    })
}

/// A region is flagged when at least one selected edge (either sign) is
/// incident to it.
pub fn cpm_region_flags(model: &CpmModel, n_nodes: usize, n_edges: usize) -> Result<Vec<bool>> {
    flag_edge_endpoints(
        model
            .positive_edges
            .iter()
            .chain(&model.negative_edges)
            .copied(),
        n_nodes,
        n_edges,
    )
}
