//! First-pair canonical correlation analysis via singular value
//! decomposition of the whitened cross-covariance, with a small ridge on
//! each side's covariance so the whitening stays well-posed when the edge
//! count dwarfs the subject count.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::pearson;

use super::flag_edge_endpoints;

const RIDGE: f64 = 1e-6;

/// First canonical pair between the edge side and the attribute side.
#[derive(Debug, Clone)]
pub struct CcaModel {
    /// Loadings over vectorized edges, scaled to unit sample variance of
    /// the edge-side canonical variate.
    pub edge_loadings: DVector<f64>,
    /// Loadings over attribute columns, scaled likewise.
    pub attribute_loadings: DVector<f64>,
    /// First canonical correlation, in [0, 1].
    pub correlation: f64,
}

/// Column-centered copy plus the column means.
fn center(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for j in 0..x.ncols() {
        let m = x.column(j).mean();
        for i in 0..x.nrows() {
            c[(i, j)] -= m;
        }
    }
    c
}

/// Symmetric inverse square root via eigendecomposition; errors when the
/// ridged matrix is still numerically degenerate.
fn inverse_sqrt_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..d {
        let ev = eig.eigenvalues[k];
        if ev <= 0.0 || !ev.is_finite() {
            return Err(Error::Numerical(format!(
                "{context} covariance is degenerate even after the {RIDGE:e} ridge \
                 (eigenvalue {ev})"
            )));
        }
        let s = 1.0 / ev.sqrt();
        for r in 0..d {
            scaled[(r, k)] *= s;
        }
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Fits the first canonical pair: center both sides, add the ridge to each
/// sample covariance, whiten, and take the leading singular triplet of the
/// whitened cross-covariance. Loadings are rescaled so both canonical
/// variates have unit sample variance, the edge-side loading with largest
/// magnitude is positive, and the reported correlation is nonnegative.
pub fn cca_fit(train_edges: &DMatrix<f64>, train_attributes: &DMatrix<f64>) -> Result<CcaModel> {
    let n = train_edges.nrows();
    if train_attributes.nrows() != n {
        return Err(Error::Dimension(format!(
            "edge rows ({n}) and attribute rows ({}) differ",
            train_attributes.nrows()
        )));
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "canonical correlation requires at least 3 subjects, got {n}"
        )));
    }
    if train_attributes.ncols() == 0 || train_edges.ncols() == 0 {
        return Err(Error::InvalidInput(
            "canonical correlation requires at least one column on each side".into(),
        ));
    }

    let xc = center(train_edges);
    let yc = center(train_attributes);
    let denom = (n - 1) as f64;
    let e = xc.ncols();
    let p = yc.ncols();
    let mut sxx = xc.transpose() * &xc / denom;
    let mut syy = yc.transpose() * &yc / denom;
    for j in 0..e {
        sxx[(j, j)] += RIDGE;
    }
    for j in 0..p {
        syy[(j, j)] += RIDGE;
    }
    let sxy = xc.transpose() * &yc / denom;

    let sxx_isqrt = inverse_sqrt_spd(&sxx, "edge-side")?;
    let syy_isqrt = inverse_sqrt_spd(&syy, "attribute-side")?;
    let whitened = &sxx_isqrt * sxy * &syy_isqrt;
    let svd = whitened.svd(true, true);
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| {
            if s > acc.1 {
                (i, s)
            } else {
                acc
            }
        });
    let u = svd
        .u
        .as_ref()
        .expect("requested U")
        .column(k)
        .into_owned();
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let v = vt.row(k).transpose();

    let mut a = &sxx_isqrt * u;
    let mut b = &syy_isqrt * v;

    // Rescale to unit *sample* variance of the variates (ridge-free).
    let xa = &xc * &a;
    let yb = &yc * &b;
    let var_a = xa.dot(&xa) / denom;
    let var_b = yb.dot(&yb) / denom;
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::Numerical(
            "canonical variate collapsed to zero variance".into(),
        ));
    }
    a /= var_a.sqrt();
    b /= var_b.sqrt();

    let xa = &xc * &a;
    let yb = &yc * &b;
    let mut r = pearson(xa.as_slice(), yb.as_slice()).ok_or_else(|| {
        Error::Numerical("canonical variates are degenerate".into())
    })?;
    if r < 0.0 {
        b = -b;
        r = -r;
    }
    // Deterministic sign convention on the edge side.
    let dominant = (0..e)
        .max_by(|&i, &j| {
            a[i].abs()
                .partial_cmp(&a[j].abs())
                .expect("finite loadings")
        })
        .expect("nonempty loadings");
    if a[dominant] < 0.0 {
        a = -a;
        b = -b;
    }

    Ok(CcaModel {
        edge_loadings: a,
        attribute_loadings: b,
        correlation: r.min(1.0),
    })
}

/// Region score = sum of |incident edge loadings|; the top
/// round(signal_proportion * V) regions are flagged, ties broken by region
/// index ascending.
pub fn cca_flag_regions(
    model: &CcaModel,
    n_nodes: usize,
    signal_proportion: f64,
) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&signal_proportion) {
        return Err(Error::InvalidInput(format!(
            "signal proportion must lie in [0, 1], got {signal_proportion}"
        )));
    }
    let n_edges = model.edge_loadings.len();
    // Reuse the endpoint expansion to validate the node/edge accounting.
    flag_edge_endpoints(std::iter::empty(), n_nodes, n_edges)?;
    let mut score = vec![0.0; n_nodes];
    for (e, (u, v)) in crate::data::edge_pairs(n_nodes).enumerate() {
        let l = model.edge_loadings[e].abs();
        score[u] += l;
        score[v] += l;
    }
    let k = (signal_proportion * n_nodes as f64).round() as usize;
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.sort_by(|&i, &j| {
        score[j]
            .partial_cmp(&score[i])
            .expect("finite scores")
            .then(i.cmp(&j))
    });
    let mut flags = vec![false; n_nodes];
    for &i in order.iter().take(k) {
        flags[i] = true;
    }
    Ok(flags)
}
