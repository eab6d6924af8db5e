//! Dataset container and standardization utilities.
//!
//! A [`ConnectomeDataset`] couples N symmetric weighted networks (one per
//! subject) with an N×P attribute matrix and per-side covariate matrices.
//! Edge values are expected to be standardized across subjects before model
//! fitting; [`standardize_connectivity`] performs that transformation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of undirected edges among `v` nodes.
pub fn edge_count(v: usize) -> usize {
    v * (v - 1) / 2
}

/// Iterator over undirected edges (u, v) with u < v, in row-major upper
/// triangle order — the canonical edge enumeration used everywhere.
pub fn edge_pairs(v: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..v).flat_map(move |u| ((u + 1)..v).map(move |w| (u, w)))
}

/// Position of edge (u, v), u < v, in the canonical enumeration.
pub fn edge_index(u: usize, v: usize, n_nodes: usize) -> usize {
    debug_assert!(u < v && v < n_nodes);
    // Edges before row u: sum_{r<u} (n_nodes-1-r), then offset within row u.
    u * (2 * n_nodes - u - 1) / 2 + (v - u - 1)
}

/// Upper triangle of a symmetric matrix as a vector in canonical edge order.
pub fn upper_triangle(m: &DMatrix<f64>) -> DVector<f64> {
    let v = m.nrows();
    let mut out = DVector::zeros(edge_count(v));
    for (e, (u, w)) in edge_pairs(v).enumerate() {
        out[e] = m[(u, w)];
    }
    out
}

/// N subjects' networks and attributes with their covariates.
#[derive(Debug, Clone)]
pub struct ConnectomeDataset {
    /// Per-subject symmetric V×V connectivity matrices; diagonals are
    /// ignored by every operation.
    pub connectivity: Vec<DMatrix<f64>>,
    /// N×P attribute matrix (one row per subject).
    pub attributes: DMatrix<f64>,
    /// N×Q covariates entering the connectivity mean (first column all 1).
    pub conn_covariates: DMatrix<f64>,
    /// N×Q′ covariates entering the attribute mean (first column all 1).
    pub attr_covariates: DMatrix<f64>,
    /// Node names, length V.
    pub node_labels: Vec<String>,
    /// Attribute names, length P.
    pub attribute_labels: Vec<String>,
}

impl ConnectomeDataset {
    /// Validates shapes and invariants and assembles the dataset.
    pub fn new(
        connectivity: Vec<DMatrix<f64>>,
        attributes: DMatrix<f64>,
        conn_covariates: DMatrix<f64>,
        attr_covariates: DMatrix<f64>,
        node_labels: Vec<String>,
        attribute_labels: Vec<String>,
    ) -> Result<Self> {
        let n = connectivity.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset needs at least one subject".into()));
        }
        let v = connectivity[0].nrows();
        for (i, slice) in connectivity.iter().enumerate() {
            if slice.nrows() != v || slice.ncols() != v {
                return Err(Error::Dimension(format!(
                    "connectivity slice {i} is {}x{}, expected {v}x{v}",
                    slice.nrows(),
                    slice.ncols()
                )));
            }
            for u in 0..v {
                for w in (u + 1)..v {
                    if slice[(u, w)] != slice[(w, u)] {
                        return Err(Error::InvalidInput(format!(
                            "connectivity slice {i} is asymmetric at ({}, {})",
                            u + 1,
                            w + 1
                        )));
                    }
                }
            }
        }
        if attributes.nrows() != n {
            return Err(Error::Dimension(format!(
                "attributes have {} rows for {n} subjects",
                attributes.nrows()
            )));
        }
        for (name, covs) in [("conn_covariates", &conn_covariates), ("attr_covariates", &attr_covariates)] {
            if covs.nrows() != n {
                return Err(Error::Dimension(format!(
                    "{name} has {} rows for {n} subjects",
                    covs.nrows()
                )));
            }
            if covs.ncols() == 0 {
                return Err(Error::InvalidInput(format!("{name} needs at least the intercept column")));
            }
            if covs.column(0).iter().any(|&x| x != 1.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} first column must be identically 1 (intercept)"
                )));
            }
        }
        if node_labels.len() != v {
            return Err(Error::Dimension(format!(
                "{} node labels for {v} nodes",
                node_labels.len()
            )));
        }
        if attribute_labels.len() != attributes.ncols() {
            return Err(Error::Dimension(format!(
                "{} attribute labels for {} attribute columns",
                attribute_labels.len(),
                attributes.ncols()
            )));
        }
        Ok(Self {
            connectivity,
            attributes,
            conn_covariates,
            attr_covariates,
            node_labels,
            attribute_labels,
        })
    }

    /// Default node labels r1..rV.
    pub fn default_node_labels(v: usize) -> Vec<String> {
        (1..=v).map(|u| format!("r{u}")).collect()
    }

    /// Default attribute labels y1..yP.
    pub fn default_attribute_labels(p: usize) -> Vec<String> {
        (1..=p).map(|j| format!("y{j}")).collect()
    }

    pub fn n_subjects(&self) -> usize {
        self.connectivity.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.connectivity[0].nrows()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn n_edges(&self) -> usize {
        edge_count(self.n_nodes())
    }

    /// N×E matrix of vectorized upper-triangle edges, the feature layout
    /// consumed by the regression baselines.
    pub fn edge_matrix(&self) -> DMatrix<f64> {
        let n = self.n_subjects();
        let e = self.n_edges();
        let v = self.n_nodes();
        let mut m = DMatrix::zeros(n, e);
        for i in 0..n {
            for (idx, (u, w)) in edge_pairs(v).enumerate() {
                m[(i, idx)] = self.connectivity[i][(u, w)];
            }
        }
        m
    }

    /// Mean network over subjects (symmetric, zero diagonal).
    pub fn mean_network(&self) -> DMatrix<f64> {
        let v = self.n_nodes();
        let mut mean = DMatrix::zeros(v, v);
        for slice in &self.connectivity {
            mean += slice;
        }
        mean /= self.n_subjects() as f64;
        for u in 0..v {
            mean[(u, u)] = 0.0;
        }
        mean
    }
}

/// Standardizes every edge series to sample mean 0 and unbiased sample
/// variance 1 across subjects. Requires N ≥ 2 and nonzero variance at every
/// edge; rejects degenerate edges naming the (u, v) pair (1-based).
pub fn standardize_connectivity(dataset: &ConnectomeDataset) -> Result<ConnectomeDataset> {
    let n = dataset.n_subjects();
    if n < 2 {
        return Err(Error::InvalidInput(
            "standardization needs at least two subjects".into(),
        ));
    }
    let v = dataset.n_nodes();
    let mut out = dataset.clone();
    for (u, w) in edge_pairs(v) {
        let series: Vec<f64> = (0..n).map(|i| dataset.connectivity[i][(u, w)]).collect();
        let m = crate::linalg::mean(&series);
        let var = crate::linalg::sample_variance(&series);
        if var <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "zero variance at edge ({}, {})",
                u + 1,
                w + 1
            )));
        }
        let sd = var.sqrt();
        for i in 0..n {
            let z = (series[i] - m) / sd;
            out.connectivity[i][(u, w)] = z;
            out.connectivity[i][(w, u)] = z;
        }
    }
    Ok(out)
}

/// Loose guard against raw (unstandardized) connectivity: pooled edge
/// values must have near-zero mean and near-unit variance. Trivially true
/// for single-node networks.
pub fn check_edge_standardized(dataset: &ConnectomeDataset) -> Result<()> {
    let v = dataset.n_nodes();
    if v < 2 {
        return Ok(());
    }
    let mut pooled = Vec::with_capacity(dataset.n_subjects() * dataset.n_edges());
    for slice in &dataset.connectivity {
        for (u, w) in edge_pairs(v) {
            pooled.push(slice[(u, w)]);
        }
    }
    let m = crate::linalg::mean(&pooled);
    let var = crate::linalg::sample_variance(&pooled);
    if m.abs() > 0.25 || !(0.5..=2.0).contains(&var) {
        return Err(Error::InvalidInput(format!(
            "connectivity does not look edge-standardized (pooled mean {m:.3}, \
             variance {var:.3}); standardize each edge across subjects first"
        )));
    }
    Ok(())
}

/// Fisher z-transformation atanh(r); rejects |r| ≥ 1.
pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::InvalidInput(format!(
            "fisher_z requires |r| < 1, got {r}"
        )));
    }
    Ok(r.atanh())
}
