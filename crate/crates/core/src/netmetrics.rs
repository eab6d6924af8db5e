//! Weighted-network summaries of posterior latent structure: the averaged
//! latent network, node centralities (strength, closeness, betweenness),
//! and the transformed-moment normality tests used to compare strength
//! distributions.
//!
//! Conventions: strength is computed on raw (possibly negative) weights;
//! path-based metrics require the positive-shifted graph and treat weights
//! as distances (shortest paths minimize summed weights). A weight of
//! exactly zero marks an absent edge.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sampler::PosteriorChain;

/// Symmetric weighted graph with zero diagonal and finite weights.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    /// Validates symmetry, zero diagonal, and finiteness.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::Dimension(format!(
                "weight matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for u in 0..weights.nrows() {
            if weights[(u, u)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight matrix diagonal must be zero, node {} has {}",
                    u + 1,
                    weights[(u, u)]
                )));
            }
            for v in 0..weights.ncols() {
                if !weights[(u, v)].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite weight at ({}, {})",
                        u + 1,
                        v + 1
                    )));
                }
                if weights[(u, v)] != weights[(v, u)] {
                    return Err(Error::InvalidInput(format!(
                        "weight matrix asymmetric at ({}, {})",
                        u + 1,
                        v + 1
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    /// The weight matrix.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// Averages the outer products z_i z_i' over retained draws and the given
/// subjects — the "average participant" latent network — with zero diagonal.
/// Requires a chain run with latent retention.
pub fn latent_network(chain: &PosteriorChain, subject_set: &[usize]) -> Result<WeightedGraph> {
    if subject_set.is_empty() {
        return Err(Error::InvalidInput(
            "latent network requires a non-empty subject set".into(),
        ));
    }
    let draws = chain.z.as_ref().ok_or_else(|| {
        Error::InvalidInput("chain did not retain latent draws (retain_latents = false)".into())
    })?;
    if draws.is_empty() {
        return Err(Error::InvalidInput("empty chain".into()));
    }
    let v = draws[0].ncols();
    let n = draws[0].nrows();
    for &i in subject_set {
        if i >= n {
            return Err(Error::Dimension(format!(
                "subject index {i} out of range for {n} subjects"
            )));
        }
    }
    let mut acc = DMatrix::<f64>::zeros(v, v);
    for z in draws {
        for &i in subject_set {
            let row = z.row(i);
            for u in 0..v {
                let zu = row[u];
                for w in 0..v {
                    acc[(u, w)] += zu * row[w];
                }
            }
        }
    }
    acc /= (draws.len() * subject_set.len()) as f64;
    for u in 0..v {
        acc[(u, u)] = 0.0;
    }
    WeightedGraph::new(acc)
}

/// Node strength: row sums of the (unshifted) weights.
pub fn node_strength(graph: &WeightedGraph) -> Vec<f64> {
    let v = graph.n_nodes();
    (0..v)
        .map(|u| (0..v).map(|w| graph.weights[(u, w)]).sum())
        .collect()
}

/// Adds the magnitude of the most negative edge weight to every present
/// (nonzero) edge when any weight is negative; otherwise returns the graph
/// unchanged. The formerly most-negative edge lands exactly at weight 0 and
/// is thereby absent from the shifted graph.
pub fn positive_shift(graph: &WeightedGraph) -> WeightedGraph {
    let v = graph.n_nodes();
    let mut min_w = f64::INFINITY;
    for u in 0..v {
        for w in 0..v {
            if u != w && graph.weights[(u, w)] != 0.0 {
                min_w = min_w.min(graph.weights[(u, w)]);
            }
        }
    }
    if !min_w.is_finite() || min_w >= 0.0 {
        return graph.clone();
    }
    let shift = -min_w;
    let mut shifted = graph.weights.clone();
    for u in 0..v {
        for w in 0..v {
            if u != w && shifted[(u, w)] != 0.0 {
                shifted[(u, w)] += shift;
            }
        }
    }
    WeightedGraph { weights: shifted }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reverse the distance ordering so BinaryHeap pops the nearest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("distances are finite")
            .then(other.node.cmp(&self.node))
    }
}

/// Shortest-path tree from one source on positive weights-as-distances:
/// distances, path counts, and predecessor lists, with ties recognized at
/// relative tolerance 1e-12.
struct ShortestPaths {
    dist: Vec<f64>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
    /// Settled nodes in nondecreasing distance order.
    order: Vec<usize>,
}

fn dijkstra(graph: &WeightedGraph, source: usize) -> ShortestPaths {
    let v = graph.n_nodes();
    let mut dist = vec![f64::INFINITY; v];
    let mut sigma = vec![0.0; v];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); v];
    let mut settled = vec![false; v];
    let mut order = Vec::with_capacity(v);
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    sigma[source] = 1.0;
    heap.push(HeapEntry { dist: 0.0, node: source });

    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        order.push(u);
        for w in 0..v {
            let edge = graph.weights[(u, w)];
            if w == u || edge == 0.0 {
                continue;
            }
            let candidate = d + edge;
            let tol = 1e-12 * candidate.abs().max(1.0);
            if candidate < dist[w] - tol {
                dist[w] = candidate;
                sigma[w] = sigma[u];
                preds[w].clear();
                preds[w].push(u);
                heap.push(HeapEntry { dist: candidate, node: w });
            } else if (candidate - dist[w]).abs() <= tol && !settled[w] {
                sigma[w] += sigma[u];
                preds[w].push(u);
            }
        }
    }
    ShortestPaths { dist, sigma, preds, order }
}

/// Closeness centrality on weights-as-distances: for node u with r reachable
/// nodes (including itself), ((r - 1)/(V - 1)) / sum of distances within its
/// component; isolated nodes score 0. On a connected graph this is exactly
/// 1 / sum of shortest-path distances.
pub fn closeness(graph: &WeightedGraph) -> Vec<f64> {
    let v = graph.n_nodes();
    if v <= 1 {
        return vec![0.0; v];
    }
    (0..v)
        .map(|u| {
            let sp = dijkstra(graph, u);
            let mut total = 0.0;
            let mut reachable = 0usize;
            for w in 0..v {
                if sp.dist[w].is_finite() {
                    reachable += 1;
                    total += sp.dist[w];
                }
            }
            if reachable <= 1 || total == 0.0 {
                0.0
            } else {
                ((reachable - 1) as f64 / (v - 1) as f64) / total
            }
        })
        .collect()
}

/// Betweenness centrality on weights-as-distances via pair-dependency
/// accumulation: fractional credit across tied shortest paths, endpoints
/// excluded, each unordered pair counted once.
pub fn betweenness(graph: &WeightedGraph) -> Vec<f64> {
    let v = graph.n_nodes();
    let mut score = vec![0.0; v];
    for s in 0..v {
        let sp = dijkstra(graph, s);
        let mut delta = vec![0.0; v];
        for &w in sp.order.iter().rev() {
            for &p in &sp.preds[w] {
                delta[p] += sp.sigma[p] / sp.sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    // Each unordered pair was visited from both endpoints.
    for x in &mut score {
        *x /= 2.0;
    }
    score
}

fn central_moments(sample: &[f64]) -> (f64, f64, f64, f64) {
    let n = sample.len() as f64;
    let m = sample.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for x in sample {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m, m2 / n, m3 / n, m4 / n)
}

fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    2.0 * (1.0 - normal.cdf(z.abs()))
}

/// Transformed-skewness normality test (D'Agostino): returns the normal
/// Z statistic and its two-sided p-value. Requires n >= 8.
pub fn skewness_test(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "skewness test requires at least 8 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let (_, m2, m3, _) = central_moments(sample);
    if m2 == 0.0 {
        return Err(Error::InvalidInput(
            "skewness test is undefined for a constant sample".into(),
        ));
    }
    let g1 = m3 / m2.powf(1.5);
    let y = g1 * (((nf + 1.0) * (nf + 3.0)) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let z = delta * (y / alpha).asinh();
    Ok((z, two_sided_p(z)))
}

/// Transformed-kurtosis normality test (Anscombe-Glynn): returns the normal
/// Z statistic (negative for platykurtic samples) and its two-sided p-value.
/// Requires n >= 20.
pub fn kurtosis_test(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 20 {
        return Err(Error::InvalidInput(format!(
            "kurtosis test requires at least 20 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let (_, m2, _, m4) = central_moments(sample);
    if m2 == 0.0 {
        return Err(Error::InvalidInput(
            "kurtosis test is undefined for a constant sample".into(),
        ));
    }
    let g2 = m4 / (m2 * m2);
    let mean_g2 = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_g2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0)
        / ((nf + 1.0) * (nf + 1.0) * (nf + 3.0) * (nf + 5.0));
    let x = (g2 - mean_g2) / var_g2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1
        * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term = (1.0 - 2.0 / a) / (1.0 + x * (2.0 / (a - 4.0)).sqrt());
    let z = (1.0 - 2.0 / (9.0 * a) - term.cbrt()) / (2.0 / (9.0 * a)).sqrt();
    Ok((z, two_sided_p(z)))
}
