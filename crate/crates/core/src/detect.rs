//! Region-level biomarker decisions from a posterior chain.
//!
//! The per-region covariance between latent connectivity and the latent
//! attribute is summarized with equal-tailed credible intervals; a region is
//! flagged when its interval excludes zero. Chains are only identified up to
//! one global sign, so the report first canonicalizes: if the entry with the
//! largest |posterior mean| is negative, every retained sample is negated.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{empirical_quantile, mean};
use crate::sampler::PosteriorChain;

/// Interval decision for one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionInterval {
    /// 0-based region index.
    pub region: usize,
    /// Posterior mean of the region's latent covariance.
    pub posterior_mean: f64,
    /// Lower equal-tailed interval endpoint.
    pub lower: f64,
    /// Upper equal-tailed interval endpoint.
    pub upper: f64,
    /// True when the interval excludes zero.
    pub significant: bool,
}

/// Per-region covariance intervals plus the sign convention applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    /// One row per region, in region order.
    pub regions: Vec<RegionInterval>,
    /// Credible level the intervals were computed at.
    pub level: f64,
    /// True when the global canonicalization negated the chain's samples.
    pub sign_flipped: bool,
}

impl DetectionReport {
    /// Indices of flagged regions, in region order.
    pub fn flagged(&self) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| r.significant)
            .map(|r| r.region)
            .collect()
    }
}

/// Computes per-region equal-tailed credible intervals for the latent
/// covariance vector after resolving the residual global reflection
/// (samples are negated when the largest-|mean| entry is negative, so
/// reports are reproducible across reflected chains).
pub fn covariance_intervals(chain: &PosteriorChain, level: f64) -> Result<DetectionReport> {
    if chain.is_empty() {
        return Err(Error::InvalidInput(
            "detection requires a non-empty chain".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "credible level must lie strictly in (0, 1), got {level}"
        )));
    }
    let v = chain.lambda_z_theta[0].len();
    let raw_mean: DVector<f64> = chain.lambda_z_theta_mean()?;
    let dominant = (0..v)
        .max_by(|&a, &b| {
            raw_mean[a]
                .abs()
                .partial_cmp(&raw_mean[b].abs())
                .expect("posterior means are finite")
        })
        .expect("at least one region");
    let sign_flipped = raw_mean[dominant] < 0.0;
    let flip = if sign_flipped { -1.0 } else { 1.0 };

    let alpha = (1.0 - level) / 2.0;
    let mut regions = Vec::with_capacity(v);
    let mut samples = vec![0.0; chain.len()];
    for u in 0..v {
        for (k, draw) in chain.lambda_z_theta.iter().enumerate() {
            samples[k] = flip * draw[u];
        }
        let lower = empirical_quantile(&samples, alpha)?;
        let upper = empirical_quantile(&samples, 1.0 - alpha)?;
        let significant = lower > 0.0 || upper < 0.0;
        regions.push(RegionInterval {
            region: u,
            posterior_mean: mean(&samples),
            lower,
            upper,
            significant,
        });
    }
    Ok(DetectionReport {
        regions,
        level,
        sign_flipped,
    })
}

/// Regions ordered by |posterior mean| descending, ties broken by region
/// index ascending.
pub fn rank_regions(report: &DetectionReport) -> Vec<usize> {
    let mut order: Vec<usize> = (0..report.regions.len()).collect();
    order.sort_by(|&a, &b| {
        let ma = report.regions[a].posterior_mean.abs();
        let mb = report.regions[b].posterior_mean.abs();
        mb.partial_cmp(&ma)
            .expect("posterior means are finite")
            .then(a.cmp(&b))
    });
    order
}
