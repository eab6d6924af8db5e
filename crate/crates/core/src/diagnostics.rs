//! Convergence diagnostics for retained chains: trace means, Monte Carlo
//! standard errors via batch means, lag-1 autocorrelation, and effective
//! sample size with the initial-positive-sequence truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean, sample_variance};
use crate::sampler::PosteriorChain;

/// Diagnostic row for one scalar summary parameter. Degenerate (constant)
/// traces report `None` for the variance-based fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub mean: f64,
    pub mcse: Option<f64>,
    pub lag1_autocorr: Option<f64>,
    pub ess: Option<f64>,
}

/// Sample autocorrelation at `lag` (biased n-denominator estimator, the
/// standard choice for spectral summation).
pub fn autocorrelation(trace: &[f64], lag: usize) -> Option<f64> {
    let n = trace.len();
    if lag >= n {
        return None;
    }
    let m = mean(trace);
    let denom: f64 = trace.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = (0..n - lag)
        .map(|k| (trace[k] - m) * (trace[k + lag] - m))
        .sum();
    Some(num / denom)
}

/// Monte Carlo standard error of the trace mean by non-overlapping batch
/// means with floor(sqrt(n)) batches. Returns `None` for constant traces.
pub fn batch_means_mcse(trace: &[f64]) -> Option<f64> {
    let n = trace.len();
    if n < 4 {
        return None;
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch_size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| mean(&trace[b * batch_size..(b + 1) * batch_size]))
        .collect();
    let var = sample_variance(&means);
    if var == 0.0 {
        return None;
    }
    Some((var / n_batches as f64).sqrt())
}

/// Effective sample size n / (1 + 2 Σ ρ_k), truncating the sum at the first
/// even-indexed pair (ρ_{2k} + ρ_{2k+1}) that is non-positive — the standard
/// initial-positive-sequence rule for reversible chains. Returns `None` for
/// constant traces.
pub fn effective_sample_size(trace: &[f64]) -> Option<f64> {
    let n = trace.len();
    if n < 4 {
        return None;
    }
    autocorrelation(trace, 1)?;
    let max_lag = n - 1;
    let mut rho_sum = 0.0;
    let mut lag = 1;
    while lag + 1 <= max_lag {
        let pair = autocorrelation(trace, lag)? + autocorrelation(trace, lag + 1)?;
        if pair <= 0.0 {
            break;
        }
        rho_sum += pair;
        lag += 2;
    }
    let denom = 1.0 + 2.0 * rho_sum;
    Some((n as f64 / denom).min(n as f64))
}

fn diagnose(name: &str, trace: &[f64]) -> ParameterDiagnostics {
    ParameterDiagnostics {
        name: name.to_string(),
        mean: mean(trace),
        mcse: batch_means_mcse(trace),
        lag1_autocorr: autocorrelation(trace, 1),
        ess: effective_sample_size(trace),
    }
}

/// Per-parameter diagnostics for every scalar summary the chain retains:
/// each region's latent covariance, then the two error variances. Requires
/// at least 10 retained draws.
pub fn convergence_summary(chain: &PosteriorChain) -> Result<Vec<ParameterDiagnostics>> {
    if chain.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "convergence summary requires at least 10 retained draws, chain has {}",
            chain.len()
        )));
    }
    let v = chain.lambda_z_theta[0].len();
    let mut rows = Vec::with_capacity(v + 2);
    let mut trace = vec![0.0; chain.len()];
    for u in 0..v {
        for (k, draw) in chain.lambda_z_theta.iter().enumerate() {
            trace[k] = draw[u];
        }
        rows.push(diagnose(&format!("lambda_z_theta[{}]", u + 1), &trace));
    }
    rows.push(diagnose("sigma2", &chain.sigma2));
    rows.push(diagnose("tau2", &chain.tau2));
    Ok(rows)
}
