//! Dense linear-algebra and sampling primitives shared by the model,
//! sampler, and baselines: positive-definite factorizations, multivariate
//! normal / Wishart / inverse-Wishart draws, log-densities, quantiles,
//! Pearson correlation, and a rank-checked least-squares solver.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Forces exact symmetry by averaging a matrix with its transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Cholesky factorization that reports failures as errors instead of
/// panicking; `context` names the matrix for the error message.
pub fn cholesky_spd(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{context} failed Cholesky factorization")))
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
pub fn log_det_spd(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    let chol = cholesky_spd(m, context)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of a symmetric positive definite matrix, symmetrized to remove
/// factorization round-off.
pub fn invert_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let mut inv = cholesky_spd(m, context)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// One standard-normal draw.
pub fn draw_std_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One N(mean, var) draw.
pub fn draw_normal<R: Rng>(mean: f64, var: f64, rng: &mut R) -> f64 {
    mean + var.sqrt() * draw_std_normal(rng)
}

/// One Gamma(shape, rate) draw (rate = inverse scale).
pub fn draw_gamma_shape_rate<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Numerical(format!("gamma sampler rejected shape {shape}, rate {rate}: {e}")))?;
    Ok(gamma.sample(rng))
}

/// Draw from the multivariate normal with the given precision matrix and
/// linear term: N(P^-1 l, P^-1). This is the canonical form produced by
/// conjugate Gaussian updates.
pub fn draw_mvn_from_precision<R: Rng>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = cholesky_spd(precision, "conditional precision matrix")?;
    let mean = chol.solve(linear);
    let v = DVector::from_fn(linear.len(), |_, _| draw_std_normal(rng));
    // With P = L L^T, solving L^T x = v gives x ~ N(0, P^-1).
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Numerical("triangular solve failed in MVN draw".into()))?;
    Ok(mean + noise)
}

/// Draw from N(mean, cov) with an explicit covariance matrix.
pub fn draw_mvn<R: Rng>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = cholesky_spd(cov, "covariance matrix")?;
    let v = DVector::from_fn(mean.len(), |_, _| draw_std_normal(rng));
    Ok(mean + chol.l() * v)
}

/// Wishart(scale, df) draw via the Bartlett decomposition: with
/// scale = L L^T and A lower-triangular having sqrt(chi-square(df - i))
/// diagonal entries and standard-normal subdiagonals, L A A^T L^T is
/// Wishart distributed.
pub fn draw_wishart<R: Rng>(scale: &DMatrix<f64>, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if df <= (d - 1) as f64 {
        return Err(Error::InvalidInput(format!(
            "Wishart degrees of freedom {df} must exceed dimension-1 = {}",
            d - 1
        )));
    }
    let chol = cholesky_spd(scale, "Wishart scale matrix")?;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi2 = draw_gamma_shape_rate((df - i as f64) / 2.0, 0.5, rng)?;
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = draw_std_normal(rng);
        }
    }
    let la = chol.l() * a;
    let mut w = &la * la.transpose();
    symmetrize(&mut w);
    Ok(w)
}

/// Inverse-Wishart(scale, df) draw: invert a Wishart draw with inverted
/// scale matrix.
pub fn draw_inverse_wishart<R: Rng>(
    scale: &DMatrix<f64>,
    df: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let scale_inv = invert_spd(scale, "inverse-Wishart scale matrix")?;
    let w = draw_wishart(&scale_inv, df, rng)?;
    invert_spd(&w, "Wishart draw during inverse-Wishart sampling")
}

/// log N(x; mean, var).
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let diff = x - mean;
    -0.5 * (LN_2PI + var.ln()) - diff * diff / (2.0 * var)
}

/// log MVN(x; mean, cov).
pub fn mvn_log_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let k = x.len() as f64;
    let chol = cholesky_spd(cov, "MVN covariance")?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let diff = x - mean;
    let solved = chol.solve(&diff);
    Ok(-0.5 * (k * LN_2PI + log_det + diff.dot(&solved)))
}

/// log Gamma(x; shape, rate) in the shape-rate parameterization.
pub fn gamma_log_pdf_shape_rate(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log of the multivariate gamma function of dimension `d` at `a`.
pub fn ln_multivariate_gamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (1..=d).map(|j| ln_gamma(a + (1.0 - j as f64) / 2.0)).sum::<f64>()
}

/// log inverse-Wishart(sigma; scale, df) density.
pub fn inverse_wishart_log_pdf(
    sigma: &DMatrix<f64>,
    scale: &DMatrix<f64>,
    df: f64,
) -> Result<f64> {
    let d = sigma.nrows();
    let dd = d as f64;
    let log_det_scale = log_det_spd(scale, "inverse-Wishart scale")?;
    let log_det_sigma = log_det_spd(sigma, "inverse-Wishart argument")?;
    let sigma_inv = invert_spd(sigma, "inverse-Wishart argument")?;
    let trace = (scale * &sigma_inv).trace();
    Ok(0.5 * df * log_det_scale
        - 0.5 * df * dd * std::f64::consts::LN_2
        - ln_multivariate_gamma(d, df / 2.0)
        - 0.5 * (df + dd + 1.0) * log_det_sigma
        - 0.5 * trace)
}

/// Empirical quantile with linear interpolation between order statistics
/// (the h = (n-1)q convention); `q` is clamped to [0, 1].
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile input"));
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Sample mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n-1 denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Pearson correlation; `None` when either series is degenerate
/// (zero variance or fewer than two points).
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Indices of design columns that are (numerically) linear combinations of
/// earlier columns, found by modified Gram-Schmidt with a relative
/// tolerance.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut collinear = Vec::new();
    for j in 0..x.ncols() {
        let mut col = x.column(j).into_owned();
        let orig_norm = col.norm();
        for b in &basis {
            let proj = b.dot(&col);
            col.axpy(-proj, b, 1.0);
        }
        if col.norm() <= 1e-10 * orig_norm.max(1e-12) {
            collinear.push(j);
        } else {
            let norm = col.norm();
            basis.push(col / norm);
        }
    }
    collinear
}

/// Ordinary least squares via SVD, with an explicit rank check that names
/// the offending columns on failure.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(Error::Collinear(format!(
            "design columns {bad:?} (0-based) are linearly dependent on earlier columns"
        )));
    }
    let svd = x.clone().svd(true, true);
    svd.solve(y, 1e-12)
        .map(|m| DVector::from_column_slice(m.as_slice()))
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))
}
