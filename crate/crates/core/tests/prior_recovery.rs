//! Prior recovery: with every likelihood contribution masked out, each full
//! conditional reduces to its prior, and draws from the update machinery
//! reproduce the prior's moments over 10^4 samples within three Monte Carlo
//! standard errors. A fully masked end-to-end chain must do the same for the
//! quantities it retains.

use latentsna::data::{edge_pairs, ConnectomeDataset};
use latentsna::linalg;
use latentsna::model::ModelState;
use latentsna::sampler::{
    attr_intercept_conditional, beta_conditional, gamma_conditional, latent_theta_conditional,
    latent_z_conditional, run_chain_masked, sigma2_conditional, sigma_conditional,
    subject_intercept_conditional, tau2_conditional, ObservationMask, SamplerConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const N: usize = 5;
const V: usize = 3;
const P: usize = 2;
const Q_CONN: usize = 2;
const Q_ATTR: usize = 2;
const DRAWS: usize = 10_000;
const EXACT: f64 = 1e-12;

fn test_dataset(rng: &mut ChaCha12Rng) -> ConnectomeDataset {
    let connectivity: Vec<DMatrix<f64>> = (0..N)
        .map(|_| {
            let mut x = DMatrix::zeros(V, V);
            for (u, w) in edge_pairs(V) {
                let val = rng.gen::<f64>() * 2.0 - 1.0;
                x[(u, w)] = val;
                x[(w, u)] = val;
            }
            x
        })
        .collect();
    let attributes = DMatrix::from_fn(N, P, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let conn_cov = DMatrix::from_fn(N, Q_CONN, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.gen::<f64>() * 2.0 - 1.0
        }
    });
    let attr_cov = DMatrix::from_fn(N, Q_ATTR, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.gen::<f64>() * 2.0 - 1.0
        }
    });
    ConnectomeDataset::new(
        connectivity,
        attributes,
        conn_cov,
        attr_cov,
        ConnectomeDataset::default_node_labels(V),
        ConnectomeDataset::default_attribute_labels(P),
    )
    .unwrap()
}

fn all_masked(n: usize) -> ObservationMask {
    ObservationMask {
        has_connectivity: vec![false; n],
        has_attributes: vec![false; n],
    }
}

fn random_spd(dim: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let mut m = &a * a.transpose() / dim as f64;
    for i in 0..dim {
        m[(i, i)] += 0.5;
    }
    linalg::symmetrize(&mut m);
    m
}

fn random_state(rng: &mut ChaCha12Rng) -> ModelState {
    ModelState {
        z: DMatrix::from_fn(N, V, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        theta: DVector::from_fn(N, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        sigma: random_spd(V + 1, rng),
        beta: DVector::from_fn(Q_CONN, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        gamma: DVector::from_fn(Q_ATTR, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        a: DVector::from_fn(N, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        b: DVector::from_fn(P, |_, _| rng.gen::<f64>() * 2.0 - 1.0),
        sigma2: 0.3 + rng.gen::<f64>(),
        tau2: 0.3 + rng.gen::<f64>(),
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn second_moment_of(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// Checks a sample's mean and variance against targets, with the standard
/// errors computed from the target distribution's own moments (mu4 is the
/// fourth central moment, which governs the variance of the sample variance).
fn assert_moments(label: &str, xs: &[f64], mean: f64, var: f64, mu4: f64) {
    let n = xs.len() as f64;
    let m = mean_of(xs);
    let se_mean = (var / n).sqrt();
    assert!(
        (m - mean).abs() < 3.0 * se_mean,
        "{label}: sample mean {m} vs {mean}, 3 MCSE = {}",
        3.0 * se_mean
    );
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let se_var = ((mu4 - var * var) / n).sqrt();
    assert!(
        (v - var).abs() < 3.0 * se_var,
        "{label}: sample variance {v} vs {var}, 3 MCSE = {}",
        3.0 * se_var
    );
}

/// Mean check with the standard error estimated from the sample itself (for
/// targets whose variance is awkward or unknown in closed form).
fn assert_mean_plugin(label: &str, xs: &[f64], mean: f64) {
    let n = xs.len() as f64;
    let m = mean_of(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        (m - mean).abs() < 3.0 * se,
        "{label}: sample mean {m} vs {mean}, 3 MCSE = {}",
        3.0 * se
    );
}

/// Batch-means Monte Carlo standard error for a (possibly autocorrelated)
/// trace, using sqrt(n) batches.
fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    let b = (n as f64).sqrt().floor() as usize;
    let m = n / b;
    let used = b * m;
    let overall = mean_of(&xs[..used]);
    let mut ss = 0.0;
    for batch in 0..b {
        let bm = mean_of(&xs[batch * m..(batch + 1) * m]);
        ss += (bm - overall) * (bm - overall);
    }
    (ss / (b as f64 - 1.0) / b as f64).sqrt()
}

fn assert_trace_mean(label: &str, xs: &[f64], target: f64) {
    let m = mean_of(xs);
    let se = batch_means_se(xs);
    assert!(
        (m - target).abs() < 3.0 * se,
        "{label}: trace mean {m} vs {target}, 3 MCSE = {}",
        3.0 * se
    );
}

#[test]
fn masked_conditionals_reduce_to_exact_priors() {
    let mut rng = ChaCha12Rng::seed_from_u64(411);
    let dataset = test_dataset(&mut rng);
    let state = random_state(&mut rng);
    let mask = all_masked(N);

    let beta = beta_conditional(&state, &dataset, &mask);
    assert!((&beta.precision - DMatrix::<f64>::identity(Q_CONN, Q_CONN)).abs().max() < EXACT);
    assert!(beta.linear.abs().max() < EXACT);

    let gamma = gamma_conditional(&state, &dataset, &mask);
    assert!((&gamma.precision - DMatrix::<f64>::identity(Q_ATTR, Q_ATTR)).abs().max() < EXACT);
    assert!(gamma.linear.abs().max() < EXACT);

    for i in 0..N {
        let a = subject_intercept_conditional(&state, &dataset, &mask, i);
        assert_eq!((a.mean, a.var), (0.0, 1.0));
    }
    for p in 0..P {
        let b = attr_intercept_conditional(&state, &dataset, &mask, p);
        assert_eq!((b.mean, b.var), (0.0, 1.0));
    }

    let s2 = sigma2_conditional(&state, &dataset, &mask);
    assert_eq!((s2.shape, s2.rate), (0.5, 0.5));
    let t2 = tau2_conditional(&state, &dataset, &mask);
    assert_eq!((t2.shape, t2.rate), (0.5, 0.5));
}

#[test]
fn effect_draws_at_zero_information_match_standard_normal_moments() {
    let mut rng = ChaCha12Rng::seed_from_u64(412);
    let dataset = test_dataset(&mut rng);
    let state = random_state(&mut rng);
    let mask = all_masked(N);

    let beta = beta_conditional(&state, &dataset, &mask);
    let gamma = gamma_conditional(&state, &dataset, &mask);
    let a0 = subject_intercept_conditional(&state, &dataset, &mask, 0);
    let b0 = attr_intercept_conditional(&state, &dataset, &mask, 0);

    let mut beta0 = Vec::with_capacity(DRAWS);
    let mut beta1 = Vec::with_capacity(DRAWS);
    let mut gamma0 = Vec::with_capacity(DRAWS);
    let mut a_draws = Vec::with_capacity(DRAWS);
    let mut b_draws = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        let bd = linalg::draw_mvn_from_precision(&beta.precision, &beta.linear, &mut rng).unwrap();
        beta0.push(bd[0]);
        beta1.push(bd[1]);
        let gd =
            linalg::draw_mvn_from_precision(&gamma.precision, &gamma.linear, &mut rng).unwrap();
        gamma0.push(gd[0]);
        a_draws.push(linalg::draw_normal(a0.mean, a0.var, &mut rng));
        b_draws.push(linalg::draw_normal(b0.mean, b0.var, &mut rng));
    }
    for (label, xs) in [
        ("beta[0]", &beta0),
        ("beta[1]", &beta1),
        ("gamma[0]", &gamma0),
        ("a[0]", &a_draws),
        ("b[0]", &b_draws),
    ] {
        assert_moments(label, xs, 0.0, 1.0, 3.0);
    }
}

#[test]
fn precision_draws_at_zero_information_match_gamma_moments() {
    let mut rng = ChaCha12Rng::seed_from_u64(413);
    let dataset = test_dataset(&mut rng);
    let state = random_state(&mut rng);
    let mask = all_masked(N);

    let s2 = sigma2_conditional(&state, &dataset, &mask);
    let t2 = tau2_conditional(&state, &dataset, &mask);
    let mut xprec = Vec::with_capacity(DRAWS);
    let mut yprec = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        xprec.push(linalg::draw_gamma_shape_rate(s2.shape, s2.rate, &mut rng).unwrap());
        yprec.push(linalg::draw_gamma_shape_rate(t2.shape, t2.rate, &mut rng).unwrap());
    }
    // Gamma(1/2, 1/2): mean 1, variance 2, fourth central moment 60.
    assert_moments("1/sigma2", &xprec, 1.0, 2.0, 60.0);
    assert_moments("1/tau2", &yprec, 1.0, 2.0, 60.0);
}

#[test]
fn covariance_draws_at_zero_subjects_match_inverse_wishart_moments() {
    // A state with zero subjects: the scale collapses to the identity and
    // the degrees of freedom to V + 3, i.e. the prior itself.
    let state = ModelState {
        z: DMatrix::zeros(0, V),
        theta: DVector::zeros(0),
        sigma: DMatrix::identity(V + 1, V + 1),
        beta: DVector::zeros(Q_CONN),
        gamma: DVector::zeros(Q_ATTR),
        a: DVector::zeros(0),
        b: DVector::zeros(P),
        sigma2: 1.0,
        tau2: 1.0,
    };
    let params = sigma_conditional(&state);
    let dim = V + 1;
    assert_eq!(params.df, (V + 3) as f64);
    assert!((&params.scale - DMatrix::<f64>::identity(dim, dim)).abs().max() < EXACT);

    let mut rng = ChaCha12Rng::seed_from_u64(414);
    let nu = params.df;
    let mut s_diag = Vec::with_capacity(DRAWS);
    let mut s_off = Vec::with_capacity(DRAWS);
    let mut w_diag = Vec::with_capacity(DRAWS);
    let mut w_off = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        let draw = linalg::draw_inverse_wishart(&params.scale, params.df, &mut rng).unwrap();
        s_diag.push(draw[(0, 0)]);
        s_off.push(draw[(0, 1)]);
        let w = linalg::invert_spd(&draw, "prior draw").unwrap();
        w_diag.push(w[(0, 0)]);
        w_off.push(w[(0, 1)]);
    }
    // Mean of the draw is scale/(df - dim - 1) = I. Its diagonal marginals
    // are heavy-tailed (infinite variance), so the standard error comes from
    // the sample itself.
    assert_mean_plugin("Sigma[0,0]", &s_diag, 1.0);
    assert_mean_plugin("Sigma[0,1]", &s_off, 0.0);
    // The precision is Wishart(I, V+3) with all moments finite: mean nu*I,
    // diagonal variance 2*nu, fourth central moment of a chi-square marginal
    // 48*nu + 12*nu^2.
    let n = DRAWS as f64;
    let w_mean = mean_of(&w_diag);
    assert!(
        (w_mean - nu).abs() < 3.0 * (2.0 * nu / n).sqrt(),
        "precision diagonal mean {w_mean} vs {nu}"
    );
    let w_off_mean = mean_of(&w_off);
    assert!(
        w_off_mean.abs() < 3.0 * (nu / n).sqrt(),
        "precision off-diagonal mean {w_off_mean} vs 0"
    );
    let mu4 = 48.0 * nu + 12.0 * nu * nu;
    let w_var = second_moment_of(&w_diag) - w_mean * w_mean;
    assert!(
        (w_var - 2.0 * nu).abs() < 3.0 * ((mu4 - 4.0 * nu * nu) / n).sqrt(),
        "precision diagonal variance {w_var} vs {}",
        2.0 * nu
    );
}

#[test]
fn masked_latent_conditionals_match_textbook_mvn_conditionals() {
    let mut rng = ChaCha12Rng::seed_from_u64(415);
    let dataset = test_dataset(&mut rng);
    let mask = all_masked(N);

    for _ in 0..20 {
        let state = random_state(&mut rng);
        let s = &state.sigma;
        let s_tt = s[(V, V)];
        for i in 0..N {
            // z_{u,i} with no network: normal with the pair-conditional
            // moments of (z_u, theta).
            for u in 0..V {
                let p = latent_z_conditional(&state, &dataset, &mask, i, u).unwrap();
                let s_uu = s[(u, u)];
                let s_ut = s[(u, V)];
                let target_var = s_uu - s_ut * s_ut / s_tt;
                let target_mean = s_ut / s_tt * state.theta[i];
                assert!((p.var - target_var).abs() < EXACT, "z var at ({i},{u})");
                assert!((p.mean - target_mean).abs() < EXACT, "z mean at ({i},{u})");
            }
            // theta_i with no attributes: the exact conditional given the
            // whole z row, from the standard MVN partition formulas.
            let p = latent_theta_conditional(&state, &dataset, &mask, i).unwrap();
            let s_zz = s.view((0, 0), (V, V)).into_owned();
            let s_zt = DVector::from_fn(V, |u, _| s[(u, V)]);
            let zi = state.z.row(i).transpose();
            let solve = linalg::invert_spd(&s_zz, "z block").unwrap();
            let target_mean = s_zt.dot(&(&solve * &zi));
            let target_var = s_tt - s_zt.dot(&(&solve * &s_zt));
            assert!((p.var - target_var).abs() < EXACT, "theta var at {i}");
            assert!((p.mean - target_mean).abs() < EXACT, "theta mean at {i}");
        }
    }

    // Moment match for one fixed conditional of each kind.
    let state = random_state(&mut rng);
    let pz = latent_z_conditional(&state, &dataset, &mask, 0, 0).unwrap();
    let pt = latent_theta_conditional(&state, &dataset, &mask, 0).unwrap();
    let mut z_draws = Vec::with_capacity(DRAWS);
    let mut t_draws = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        z_draws.push(linalg::draw_normal(pz.mean, pz.var, &mut rng));
        t_draws.push(linalg::draw_normal(pt.mean, pt.var, &mut rng));
    }
    assert_moments("masked z draw", &z_draws, pz.mean, pz.var, 3.0 * pz.var * pz.var);
    assert_moments("masked theta draw", &t_draws, pt.mean, pt.var, 3.0 * pt.var * pt.var);
}

#[test]
fn fully_masked_chain_recovers_prior_moments_end_to_end() {
    // V = 1 keeps every latent update exact (the per-coordinate z step has
    // no other coordinates to couple with), so the whole chain is a valid
    // sampler of the prior and every retained trace must match it.
    let v = 1;
    let n = 6;
    let mut rng = ChaCha12Rng::seed_from_u64(416);
    let connectivity: Vec<DMatrix<f64>> =
        (0..n).map(|_| DMatrix::zeros(v, v)).collect();
    let attributes = DMatrix::from_fn(n, P, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let conn_cov = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen::<f64>() });
    let attr_cov = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen::<f64>() });
    let dataset = ConnectomeDataset::new(
        connectivity,
        attributes,
        conn_cov,
        attr_cov,
        ConnectomeDataset::default_node_labels(v),
        ConnectomeDataset::default_attribute_labels(P),
    )
    .unwrap();
    let mask = all_masked(n);
    let config = SamplerConfig {
        n_iterations: DRAWS + 500,
        burn_in: 500,
        thin: 1,
        seed: 417,
        init_scale: 1.0,
        retain_latents: false,
    };

    let mut beta0 = Vec::with_capacity(DRAWS);
    let mut a0 = Vec::with_capacity(DRAWS);
    let mut gamma0 = Vec::with_capacity(DRAWS);
    let mut b0 = Vec::with_capacity(DRAWS);
    let mut xprec = Vec::with_capacity(DRAWS);
    let mut yprec = Vec::with_capacity(DRAWS);
    let mut theta0 = Vec::with_capacity(DRAWS);
    let mut s00 = Vec::with_capacity(DRAWS);
    let mut s01 = Vec::with_capacity(DRAWS);
    let mut s11 = Vec::with_capacity(DRAWS);
    let mut w00 = Vec::with_capacity(DRAWS);
    let mut w01 = Vec::with_capacity(DRAWS);
    let mut w11 = Vec::with_capacity(DRAWS);
    run_chain_masked(&dataset, &mask, &config, |_, state| {
        beta0.push(state.beta[0]);
        a0.push(state.a[0]);
        gamma0.push(state.gamma[0]);
        b0.push(state.b[0]);
        xprec.push(1.0 / state.sigma2);
        yprec.push(1.0 / state.tau2);
        theta0.push(state.theta[0]);
        let s = &state.sigma;
        s00.push(s[(0, 0)]);
        s01.push(s[(0, 1)]);
        s11.push(s[(1, 1)]);
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(0, 1)];
        w00.push(s[(1, 1)] / det);
        w01.push(-s[(0, 1)] / det);
        w11.push(s[(0, 0)] / det);
    })
    .unwrap();
    assert_eq!(beta0.len(), DRAWS);

    // Blocks whose conditionals are the prior itself give i.i.d. draws; the
    // latent/covariance sub-chain is autocorrelated. Batch means covers both.
    for (label, xs, mean) in [
        ("beta[0]", &beta0, 0.0),
        ("a[0]", &a0, 0.0),
        ("gamma[0]", &gamma0, 0.0),
        ("b[0]", &b0, 0.0),
        ("1/sigma2", &xprec, 1.0),
        ("1/tau2", &yprec, 1.0),
        ("theta[0]", &theta0, 0.0),
    ] {
        assert_trace_mean(label, xs, mean);
    }
    let sq = |xs: &[f64]| xs.iter().map(|x| x * x).collect::<Vec<_>>();
    assert_trace_mean("beta[0]^2", &sq(&beta0), 1.0);
    assert_trace_mean("a[0]^2", &sq(&a0), 1.0);
    assert_trace_mean("gamma[0]^2", &sq(&gamma0), 1.0);
    assert_trace_mean("b[0]^2", &sq(&b0), 1.0);
    assert_trace_mean("(1/sigma2)^2", &sq(&xprec), 3.0);
    assert_trace_mean("(1/tau2)^2", &sq(&yprec), 3.0);

    // Sigma's stationary marginal is the inverse-Wishart prior (mean I; its
    // diagonals are heavy-tailed so the mean check relies on the batch-means
    // band). The precision trace is Wishart(I, 4): mean 4I with all moments
    // finite, giving the sharp check.
    assert_trace_mean("Sigma[0,0]", &s00, 1.0);
    assert_trace_mean("Sigma[0,1]", &s01, 0.0);
    assert_trace_mean("Sigma[1,1]", &s11, 1.0);
    assert_trace_mean("precision[0,0]", &w00, 4.0);
    assert_trace_mean("precision[0,1]", &w01, 0.0);
    assert_trace_mean("precision[1,1]", &w11, 4.0);
    assert_trace_mean("precision[0,0]^2", &sq(&w00), 24.0);
}
