//! Checks the linear-time likelihood and E-step against brute-force dense
//! Gaussian algebra on instances small enough to build the full joint
//! covariance.

use nalgebra::{DMatrix, DVector};
use promp_core::training::e_step;
use promp_core::{BasisConfig, Demonstration, Order, ProMP};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn random_spd(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| randn(rng));
    &a * a.transpose() * (scale / dim as f64) + DMatrix::identity(dim, dim) * 0.1 * scale
}

/// Stack the per-sample block feature matrices into the full design matrix.
fn stacked_design(p: &ProMP, phases: &[f64]) -> DMatrix<f64> {
    let d = p.dof();
    let mut out = DMatrix::zeros(phases.len() * d, p.dim());
    for (i, &z) in phases.iter().enumerate() {
        let phi = p
            .basis()
            .block_feature_matrix(z, d, Order::Position)
            .unwrap();
        out.view_mut((i * d, 0), (d, p.dim())).copy_from(&phi);
    }
    out
}

fn dense_log_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let chol = cov.clone().cholesky().expect("dense covariance is PD");
    let diff = x - mean;
    let maha = diff.dot(&chol.solve(&diff));
    let logdet = 2.0 * chol.l_dirty().diagonal().map(|v| v.ln()).sum();
    -0.5 * (maha + logdet + n * (2.0 * std::f64::consts::PI).ln())
}

fn small_instance(seed: u64) -> (ProMP, Demonstration) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // K = 2 (degree-1 polynomial), D = 1, T = 3.
    let basis = BasisConfig::new(vec![], 1.0, 1).unwrap();
    let mu = DVector::from_fn(2, |_, _| randn(&mut rng));
    let sigma_w = random_spd(2, 1.0, &mut rng);
    let sigma_y = DMatrix::from_row_slice(1, 1, &[0.2]);
    let p = ProMP::new(basis, 1, mu, sigma_w, sigma_y).unwrap();
    let times = vec![0.0, 0.4, 1.0];
    let joints = DMatrix::from_fn(3, 1, |_, _| randn(&mut rng));
    let demo = Demonstration::new(times, joints).unwrap();
    (p, demo)
}

#[test]
fn marginal_likelihood_matches_dense_joint_gaussian() {
    for seed in 0..5 {
        let (p, demo) = small_instance(seed);
        let phases = demo.phases();
        let design = stacked_design(&p, &phases);
        let mean = &design * p.mu_w();
        let mut cov = &design * p.sigma_w() * design.transpose();
        for t in 0..phases.len() {
            cov[(t, t)] += p.sigma_y()[(0, 0)];
        }
        let y = DVector::from_fn(phases.len(), |i, _| demo.joints()[(i, 0)]);
        let dense = dense_log_gaussian(&y, &mean, &cov);
        let fast = p
            .log_marginal_likelihood(std::slice::from_ref(&demo))
            .unwrap();
        assert!(
            (fast - dense).abs() < 1e-8,
            "seed {seed}: fast {fast} vs dense {dense}"
        );
    }
}

#[test]
fn e_step_matches_dense_bayes_conditioning() {
    for seed in 10..15 {
        let (p, demo) = small_instance(seed);
        let phases = demo.phases();
        let design = stacked_design(&p, &phases);
        let y = DVector::from_fn(phases.len(), |i, _| demo.joints()[(i, 0)]);

        // Joint Gaussian over (w, y): condition on the observed block.
        let cross = p.sigma_w() * design.transpose();
        let mut y_cov = &design * &cross;
        for t in 0..phases.len() {
            y_cov[(t, t)] += p.sigma_y()[(0, 0)];
        }
        let y_chol = y_cov.cholesky().unwrap();
        let innov = &y - &design * p.mu_w();
        let dense_mean = p.mu_w() + &cross * y_chol.solve(&innov);
        let dense_cov = p.sigma_w() - &cross * y_chol.solve(&cross.transpose());

        let post = e_step(&p, &demo).unwrap();
        assert!(
            (post.mean() - &dense_mean).abs().max() < 1e-8,
            "seed {seed}"
        );
        assert!((post.cov() - &dense_cov).abs().max() < 1e-8, "seed {seed}");
    }
}

#[test]
fn velocity_marginal_matches_finite_difference_of_mean() {
    // The velocity marginal's mean must be the phase derivative of the
    // position mean curve.
    let (p, _) = small_instance(42);
    let z = 0.3;
    let h = 1e-6;
    let up = p.marginal_at(z + h, Order::Position).unwrap();
    let down = p.marginal_at(z - h, Order::Position).unwrap();
    let numeric = (up.mean() - down.mean()) / (2.0 * h);
    let vel = p.marginal_at(z, Order::Velocity).unwrap();
    assert!((vel.mean() - numeric).abs().max() < 1e-6);
}
