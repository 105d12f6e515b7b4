//! Trainer behavior on synthetic data: exact-vs-approximate EM agreement on
//! clean data, the exact trainer's edge under missing observations and
//! noise, and MAP shrinking toward MLE as data grows.

use nalgebra::{DMatrix, DVector};
use promp_core::model::sample_demonstrations;
use promp_core::training::{em_train, em_train_approx, EmOptions, NIWPrior, TrainingMode};
use promp_core::{BasisConfig, Demonstration, ProMP};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn generator(dof: usize, noise: f64, seed: u64) -> ProMP {
    let basis = BasisConfig::standard();
    let dim = basis.k() * dof;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| randn(&mut rng));
    let sigma_w = &a * a.transpose() / dim as f64 * 0.3 + DMatrix::identity(dim, dim) * 0.02;
    let mu = DVector::from_fn(dim, |i, _| ((i + 1) as f64 * 0.9).sin());
    ProMP::new(
        basis,
        dof,
        mu,
        sigma_w,
        DMatrix::identity(dof, dof) * noise * noise,
    )
    .unwrap()
}

#[test]
fn exact_and_approx_agree_on_clean_complete_data() {
    // Negligible sensor noise, complete densely sampled trajectories and a
    // well-conditioned basis: the E-step uncertainty is tiny in every
    // direction, so both trainers settle on the same parameters. (With a
    // collinear basis the point-estimate trainer is biased along the
    // sloppy directions no matter how much data there is; that regime is
    // covered by the missing-data comparison below.)
    let basis = BasisConfig::new(vec![], 1.0, 1).unwrap();
    let dof = 2;
    let dim = basis.k() * dof;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = DMatrix::from_fn(dim, dim, |_, _| randn(&mut rng));
    let sigma_w = &a * a.transpose() / dim as f64 * 0.3 + DMatrix::identity(dim, dim) * 0.02;
    let mu = DVector::from_fn(dim, |i, _| ((i + 1) as f64 * 0.9).sin());
    let gen = ProMP::new(
        basis.clone(),
        dof,
        mu,
        sigma_w,
        DMatrix::identity(dof, dof) * 1e-8,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let demos = sample_demonstrations(&gen, 12, 120, &mut rng).unwrap();
    let opts = EmOptions {
        tol: 1e-9,
        max_iter: 300,
        ..EmOptions::default()
    };
    let (exact, _) = em_train(&demos, &basis, dof, &TrainingMode::Mle, &opts).unwrap();
    let (approx, _) = em_train_approx(&demos, &basis, dof, &TrainingMode::Mle, &opts).unwrap();

    let mu_rel = (exact.mu_w() - approx.mu_w()).norm() / approx.mu_w().norm();
    let cov_rel = (exact.sigma_w() - approx.sigma_w()).norm() / approx.sigma_w().norm();
    assert!(mu_rel < 1e-6, "mean relative gap {mu_rel}");
    assert!(cov_rel < 1e-6, "covariance relative gap {cov_rel}");
}

#[test]
fn identical_initialization_gives_identical_starting_objective() {
    let gen = generator(2, 1e-4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let demos = sample_demonstrations(&gen, 6, 40, &mut rng).unwrap();
    let basis = BasisConfig::standard();
    let opts = EmOptions {
        max_iter: 3,
        min_iter: 1,
        ..EmOptions::default()
    };
    let (_, exact) = em_train(&demos, &basis, 2, &TrainingMode::Mle, &opts).unwrap();
    let (_, approx) = em_train_approx(&demos, &basis, 2, &TrainingMode::Mle, &opts).unwrap();
    // Same parameters before the first M-step, so the same likelihood.
    assert_eq!(exact.initial_objective, approx.initial_objective);
}

/// Delete a fraction of the samples from each demonstration, keeping the
/// phase extent (missing observations, not shorter movements).
fn delete_samples(demos: &[Demonstration], keep: f64, rng: &mut ChaCha8Rng) -> Vec<Demonstration> {
    demos
        .iter()
        .map(|d| {
            let mut kept: Vec<bool> = (0..d.len()).map(|_| rng.random_bool(keep)).collect();
            // Never drop below two samples.
            kept[0] = true;
            let last = kept.len() - 1;
            kept[last] = true;
            d.retain_samples(|i| kept[i])
        })
        .collect()
}

#[test]
fn exact_em_beats_approximation_under_missing_noisy_data() {
    let gen = generator(3, 0.05, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let full = sample_demonstrations(&gen, 20, 40, &mut rng).unwrap();
    let demos = delete_samples(&full, 0.4, &mut rng);
    let basis = BasisConfig::standard();
    let opts = EmOptions {
        max_iter: 12,
        tol: 0.0,
        ..EmOptions::default()
    };
    let (exact_model, exact) = em_train(&demos, &basis, 3, &TrainingMode::Mle, &opts).unwrap();
    let (approx_model, approx) =
        em_train_approx(&demos, &basis, 3, &TrainingMode::Mle, &opts).unwrap();

    let exact_ll = exact_model.log_marginal_likelihood(&demos).unwrap();
    let approx_ll = approx_model.log_marginal_likelihood(&demos).unwrap();
    assert!(
        exact_ll >= approx_ll,
        "exact {exact_ll} should beat approx {approx_ll}"
    );

    // The exact trainer keeps improving after the first iteration by more
    // than the approximation does.
    let gain = |trace: &[f64]| trace.last().unwrap() - trace.first().unwrap();
    assert!(gain(&exact.objective_trace) > gain(&approx.objective_trace));

    // EM ascent for the exact trainer.
    for pair in exact.objective_trace.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-8 * pair[0].abs().max(1.0));
    }
}

#[test]
fn objective_trace_matches_independent_likelihood_evaluation() {
    // The trace reported by the trainer must be the same quantity the
    // model's own likelihood evaluation computes at the final parameters.
    let gen = generator(3, 0.05, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let full = sample_demonstrations(&gen, 10, 30, &mut rng).unwrap();
    let demos = delete_samples(&full, 0.5, &mut rng);
    let basis = BasisConfig::standard();
    let opts = EmOptions {
        tol: 0.0,
        max_iter: 6,
        ..EmOptions::default()
    };
    let (exact_model, exact) = em_train(&demos, &basis, 3, &TrainingMode::Mle, &opts).unwrap();
    let direct = exact_model.log_marginal_likelihood(&demos).unwrap();
    let traced = *exact.objective_trace.last().unwrap();
    assert!(
        (direct - traced).abs() <= 1e-9 * direct.abs().max(1.0),
        "trace {traced} vs direct {direct}"
    );

    let (approx_model, approx) =
        em_train_approx(&demos, &basis, 3, &TrainingMode::Mle, &opts).unwrap();
    let direct = approx_model.log_marginal_likelihood(&demos).unwrap();
    let traced = *approx.objective_trace.last().unwrap();
    assert!(
        (direct - traced).abs() <= 1e-9 * direct.abs().max(1.0),
        "approx trace {traced} vs direct {direct}"
    );
}

#[test]
fn map_converges_to_mle_with_growing_data() {
    let gen = generator(2, 1e-3, 7);
    let basis = BasisConfig::standard();
    let dim = basis.k() * 2;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool = sample_demonstrations(&gen, 200, 30, &mut rng).unwrap();

    let opts = EmOptions::default();
    let mut gaps = Vec::new();
    for &n in &[20usize, 50, 200] {
        let demos = &pool[..n];
        let (map, _) = em_train(
            demos,
            &basis,
            2,
            &TrainingMode::Map(NIWPrior::default_for(dim)),
            &opts,
        )
        .unwrap();
        let (mle, _) = em_train(demos, &basis, 2, &TrainingMode::Mle, &opts).unwrap();
        let gap = (map.sigma_w() - mle.sigma_w()).norm() / mle.sigma_w().norm();
        gaps.push(gap);
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps {gaps:?}");
    assert!(gaps[2] < 0.1, "final gap {}", gaps[2]);
}
