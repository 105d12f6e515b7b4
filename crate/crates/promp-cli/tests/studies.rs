//! Study-level behavior: the reproducible parts of the stability figure,
//! bootstrap intervals, determinism, and the large-N consistency limit.

use promp_cli::experiments::{
    self, bootstrap_rates, correlated_promp, CondnumConfig, EmCurveConfig,
};
use promp_core::model::sample_demonstrations;
use promp_core::training::{em_train, EmOptions, NIWPrior, TrainingMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The stability phenomenology that survives desk-scale synthesis: once the
/// per-joint blocks are identified (N > K), the MAP covariance is orders of
/// magnitude better conditioned than MLE, and it is never worse at any N.
#[test]
fn condition_number_study_identified_regime() {
    let cfg = CondnumConfig {
        n_max: 40,
        ..CondnumConfig::default()
    };
    let study = experiments::condnum_study(&cfg, 7).unwrap();
    let map = study.column("log_cond_map").unwrap();
    let mle = study.column("log_cond_mle").unwrap();

    for i in 0..35 {
        assert!(
            mle[i] > map[i],
            "MAP must never be worse conditioned than MLE (N={})",
            i + 1
        );
    }
    for i in 5..35 {
        assert!(
            mle[i] - map[i] >= 5.0,
            "identified regime needs a >= 5 nat gap (N={}, gap {:.2})",
            i + 1,
            mle[i] - map[i]
        );
    }
    // Plateau once the blocks are comfortably identified.
    for i in 11..40 {
        assert!(
            (map[i] - map[39]).abs() <= 1.5,
            "MAP log condition number still moving at N={}: {:.2} vs {:.2}",
            i + 1,
            map[i],
            map[39]
        );
    }
    // Least squares only becomes usable above KD demonstrations.
    let ls = study.column("log_cond_ls_lambda0").unwrap();
    assert!(ls[..35].iter().all(|v| v.is_infinite()));
    assert!(ls[35].is_finite());
}

/// Re-synthesizing the reported success data as Bernoulli outcomes at the
/// same rate reproduces the published 90% interval.
#[test]
fn bootstrap_interval_matches_reported_range() {
    // 70% success over a large trial pool, resampled as 5000 batches of 50.
    let outcomes: Vec<bool> = (0..200).map(|i| i % 10 < 7).collect();
    let result = bootstrap_rates(&outcomes, 5000, 50, 9).unwrap();
    assert!((result.mean - 0.70).abs() < 0.01, "mean {}", result.mean);
    assert!(
        (result.interval90.0 - 0.60).abs() <= 0.02,
        "lower edge {}",
        result.interval90.0
    );
    assert!(
        (result.interval90.1 - 0.80).abs() <= 0.02,
        "upper edge {}",
        result.interval90.1
    );
}

/// Every study is a pure function of its configuration and seed.
#[test]
fn studies_are_deterministic() {
    let cfg = EmCurveConfig {
        iterations: 4,
        ..EmCurveConfig::default()
    };
    let a = experiments::em_curve_study(&cfg, 3).unwrap();
    let b = experiments::em_curve_study(&cfg, 3).unwrap();
    assert_eq!(a.rows, b.rows);

    let outcomes = vec![true, false, true, true];
    let x = bootstrap_rates(&outcomes, 100, 10, 4).unwrap();
    let y = bootstrap_rates(&outcomes, 100, 10, 4).unwrap();
    assert_eq!(x.histogram, y.histogram);
}

/// With enough data the MAP estimates recover the adversarial correlated
/// generator: every normalized error drops below a tenth of its single-
/// demonstration value, correlations included.
#[test]
fn map_recovers_correlated_generator_at_large_n() {
    let gen = correlated_promp(1e-3, 42);
    let basis = gen.basis().clone();
    let dof = gen.dof();
    let k = basis.k();
    let dim = k * dof;
    let prior = NIWPrior::default_for(dim);
    let opts = EmOptions::default();

    let errors = |n: usize, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let demos = sample_demonstrations(&gen, n, 100, &mut rng).unwrap();
        let (fit, _) = em_train(
            &demos,
            &basis,
            dof,
            &TrainingMode::Map(prior.clone()),
            &opts,
        )
        .unwrap();
        let diff = fit.sigma_w() - gen.sigma_w();
        let mut block = 0.0;
        let mut corr = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                if i / k == j / k {
                    block += diff[(i, j)] * diff[(i, j)];
                } else {
                    corr += diff[(i, j)] * diff[(i, j)];
                }
            }
        }
        ((fit.mu_w() - gen.mu_w()).norm(), block.sqrt(), corr.sqrt())
    };

    // Baseline: average single-demonstration error over a few draws.
    let mut base = (0.0, 0.0, 0.0);
    let reps = 4;
    for r in 0..reps {
        let e = errors(1, 100 + r);
        base = (base.0 + e.0, base.1 + e.1, base.2 + e.2);
    }
    let base = (
        base.0 / reps as f64,
        base.1 / reps as f64,
        base.2 / reps as f64,
    );
    let big = errors(1600, 43);
    assert!(big.0 / base.0 < 0.1, "mean error ratio {}", big.0 / base.0);
    assert!(big.1 / base.1 < 0.1, "block error ratio {}", big.1 / base.1);
    assert!(
        big.2 / base.2 < 0.1,
        "correlation error ratio {}",
        big.2 / base.2
    );
}

/// The task-space operator embeds the joint-space one, so it can never be
/// the faster of the two.
#[test]
fn joint_conditioning_is_faster_than_task_conditioning() {
    let sizes = [(5, 7), (5, 28), (5, 70)];
    let study = experiments::latency_bench(&sizes, 20, 11).unwrap();
    let joint = study.column("joint_mean_ms").unwrap();
    let task = study.column("task_mean_ms").unwrap();
    for i in 0..sizes.len() {
        assert!(
            joint[i] < task[i],
            "joint {} ms vs task {} ms at size {:?}",
            joint[i],
            task[i],
            sizes[i]
        );
    }
}
