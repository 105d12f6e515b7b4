//! Trainers: exact EM for MAP or MLE estimation, the Dirac-delta
//! approximated EM, and the per-demonstration least-squares baseline.
//!
//! The E-step computes, for each demonstration, the Gaussian posterior over
//! its weight vector given the current parameters. The M-step then updates
//! the weight mean, weight covariance and observation noise in closed form;
//! with a Normal-Inverse-Wishart prior the covariance update blends the full
//! maximum-likelihood estimate with its block-diagonal (independent-joints)
//! restriction, which is what keeps small-sample estimates well conditioned.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisConfig;
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{self, SpdFactor};
use crate::model::{DemoDesign, Demonstration, ProMP};

/// How the inverse-Wishart scale matrix is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum S0Rule {
    /// Rebuild the scale each M-step as `(v0 + KD + 1) * blockdiag(sigma_mle)`,
    /// so the prior pulls toward independent joints scaled by the data.
    Adaptive,
    /// Fixed scale matrix.
    Explicit(DMatrix<f64>),
}

/// Normal-Inverse-Wishart prior over the weight mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NIWPrior {
    /// Pseudo-count for the mean; zero makes the mean prior non-informative.
    pub k0: f64,
    pub m0: DVector<f64>,
    /// Inverse-Wishart degrees of freedom. `dim + 1` is the smallest value
    /// giving a proper prior.
    pub v0: f64,
    pub s0: S0Rule,
}

impl NIWPrior {
    /// The experimental configuration used throughout: non-informative mean
    /// prior (`k0 = 0`), `v0 = dim + 1`, adaptive scale.
    pub fn default_for(dim: usize) -> Self {
        NIWPrior {
            k0: 0.0,
            m0: DVector::zeros(dim),
            v0: (dim + 1) as f64,
            s0: S0Rule::Adaptive,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.k0 < 0.0 || !self.k0.is_finite() {
            return Err(Error::input("k0 must be finite and non-negative"));
        }
        if self.m0.len() != dim {
            return Err(Error::input("m0 length must equal K * D"));
        }
        if !self.v0.is_finite() {
            return Err(Error::input("v0 must be finite"));
        }
        if let S0Rule::Explicit(s0) = &self.s0 {
            if s0.shape() != (dim, dim) {
                return Err(Error::input("S0 must be (K*D) x (K*D)"));
            }
            if !linalg::is_symmetric(s0, 1e-9) {
                return Err(Error::input("S0 must be symmetric"));
            }
        }
        Ok(())
    }
}

/// Estimation target of the EM trainers.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingMode {
    /// Maximum a posteriori under a Normal-Inverse-Wishart prior.
    Map(NIWPrior),
    /// Plain maximum likelihood.
    Mle,
    /// Maximum likelihood with the weight covariance forced block-diagonal
    /// after every M-step (the independent-joints baseline).
    MleBlockDiag,
}

/// Explicit starting point for the EM iteration.
///
/// The weight covariance is given as a *precision* so that a flat start
/// (zero precision, the ridge parameter at zero) is representable.
#[derive(Debug, Clone)]
pub struct EmInit {
    pub mu_w: DVector<f64>,
    pub weight_precision: DMatrix<f64>,
    pub sigma_y: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    /// Relative objective-change threshold for convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Convergence is never declared before this many iterations.
    pub min_iter: usize,
    /// Restrict the observation noise to its diagonal after each update.
    pub diagonal_sigma_y: bool,
    /// Override of the standard start `mu_w = 0`, `sigma_w = I`, `sigma_y = I`.
    pub init: Option<EmInit>,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-6,
            max_iter: 200,
            min_iter: 3,
            diagonal_sigma_y: false,
            init: None,
        }
    }
}

/// What a trainer did, alongside the model it produced.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// Log likelihood at the initial parameters, when they admit one (a flat
    /// weight-precision start does not).
    pub initial_objective: Option<f64>,
    /// Objective after each M-step: log posterior for MAP training, log
    /// likelihood otherwise.
    pub objective_trace: Vec<f64>,
    /// E-step outputs (weight posterior per demonstration) of the final
    /// iteration. Point-estimate trainers report zero-covariance posteriors.
    pub per_demo_posteriors: Vec<GaussianState>,
    /// Maximum-likelihood weight covariance from the final M-step.
    pub last_sigma_w_mle: Option<DMatrix<f64>>,
    /// Fewer demonstrations than weight dimensions: the empirical weight
    /// covariance cannot have full rank.
    pub rank_deficient: bool,
}

/// Posterior over one demonstration's weight vector under the current model.
///
/// Demonstrations with no samples yield the prior back; missing observations
/// are simply absent from the accumulated sums.
pub fn e_step(p: &ProMP, demo: &Demonstration) -> Result<GaussianState> {
    if demo.dof() != p.dof() {
        return Err(Error::input("demonstration dimension does not match model"));
    }
    let lam_w = SpdFactor::new(p.sigma_w(), "weight covariance")?.inverse();
    let prec_y = SpdFactor::new(p.sigma_y(), "observation noise")?.inverse();
    let design = DemoDesign::new(p.basis(), demo)?;
    let (mean, cov) = weight_posterior(&design, p.mu_w(), &lam_w, &prec_y)?;
    GaussianState::new(mean, cov)
}

fn weight_posterior(
    design: &DemoDesign,
    mu_w: &DVector<f64>,
    lam_w: &DMatrix<f64>,
    prec_y: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a = lam_w + prec_y.kronecker(&design.gram);
    let fa = SpdFactor::new(&a, "posterior weight precision")?;
    let b = lam_w * mu_w + design.stacked_projection(prec_y);
    let mean = fa.solve_vec(&b);
    let mut cov = fa.inverse();
    linalg::symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Train with exact EM (Algorithm with full E-step posteriors).
pub fn em_train(
    demos: &[Demonstration],
    basis: &BasisConfig,
    dof: usize,
    mode: &TrainingMode,
    opts: &EmOptions,
) -> Result<(ProMP, TrainReport)> {
    run_em(demos, basis, dof, mode, opts, true)
}

/// Train with the Dirac-delta approximated E-step: only the posterior means
/// survive, every posterior-covariance term of the M-step vanishes.
pub fn em_train_approx(
    demos: &[Demonstration],
    basis: &BasisConfig,
    dof: usize,
    mode: &TrainingMode,
    opts: &EmOptions,
) -> Result<(ProMP, TrainReport)> {
    run_em(demos, basis, dof, mode, opts, false)
}

fn run_em(
    demos: &[Demonstration],
    basis: &BasisConfig,
    dof: usize,
    mode: &TrainingMode,
    opts: &EmOptions,
    exact_e_step: bool,
) -> Result<(ProMP, TrainReport)> {
    if demos.is_empty() {
        return Err(Error::input("need at least one demonstration"));
    }
    if dof == 0 {
        return Err(Error::input("degree-of-freedom count must be at least 1"));
    }
    for demo in demos {
        if demo.dof() != dof {
            return Err(Error::input(
                "demonstrations disagree on the number of joints",
            ));
        }
    }
    let dim = basis.k() * dof;
    if let TrainingMode::Map(prior) = mode {
        prior.validate(dim)?;
    }

    let n = demos.len();
    let designs: Vec<DemoDesign> = demos
        .iter()
        .map(|d| DemoDesign::new(basis, d))
        .collect::<Result<_>>()?;
    let total_samples: usize = designs.iter().map(|d| d.samples).sum();
    if total_samples == 0 {
        return Err(Error::input("demonstrations contain no samples"));
    }

    let mut mu = DVector::zeros(dim);
    let mut prec_w = DMatrix::identity(dim, dim);
    let mut sigma_y = DMatrix::identity(dof, dof);
    if let Some(init) = &opts.init {
        if init.mu_w.len() != dim
            || init.weight_precision.shape() != (dim, dim)
            || init.sigma_y.shape() != (dof, dof)
        {
            return Err(Error::input("initialization dimensions do not match model"));
        }
        mu = init.mu_w.clone();
        prec_w = init.weight_precision.clone();
        sigma_y = init.sigma_y.clone();
    }

    // The objective at the starting point, when the precision inverts.
    let mut sy_factor = SpdFactor::new(&sigma_y, "observation noise")?;
    let mut prec_y = sy_factor.inverse();
    let initial_objective = match SpdFactor::new(&prec_w, "initial weight precision") {
        Ok(f) => {
            let sigma_w0 = f.inverse();
            let sw0 = SpdFactor::new(&sigma_w0, "initial weight covariance")?;
            Some(dataset_log_likelihood(
                &designs, &mu, &sw0, &sy_factor, &prec_y, dof,
            )?)
        }
        Err(_) => None,
    };

    let mut sigma_w = DMatrix::zeros(dim, dim);
    let mut trace: Vec<f64> = Vec::new();
    let mut posteriors: Vec<GaussianState> = Vec::new();
    let mut last_sigma_mle = None;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;

        // E-step.
        let mut means: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut covs: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        for design in &designs {
            let (m, s) =
                weight_posterior(design, &mu, &prec_w, &prec_y).map_err(|e| e.at_iteration(it))?;
            means.push(m);
            covs.push(s);
        }

        // M-step: mean.
        let mut mu_mle = DVector::zeros(dim);
        for m in &means {
            mu_mle += m;
        }
        mu_mle /= n as f64;
        mu = match mode {
            TrainingMode::Map(prior) if prior.k0 > 0.0 => {
                (&prior.m0 * prior.k0 + &mu_mle * n as f64) / (n as f64 + prior.k0)
            }
            _ => mu_mle.clone(),
        };

        // M-step: weight covariance.
        let mut sigma_mle = DMatrix::zeros(dim, dim);
        for (i, m) in means.iter().enumerate() {
            let dev = m - &mu;
            sigma_mle.syger(1.0 / n as f64, &dev, &dev, 1.0);
            if exact_e_step {
                sigma_mle += &covs[i] / n as f64;
            }
        }
        sigma_mle.fill_upper_triangle_with_lower_triangle();

        sigma_w = match mode {
            TrainingMode::Map(prior) => {
                let s0 = match &prior.s0 {
                    S0Rule::Adaptive => {
                        linalg::block_diagonal_part(&sigma_mle, dof, basis.k())
                            * (prior.v0 + dim as f64 + 1.0)
                    }
                    S0Rule::Explicit(s0) => s0.clone(),
                };
                (s0 + &sigma_mle * n as f64) / (n as f64 + prior.v0 + dim as f64 + 1.0)
            }
            TrainingMode::Mle => sigma_mle.clone(),
            TrainingMode::MleBlockDiag => linalg::block_diagonal_part(&sigma_mle, dof, basis.k()),
        };
        linalg::symmetrize(&mut sigma_w);

        // M-step: observation noise from residuals, plus the propagated
        // posterior covariance for the exact E-step.
        let mut noise = DMatrix::zeros(dof, dof);
        for (i, design) in designs.iter().enumerate() {
            accumulate_noise(
                &mut noise,
                design,
                demos[i].joints(),
                &means[i],
                exact_e_step.then_some(&covs[i]),
                basis.k(),
            );
        }
        noise /= total_samples as f64;
        if opts.diagonal_sigma_y {
            let diag = noise.diagonal();
            noise = DMatrix::from_diagonal(&diag);
        }
        linalg::symmetrize(&mut noise);
        sigma_y = noise;

        // Refresh factorizations and evaluate the objective.
        let sw_factor =
            SpdFactor::new(&sigma_w, "weight covariance").map_err(|e| e.at_iteration(it))?;
        prec_w = sw_factor.inverse();
        sy_factor =
            SpdFactor::new(&sigma_y, "observation noise").map_err(|e| e.at_iteration(it))?;
        prec_y = sy_factor.inverse();

        let mut objective =
            dataset_log_likelihood(&designs, &mu, &sw_factor, &sy_factor, &prec_y, dof)?;
        if let TrainingMode::Map(prior) = mode {
            let s0 = match &prior.s0 {
                S0Rule::Adaptive => {
                    linalg::block_diagonal_part(&sigma_mle, dof, basis.k())
                        * (prior.v0 + dim as f64 + 1.0)
                }
                S0Rule::Explicit(s0) => s0.clone(),
            };
            objective += log_niw_prior(&mu, &prec_w, &sw_factor, prior, &s0)?;
        }

        posteriors = means
            .iter()
            .zip(covs.iter())
            .map(|(m, s)| {
                let cov = if exact_e_step {
                    s.clone()
                } else {
                    DMatrix::zeros(dim, dim)
                };
                GaussianState::new(m.clone(), cov)
            })
            .collect::<Result<_>>()?;
        last_sigma_mle = Some(sigma_mle);

        let prev = trace.last().copied();
        trace.push(objective);
        if let Some(prev) = prev {
            let rel = (objective - prev).abs() / objective.abs().max(1.0);
            if it >= opts.min_iter && rel < opts.tol {
                converged = true;
                break;
            }
        }
    }

    let promp = ProMP::new(basis.clone(), dof, mu, sigma_w, sigma_y)?;
    let report = TrainReport {
        iterations,
        converged,
        initial_objective,
        objective_trace: trace,
        per_demo_posteriors: posteriors,
        last_sigma_w_mle: last_sigma_mle,
        rank_deficient: n < dim,
    };
    Ok((promp, report))
}

fn accumulate_noise(
    noise: &mut DMatrix<f64>,
    design: &DemoDesign,
    joints: &DMatrix<f64>,
    weight_mean: &DVector<f64>,
    weight_cov: Option<&DMatrix<f64>>,
    k: usize,
) {
    let dof = joints.ncols();
    for (t, phi) in design.feats.iter().enumerate() {
        let mut resid = DVector::zeros(dof);
        for d in 0..dof {
            let block = weight_mean.rows(d * k, k);
            resid[d] = joints[(t, d)] - phi.dot(&block);
        }
        noise.syger(1.0, &resid, &resid, 1.0);
    }
    if let Some(s) = weight_cov {
        // Sum over samples of Phi_t S Phi_t^T collapses to block traces
        // against the feature Gram matrix.
        for d1 in 0..dof {
            for d2 in 0..=d1 {
                let block = s.view((d1 * k, d2 * k), (k, k));
                noise[(d1, d2)] += block.dot(&design.gram);
            }
        }
    }
    noise.fill_upper_triangle_with_lower_triangle();
}

fn dataset_log_likelihood(
    designs: &[DemoDesign],
    mu: &DVector<f64>,
    sw_factor: &SpdFactor,
    sy_factor: &SpdFactor,
    prec_y: &DMatrix<f64>,
    dof: usize,
) -> Result<f64> {
    let lam_w = sw_factor.inverse();
    let mut total = 0.0;
    for design in designs {
        total += demo_log_likelihood(
            design,
            mu,
            &lam_w,
            prec_y,
            sw_factor.log_det(),
            sy_factor.log_det(),
            dof,
        )?;
    }
    Ok(total)
}

pub(crate) fn demo_log_likelihood(
    design: &DemoDesign,
    mu: &DVector<f64>,
    lam_w: &DMatrix<f64>,
    prec_y: &DMatrix<f64>,
    logdet_sw: f64,
    logdet_sy: f64,
    dof: usize,
) -> Result<f64> {
    let t = design.samples as f64;
    let a = lam_w + prec_y.kronecker(&design.gram);
    let fa = SpdFactor::new(&a, "posterior weight precision")?;
    let b = lam_w * mu + design.stacked_projection(prec_y);
    let m = fa.solve_vec(&b);
    let quad_y = prec_y.dot(&design.outer);
    let quad_mu = mu.dot(&(lam_w * mu));
    Ok(-0.5
        * (t * dof as f64 * libm::log(2.0 * PI)
            + t * logdet_sy
            + logdet_sw
            + fa.log_det()
            + quad_mu
            + quad_y
            - b.dot(&m)))
}

/// Fully normalized log density of the Normal-Inverse-Wishart prior at the
/// current parameters. With `k0 = 0` the (improper, flat) mean factor
/// contributes nothing.
fn log_niw_prior(
    mu: &DVector<f64>,
    prec_w: &DMatrix<f64>,
    sw_factor: &SpdFactor,
    prior: &NIWPrior,
    s0: &DMatrix<f64>,
) -> Result<f64> {
    let p = mu.len() as f64;
    let logdet_sw = sw_factor.log_det();
    let fs0 = SpdFactor::new(s0, "prior scale matrix")?;
    let trace_term = prec_w.dot(s0);
    let mut out = 0.5 * prior.v0 * fs0.log_det()
        - 0.5 * prior.v0 * p * libm::log(2.0)
        - ln_multigamma(0.5 * prior.v0, mu.len())
        - 0.5 * (prior.v0 + p + 1.0) * logdet_sw
        - 0.5 * trace_term;
    if prior.k0 > 0.0 {
        let dev = mu - &prior.m0;
        let quad = prior.k0 * dev.dot(&(prec_w * &dev));
        out += -0.5 * (quad + logdet_sw - p * libm::log(prior.k0) + p * libm::log(2.0 * PI));
    }
    Ok(out)
}

fn ln_multigamma(a: f64, p: usize) -> f64 {
    let mut out = 0.25 * (p * (p - 1)) as f64 * libm::log(PI);
    for j in 1..=p {
        out += libm::lgamma(a + 0.5 * (1.0 - j as f64));
    }
    out
}

/// The point-estimate baseline: ridge-fit each demonstration independently,
/// then take the empirical mean and covariance of the fits as the model.
pub fn least_squares_train(
    demos: &[Demonstration],
    basis: &BasisConfig,
    dof: usize,
    lambda: f64,
) -> Result<(ProMP, TrainReport)> {
    if demos.is_empty() {
        return Err(Error::input("need at least one demonstration"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::input(
            "ridge parameter must be finite and non-negative",
        ));
    }
    for demo in demos {
        if demo.dof() != dof {
            return Err(Error::input(
                "demonstrations disagree on the number of joints",
            ));
        }
    }
    let k = basis.k();
    let dim = k * dof;
    let n = demos.len();

    let mut fits: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut designs: Vec<DemoDesign> = Vec::with_capacity(n);
    for demo in demos {
        let design = DemoDesign::new(basis, demo)?;
        // Phi^T Phi + lambda I is block diagonal (every DoF shares the
        // features), so each DoF solves a K x K ridge system.
        let mut gram = design.gram.clone();
        for i in 0..k {
            gram[(i, i)] += lambda;
        }
        let fg = SpdFactor::new(&gram, "ridge-regularized feature Gram matrix")?;
        if fg.jitter > 0.0 {
            return Err(Error::numerical_with(
                "feature Gram matrix is singular; increase the ridge parameter \
                 or provide more samples per demonstration",
                linalg::diagnostics_of(&gram, Some(fg.jitter)),
            ));
        }
        let mut w = DVector::zeros(dim);
        for d in 0..dof {
            let rhs = DVector::from_column_slice(design.proj.column(d).as_slice());
            w.rows_mut(d * k, k).copy_from(&fg.solve_vec(&rhs));
        }
        fits.push(w);
        designs.push(design);
    }

    let mut mu = DVector::zeros(dim);
    for w in &fits {
        mu += w;
    }
    mu /= n as f64;

    let mut sigma_w = DMatrix::zeros(dim, dim);
    for w in &fits {
        let dev = w - &mu;
        sigma_w.syger(1.0 / n as f64, &dev, &dev, 1.0);
    }
    sigma_w.fill_upper_triangle_with_lower_triangle();

    let total_samples: usize = designs.iter().map(|d| d.samples).sum();
    if total_samples == 0 {
        return Err(Error::input("demonstrations contain no samples"));
    }
    let mut sigma_y = DMatrix::zeros(dof, dof);
    for (i, design) in designs.iter().enumerate() {
        accumulate_noise(&mut sigma_y, design, demos[i].joints(), &fits[i], None, k);
    }
    sigma_y /= total_samples as f64;

    let rank_deficient = n < dim;
    let posteriors: Vec<GaussianState> = fits
        .iter()
        .map(|w| Ok(GaussianState::point_mass(w.clone())))
        .collect::<Result<_>>()?;

    let promp = ProMP::new(basis.clone(), dof, mu, sigma_w.clone(), sigma_y)?;
    let mut trace = Vec::new();
    if !rank_deficient {
        if let Ok(ll) = promp.log_marginal_likelihood(demos) {
            trace.push(ll);
        }
    }
    let report = TrainReport {
        iterations: 1,
        converged: true,
        initial_objective: None,
        objective_trace: trace,
        per_demo_posteriors: posteriors,
        last_sigma_w_mle: Some(sigma_w),
        rank_deficient,
    };
    Ok((promp, report))
}
