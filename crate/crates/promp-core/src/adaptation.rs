//! Conditioning operators: adapt a learned movement primitive to joint-space
//! or task-space targets without retraining.
//!
//! All operators are pure; the input model is never modified. Joint-space
//! conditioning is a closed-form Gaussian update of the weight distribution.
//! Task-space conditioning first builds a Gaussian joint-space target by
//! Laplace-approximating the compromise between the learned distribution and
//! the task goal, then reuses the joint-space operator.

use core::f64::consts::PI;

use nalgebra::DVector;

use crate::basis::Order;
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::kinematics::ForwardKinematics;
use crate::linalg::{self, SpdFactor};
use crate::model::ProMP;

/// Desired joint value or joint distribution at one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTarget {
    pub z: f64,
    pub order: Order,
    pub value: TargetValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetValue {
    Exact(DVector<f64>),
    Distribution(GaussianState),
}

impl JointTarget {
    pub fn exact(z: f64, order: Order, value: DVector<f64>) -> Self {
        JointTarget {
            z,
            order,
            value: TargetValue::Exact(value),
        }
    }

    pub fn gaussian(z: f64, order: Order, dist: GaussianState) -> Self {
        JointTarget {
            z,
            order,
            value: TargetValue::Distribution(dist),
        }
    }
}

/// Desired task-space distribution at one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTarget {
    pub z: f64,
    pub dist: GaussianState,
}

/// Condition on an exact joint-space observation at phase `target.z`.
pub fn condition_joint(p: &ProMP, target: &JointTarget) -> Result<ProMP> {
    match &target.value {
        TargetValue::Exact(y) => condition_point(p, target.z, target.order, y),
        TargetValue::Distribution(d) => condition_gaussian(p, target.z, target.order, d),
    }
}

/// Posterior weight distribution given `y(z) = value` observed through the
/// model's own noise, with no artificial accuracy matrix.
///
/// Computed in covariance form: only the D x D innovation matrix is
/// factorized, which keeps the operator fast at large K*D and works for
/// merely positive semi-definite weight covariances. Algebraically this is
/// the same update as adding `Phi^T sigma_y^-1 Phi` to the weight precision.
pub fn condition_point(p: &ProMP, z: f64, order: Order, value: &DVector<f64>) -> Result<ProMP> {
    if value.len() != p.dof() {
        return Err(Error::input("target dimension does not match model"));
    }
    let phi = p.basis().block_feature_matrix(z, p.dof(), order)?;
    // cross = sigma_w Phi^T, innovation = Phi sigma_w Phi^T + sigma_y.
    let cross = p.sigma_w() * phi.transpose();
    let mut innovation = &phi * &cross + p.sigma_y();
    linalg::symmetrize(&mut innovation);
    let fi = SpdFactor::new(&innovation, "conditioning innovation covariance")?;

    let mean = p.mu_w() + &cross * fi.solve_vec(&(value - &phi * p.mu_w()));
    let mut cov = p.sigma_w() - &cross * fi.solve_mat(&cross.transpose());
    linalg::symmetrize(&mut cov);
    p.with_weights(mean, cov)
}

/// Condition on an uncertain joint-space target `N(mu_q, sigma_q)`: the
/// exact-observation posterior marginalized over the target distribution.
pub fn condition_gaussian(
    p: &ProMP,
    z: f64,
    order: Order,
    target: &GaussianState,
) -> Result<ProMP> {
    if target.dim() != p.dof() {
        return Err(Error::input("target dimension does not match model"));
    }
    let phi = p.basis().block_feature_matrix(z, p.dof(), order)?;
    let cross = p.sigma_w() * phi.transpose();
    let mut innovation = &phi * &cross + p.sigma_y();
    linalg::symmetrize(&mut innovation);
    let fi = SpdFactor::new(&innovation, "conditioning innovation covariance")?;

    let mean = p.mu_w() + &cross * fi.solve_vec(&(target.mean() - &phi * p.mu_w()));

    // Exact-target posterior covariance plus the pushed-through target
    // uncertainty. The precision-form gain T_w Phi^T sigma_y^-1 equals
    // sigma_w Phi^T M^-1 with M the innovation covariance, so the inflation
    // term is cross M^-1 sigma_q M^-1 cross^T.
    let t_omega = p.sigma_w() - &cross * fi.solve_mat(&cross.transpose());
    let gain = &cross * fi.solve_mat(&fi.solve_mat(target.cov()).transpose());
    let mut cov = t_omega + &gain * cross.transpose();
    linalg::symmetrize(&mut cov);
    p.with_weights(mean, cov)
}

/// Gaussian approximation of the end-effector distribution at phase `z`:
/// the joint marginal pushed through the kinematics linearized at its mean.
pub fn task_distribution(p: &ProMP, z: f64, fk: &dyn ForwardKinematics) -> Result<GaussianState> {
    if fk.input_dim() != p.dof() {
        return Err(Error::input(
            "kinematics input dimension does not match model",
        ));
    }
    let phi = p
        .basis()
        .block_feature_matrix(z, p.dof(), Order::Position)?;
    let joint_mean = &phi * p.mu_w();
    let mean = fk.evaluate(&joint_mean)?;
    let g = fk.jacobian(&joint_mean)? * &phi;
    let mut cov = &g * p.sigma_w() * g.transpose();
    linalg::symmetrize(&mut cov);
    GaussianState::new(mean, cov)
}

#[derive(Debug, Clone)]
pub struct LaplaceOptions {
    /// Stationarity threshold on the gradient norm, relative to the
    /// objective scale.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        LaplaceOptions {
            grad_tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Diagnostics of the mode search behind task-space conditioning.
#[derive(Debug, Clone)]
pub struct LaplaceReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Condition number of the negative Hessian at the mode.
    pub hessian_condition: f64,
    /// Log of the unnormalized posterior at the mode.
    pub objective: f64,
}

/// Adapt to a task-space target: find the joint configuration that best
/// trades staying close to the learned distribution against reaching the
/// target, Gaussian-approximate the posterior there, and condition on it.
pub fn condition_task(
    p: &ProMP,
    target: &TaskTarget,
    fk: &dyn ForwardKinematics,
    opts: &LaplaceOptions,
) -> Result<(ProMP, LaplaceReport)> {
    if fk.input_dim() != p.dof() {
        return Err(Error::input(
            "kinematics input dimension does not match model",
        ));
    }
    if target.dist.dim() != fk.output_dim() {
        return Err(Error::input(
            "task target dimension does not match kinematics",
        ));
    }

    // Joint-space position marginal at the target phase: the prior of the
    // compromise objective.
    let marginal = p.marginal_at(target.z, Order::Position)?;
    let prior_prec = SpdFactor::new(marginal.cov(), "joint marginal covariance")?.inverse();
    let task_prec = SpdFactor::new(target.dist.cov(), "task target covariance")?.inverse();

    let objective = |y: &DVector<f64>| -> Result<f64> {
        let dy = y - marginal.mean();
        let r = fk.evaluate(y)? - target.dist.mean();
        Ok(-0.5 * (dy.dot(&(&prior_prec * &dy)) + r.dot(&(&task_prec * &r))))
    };

    // Negative Hessian of the objective: Gauss-Newton plus the exact
    // curvature of the kinematics when second derivatives are available.
    // Far from the mode the exact term can make it indefinite; the
    // Levenberg damping below covers that.
    let curvature_at = |y: &DVector<f64>,
                        jac: &nalgebra::DMatrix<f64>,
                        resid: &DVector<f64>|
     -> nalgebra::DMatrix<f64> {
        let mut h = &prior_prec + jac.transpose() * &task_prec * jac;
        if let Some(hessians) = fk.hessians(y) {
            let weighted = &task_prec * resid;
            for (out, hk) in hessians.iter().enumerate() {
                h += hk * weighted[out];
            }
        }
        linalg::symmetrize(&mut h);
        h
    };

    let mut y = marginal.mean().clone();
    let mut f_val = objective(&y)?;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    // Levenberg damping: zero while the quadratic model predicts well,
    // inflated toward gradient steps when it does not.
    let mut damping = 0.0_f64;

    for _ in 0..opts.max_iter {
        let jac = fk.jacobian(&y)?;
        let resid = fk.evaluate(&y)? - target.dist.mean();
        let grad = &prior_prec * (marginal.mean() - &y) - jac.transpose() * (&task_prec * &resid);
        grad_norm = grad.norm();
        let scale = 1.0 + f_val.abs();
        if grad_norm < opts.grad_tol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        // Gauss-Newton curvature for the global phase: positive definite
        // thanks to the prior precision, so damped steps always ascend. The
        // exact Hessian takes over in the polish phase near the mode.
        let mut curvature = &prior_prec + jac.transpose() * &task_prec * &jac;
        linalg::symmetrize(&mut curvature);
        let damp_unit = curvature.trace() / curvature.nrows() as f64;

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = curvature.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += damping * damp_unit;
            }
            let step = match SpdFactor::new(&damped, "Newton curvature") {
                Ok(f) => f.solve_vec(&grad),
                Err(_) => &grad * (1.0 / ((1.0 + grad_norm) * damp_unit.max(1.0))),
            };
            let candidate = &y + &step;
            match objective(&candidate) {
                Ok(v) if v > f_val => {
                    // Shrink or grow the damping by how well the quadratic
                    // model predicted the actual gain.
                    let predicted = 0.5 * step.dot(&(&step * (damping * damp_unit) + &grad));
                    let ratio = if predicted > 0.0 {
                        (v - f_val) / predicted
                    } else {
                        1.0
                    };
                    damping = if ratio > 0.75 {
                        damping / 3.0
                    } else if ratio < 0.25 {
                        (damping * 2.0).max(1e-8)
                    } else {
                        damping
                    };
                    if damping < 1e-12 {
                        damping = 0.0;
                    }
                    y = candidate;
                    f_val = v;
                    accepted = true;
                }
                _ => {
                    damping = (damping * 4.0).max(1e-8);
                }
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // Objective comparisons have hit the floating-point floor near
            // the mode; finish with a few small undamped Newton steps judged
            // by gradient decrease instead.
            break;
        }
    }

    if !converged {
        for _ in 0..8 {
            let jac = fk.jacobian(&y)?;
            let resid = fk.evaluate(&y)? - target.dist.mean();
            let grad =
                &prior_prec * (marginal.mean() - &y) - jac.transpose() * (&task_prec * &resid);
            grad_norm = grad.norm();
            if grad_norm < opts.grad_tol * (1.0 + f_val.abs()) {
                converged = true;
                break;
            }
            let curvature = curvature_at(&y, &jac, &resid);
            let Ok(f) = SpdFactor::new(&curvature, "Newton curvature") else {
                break;
            };
            let step = f.solve_vec(&grad);
            if step.norm() > 1e-3 * (1.0 + y.norm()) {
                break;
            }
            let candidate = &y + &step;
            let jac_c = fk.jacobian(&candidate)?;
            let resid_c = fk.evaluate(&candidate)? - target.dist.mean();
            let grad_c = &prior_prec * (marginal.mean() - &candidate)
                - jac_c.transpose() * (&task_prec * &resid_c);
            if grad_c.norm() >= grad_norm {
                break;
            }
            iterations += 1;
            y = candidate;
            f_val = objective(&y)?;
        }
    }

    if !converged {
        let jac = fk.jacobian(&y)?;
        let resid = fk.evaluate(&y)? - target.dist.mean();
        let grad = &prior_prec * (marginal.mean() - &y) - jac.transpose() * (&task_prec * &resid);
        grad_norm = grad.norm();
        if grad_norm >= opts.grad_tol * (1.0 + f_val.abs()) {
            return Err(Error::Adaptation {
                iterations,
                gradient_norm: grad_norm,
                best_iterate: y,
            });
        }
    }

    // Negative Hessian at the mode.
    let jac = fk.jacobian(&y)?;
    let resid = fk.evaluate(&y)? - target.dist.mean();
    let lambda_q = curvature_at(&y, &jac, &resid);
    let eig = lambda_q.clone().symmetric_eigen();
    let min_ev = eig.eigenvalues.min();
    let max_ev = eig.eigenvalues.max();
    if min_ev <= 0.0 {
        return Err(Error::numerical_with(
            "negative Hessian at the mode is not positive definite (saddle point)",
            linalg::diagnostics_of(&lambda_q, None),
        ));
    }
    let fq = SpdFactor::new(&lambda_q, "Laplace precision")?;
    let mut sigma_q = fq.inverse();
    linalg::symmetrize(&mut sigma_q);

    let conditioned = condition_gaussian(
        p,
        target.z,
        Order::Position,
        &GaussianState::new(y, sigma_q)?,
    )?;
    let report = LaplaceReport {
        iterations,
        gradient_norm: grad_norm,
        hessian_condition: max_ev / min_ev,
        objective: f_val - 0.5 * (p.dof() as f64) * libm::log(2.0 * PI),
    };
    Ok((conditioned, report))
}
