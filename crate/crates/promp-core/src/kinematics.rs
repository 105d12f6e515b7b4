//! Forward kinematics used by the task-space operators.
//!
//! The planar n-link arm is the reference implementation: it is redundant
//! (more joints than task dimensions) which is exactly the property the
//! task-space conditioning operator has to cope with.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Deterministic map from a joint configuration to a task-space position.
pub trait ForwardKinematics {
    /// Number of joints D.
    fn input_dim(&self) -> usize;
    /// Task-space dimension X.
    fn output_dim(&self) -> usize;
    fn evaluate(&self, joints: &DVector<f64>) -> Result<DVector<f64>>;
    /// Jacobian, X x D.
    fn jacobian(&self, joints: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Second derivatives: one D x D Hessian per output coordinate, when the
    /// kinematics can supply them. `None` makes callers fall back to a
    /// Gauss-Newton curvature approximation.
    fn hessians(&self, joints: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let _ = joints;
        None
    }
}

/// Planar arm with revolute joints; the end effector lives in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArm {
    link_lengths: Vec<f64>,
}

impl PlanarArm {
    pub fn new(link_lengths: Vec<f64>) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::input("planar arm needs at least one link"));
        }
        if link_lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::input("link lengths must be positive"));
        }
        Ok(PlanarArm { link_lengths })
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    /// Total reach: the sum of the link lengths.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    fn cumulative_angles(&self, joints: &DVector<f64>) -> Vec<f64> {
        let mut acc = 0.0;
        joints
            .iter()
            .map(|&q| {
                acc += q;
                acc
            })
            .collect()
    }
}

impl ForwardKinematics for PlanarArm {
    fn input_dim(&self) -> usize {
        self.link_lengths.len()
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, joints: &DVector<f64>) -> Result<DVector<f64>> {
        if joints.len() != self.link_lengths.len() {
            return Err(Error::input(
                "joint vector length does not match link count",
            ));
        }
        let angles = self.cumulative_angles(joints);
        let mut x = 0.0;
        let mut y = 0.0;
        for (l, a) in self.link_lengths.iter().zip(&angles) {
            x += l * libm::cos(*a);
            y += l * libm::sin(*a);
        }
        Ok(DVector::from_row_slice(&[x, y]))
    }

    fn jacobian(&self, joints: &DVector<f64>) -> Result<DMatrix<f64>> {
        if joints.len() != self.link_lengths.len() {
            return Err(Error::input(
                "joint vector length does not match link count",
            ));
        }
        let d = joints.len();
        let angles = self.cumulative_angles(joints);
        // Column j sums the contributions of every link at or beyond joint j;
        // accumulate the suffix sums right-to-left.
        let mut jac = DMatrix::zeros(2, d);
        let mut sx = 0.0;
        let mut sy = 0.0;
        for j in (0..d).rev() {
            sx += self.link_lengths[j] * libm::sin(angles[j]);
            sy += self.link_lengths[j] * libm::cos(angles[j]);
            jac[(0, j)] = -sx;
            jac[(1, j)] = sy;
        }
        Ok(jac)
    }

    fn hessians(&self, joints: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        if joints.len() != self.link_lengths.len() {
            return None;
        }
        let d = joints.len();
        let angles = self.cumulative_angles(joints);
        // d²x/dq_j dq_m = -sum_{i >= max(j,m)} l_i cos(a_i), similarly for y
        // with sin; precompute the suffix sums.
        let mut cx = alloc::vec![0.0; d];
        let mut cy = alloc::vec![0.0; d];
        let mut ax = 0.0;
        let mut ay = 0.0;
        for j in (0..d).rev() {
            ax += self.link_lengths[j] * libm::cos(angles[j]);
            ay += self.link_lengths[j] * libm::sin(angles[j]);
            cx[j] = ax;
            cy[j] = ay;
        }
        let hx = DMatrix::from_fn(d, d, |j, m| -cx[j.max(m)]);
        let hy = DMatrix::from_fn(d, d, |j, m| -cy[j.max(m)]);
        Some(alloc::vec![hx, hy])
    }
}

/// A planar arm operating in the x-z plane of a three-dimensional world:
/// the lateral coordinate of the end effector is identically zero. Used by
/// the striking simulation, where the ball flies in the arm's plane.
#[derive(Debug, Clone, PartialEq)]
pub struct XzPlanarArm {
    arm: PlanarArm,
}

impl XzPlanarArm {
    pub fn new(arm: PlanarArm) -> Self {
        XzPlanarArm { arm }
    }

    pub fn planar(&self) -> &PlanarArm {
        &self.arm
    }

    pub fn reach(&self) -> f64 {
        self.arm.reach()
    }
}

impl ForwardKinematics for XzPlanarArm {
    fn input_dim(&self) -> usize {
        self.arm.input_dim()
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn evaluate(&self, joints: &DVector<f64>) -> Result<DVector<f64>> {
        let planar = self.arm.evaluate(joints)?;
        Ok(DVector::from_row_slice(&[planar[0], 0.0, planar[1]]))
    }

    fn jacobian(&self, joints: &DVector<f64>) -> Result<DMatrix<f64>> {
        let planar = self.arm.jacobian(joints)?;
        let d = self.input_dim();
        let mut jac = DMatrix::zeros(3, d);
        jac.row_mut(0).copy_from(&planar.row(0));
        jac.row_mut(2).copy_from(&planar.row(1));
        Ok(jac)
    }

    fn hessians(&self, joints: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let planar = self.arm.hessians(joints)?;
        let d = self.input_dim();
        Some(alloc::vec![
            planar[0].clone(),
            DMatrix::zeros(d, d),
            planar[1].clone(),
        ])
    }
}

/// Affine task map `x = A y + b`; its Jacobian is constant and the Taylor
/// expansion of the task distribution is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearKinematics {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl LinearKinematics {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(Error::input("offset length must match matrix rows"));
        }
        Ok(LinearKinematics { matrix, offset })
    }

    pub fn identity(dim: usize) -> Self {
        LinearKinematics {
            matrix: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }
}

impl ForwardKinematics for LinearKinematics {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn evaluate(&self, joints: &DVector<f64>) -> Result<DVector<f64>> {
        if joints.len() != self.input_dim() {
            return Err(Error::input("joint vector length does not match map"));
        }
        Ok(&self.matrix * joints + &self.offset)
    }

    fn jacobian(&self, joints: &DVector<f64>) -> Result<DMatrix<f64>> {
        if joints.len() != self.input_dim() {
            return Err(Error::input("joint vector length does not match map"));
        }
        Ok(self.matrix.clone())
    }

    fn hessians(&self, _joints: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        Some(
            (0..self.output_dim())
                .map(|_| DMatrix::zeros(self.input_dim(), self.input_dim()))
                .collect(),
        )
    }
}

/// Central-difference Jacobian, the oracle the analytic ones are checked
/// against.
pub fn numeric_jacobian(
    fk: &dyn ForwardKinematics,
    joints: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::input("finite-difference step must be positive"));
    }
    let mut jac = DMatrix::zeros(fk.output_dim(), fk.input_dim());
    for j in 0..fk.input_dim() {
        let mut plus = joints.clone();
        plus[j] += step;
        let mut minus = joints.clone();
        minus[j] -= step;
        let col = (fk.evaluate(&plus)? - fk.evaluate(&minus)?) / (2.0 * step);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Check the analytic Jacobian against central differences on random
/// configurations drawn uniformly from [-pi, pi] per joint. Intended to run
/// once when a kinematics description is loaded.
pub fn validate_jacobian<R: Rng + ?Sized>(
    fk: &dyn ForwardKinematics,
    configs: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..configs {
        let y = DVector::from_fn(fk.input_dim(), |_, _| {
            rng.random_range(-core::f64::consts::PI..core::f64::consts::PI)
        });
        let analytic = fk.jacobian(&y)?;
        let numeric = numeric_jacobian(fk, &y, 1e-6)?;
        let err = (analytic - numeric).abs().max();
        worst = worst.max(err);
        if err >= 1e-5 {
            return Err(Error::numerical(
                "analytic Jacobian disagrees with finite differences",
            ));
        }
    }
    Ok(worst)
}
