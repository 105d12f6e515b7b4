//! Multivariate Gaussian state with a dense covariance.

use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};

/// Mean vector and covariance matrix of matching dimension.
///
/// Used for joint-space targets, task-space targets, per-time marginals and
/// ball position estimates. The covariance must be symmetric positive
/// semi-definite; exact singularity (point masses along some directions) is
/// allowed, and operations that need a positive-definite covariance fail
/// with a numerical error instead.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::input("covariance shape does not match mean length"));
        }
        if !linalg::is_symmetric(&cov, 1e-9) {
            return Err(Error::input("covariance must be symmetric"));
        }
        let mut cov = cov;
        linalg::symmetrize(&mut cov);
        Ok(GaussianState { mean, cov })
    }

    /// Dirac mass: zero covariance.
    pub fn point_mass(mean: DVector<f64>) -> Self {
        let dim = mean.len();
        GaussianState {
            mean,
            cov: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::input("point dimension does not match Gaussian"));
        }
        let f = SpdFactor::new(&self.cov, "Gaussian covariance factorization")?;
        let diff = x - &self.mean;
        let maha = diff.dot(&f.solve_vec(&diff));
        Ok(-0.5 * (maha + f.log_det() + self.dim() as f64 * libm::log(2.0 * PI)))
    }

    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(libm::exp(self.log_density(x)?))
    }

    /// Draw one sample; works for semi-definite covariances.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let l = linalg::psd_sqrt(&self.cov, "Gaussian covariance square root")?;
        Ok(self.sample_with_factor(&l, rng))
    }

    /// Sample given a precomputed square-root factor (`factor factorᵀ = cov`).
    pub fn sample_with_factor<R: Rng + ?Sized>(
        &self,
        factor: &DMatrix<f64>,
        rng: &mut R,
    ) -> DVector<f64> {
        let z = standard_normal_vector(self.dim(), rng);
        &self.mean + factor * z
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}
