//! The movement primitive itself: a Gaussian over weight vectors and the
//! distributions over joint states it induces.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::basis::{BasisConfig, Order};
use crate::error::{Error, Result};
use crate::gaussian::{standard_normal_vector, GaussianState};
use crate::linalg::{self, SpdFactor};

/// One recorded trajectory: ordered `(time, joint vector)` samples plus the
/// extent used for phase normalization.
///
/// The phase of sample `i` is `(times[i] - start) / duration`. When the
/// extent is inferred from the data the first and last samples map to phases
/// 0 and 1 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    times: Vec<f64>,
    /// One row per sample, one column per degree of freedom. Radians.
    joints: DMatrix<f64>,
    start: f64,
    duration: f64,
}

impl Demonstration {
    /// Build a demonstration whose phase extent spans the recorded samples.
    pub fn new(times: Vec<f64>, joints: DMatrix<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::input(
                "a demonstration needs at least two samples to define its extent",
            ));
        }
        let start = times[0];
        let duration = times[times.len() - 1] - start;
        Self::with_extent(times, joints, start, duration)
    }

    /// Build with an explicit phase extent. All sample times must map to
    /// phases inside [0, 1].
    pub fn with_extent(
        times: Vec<f64>,
        joints: DMatrix<f64>,
        start: f64,
        duration: f64,
    ) -> Result<Self> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(Error::input("demonstration duration must be positive"));
        }
        if joints.nrows() != times.len() {
            return Err(Error::input(
                "joint rows must match the number of timestamps",
            ));
        }
        if joints.ncols() == 0 {
            return Err(Error::input(
                "demonstration needs at least one degree of freedom",
            ));
        }
        for pair in times.windows(2) {
            let increasing = pair[1].partial_cmp(&pair[0]) == Some(core::cmp::Ordering::Greater);
            if !increasing {
                return Err(Error::input("timestamps must be strictly increasing"));
            }
        }
        for &t in &times {
            let z = (t - start) / duration;
            if !(-1e-9..=1.0 + 1e-9).contains(&z) {
                return Err(Error::input("sample time outside the declared extent"));
            }
        }
        if joints.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("joint values must be finite"));
        }
        Ok(Demonstration {
            times,
            joints,
            start,
            duration,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.joints.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn joints(&self) -> &DMatrix<f64> {
        &self.joints
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn phase_of(&self, t: f64) -> f64 {
        (t - self.start) / self.duration
    }

    /// Normalized phases of every sample, clamped against roundoff so the
    /// endpoints are exactly 0 and 1 when the extent comes from the data.
    pub fn phases(&self) -> Vec<f64> {
        self.times
            .iter()
            .map(|&t| self.phase_of(t).clamp(0.0, 1.0))
            .collect()
    }

    /// Keep only the samples whose index satisfies the predicate. The phase
    /// extent is preserved, so this models missing observations rather than
    /// a shorter movement.
    pub fn retain_samples(&self, mut keep: impl FnMut(usize) -> bool) -> Demonstration {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let times: Vec<f64> = idx.iter().map(|&i| self.times[i]).collect();
        let mut joints = DMatrix::zeros(idx.len(), self.dof());
        for (r, &i) in idx.iter().enumerate() {
            joints.row_mut(r).copy_from(&self.joints.row(i));
        }
        Demonstration {
            times,
            joints,
            start: self.start,
            duration: self.duration,
        }
    }
}

/// Probabilistic movement primitive: `N(mu_w, sigma_w)` over weight vectors,
/// observation noise `sigma_y` on positions, and the basis that renders
/// weights into trajectories.
///
/// Weight vectors are DoF-major: the first K entries belong to the first
/// degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct ProMP {
    basis: BasisConfig,
    dof: usize,
    mu_w: DVector<f64>,
    sigma_w: DMatrix<f64>,
    sigma_y: DMatrix<f64>,
}

impl ProMP {
    pub fn new(
        basis: BasisConfig,
        dof: usize,
        mu_w: DVector<f64>,
        sigma_w: DMatrix<f64>,
        sigma_y: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = basis.k() * dof;
        if dof == 0 {
            return Err(Error::input("degree-of-freedom count must be at least 1"));
        }
        if mu_w.len() != dim {
            return Err(Error::input("weight mean length must equal K * D"));
        }
        if sigma_w.shape() != (dim, dim) {
            return Err(Error::input("weight covariance must be (K*D) x (K*D)"));
        }
        if sigma_y.shape() != (dof, dof) {
            return Err(Error::input("observation noise must be D x D"));
        }
        if !linalg::is_symmetric(&sigma_w, 1e-9) || !linalg::is_symmetric(&sigma_y, 1e-9) {
            return Err(Error::input("covariance matrices must be symmetric"));
        }
        let mut sigma_w = sigma_w;
        let mut sigma_y = sigma_y;
        linalg::symmetrize(&mut sigma_w);
        linalg::symmetrize(&mut sigma_y);
        Ok(ProMP {
            basis,
            dof,
            mu_w,
            sigma_w,
            sigma_y,
        })
    }

    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Weight-space dimension K * D.
    pub fn dim(&self) -> usize {
        self.mu_w.len()
    }

    pub fn mu_w(&self) -> &DVector<f64> {
        &self.mu_w
    }

    pub fn sigma_w(&self) -> &DMatrix<f64> {
        &self.sigma_w
    }

    pub fn sigma_y(&self) -> &DMatrix<f64> {
        &self.sigma_y
    }

    /// Replace the weight distribution, keeping basis, noise and dimension.
    pub fn with_weights(&self, mu_w: DVector<f64>, sigma_w: DMatrix<f64>) -> Result<ProMP> {
        ProMP::new(
            self.basis.clone(),
            self.dof,
            mu_w,
            sigma_w,
            self.sigma_y.clone(),
        )
    }

    /// Distribution over the joint state (or its phase derivative) at `z`.
    ///
    /// Observation noise enters only the position marginal; derivatives are
    /// taken with respect to the phase, so callers rescale by the inverse
    /// duration for wall-clock velocities.
    pub fn marginal_at(&self, z: f64, order: Order) -> Result<GaussianState> {
        let phi = self.basis.block_feature_matrix(z, self.dof, order)?;
        let mean = &phi * &self.mu_w;
        let mut cov = &phi * &self.sigma_w * phi.transpose();
        if order == Order::Position {
            cov += &self.sigma_y;
        }
        linalg::symmetrize(&mut cov);
        GaussianState::new(mean, cov)
    }

    /// Draw a weight vector from `N(mu_w, sigma_w)`.
    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let l = linalg::psd_sqrt(&self.sigma_w, "weight covariance square root")?;
        Ok(&self.mu_w + l * standard_normal_vector(self.dim(), rng))
    }

    /// Sample one trajectory: a single weight vector rendered at the given
    /// phases, with observation noise added per sample. Returns one row per
    /// phase.
    pub fn sample_trajectory<R: Rng + ?Sized>(
        &self,
        phases: &[f64],
        rng: &mut R,
    ) -> Result<DMatrix<f64>> {
        let w = self.sample_weights(rng)?;
        let noise_l = linalg::psd_sqrt(&self.sigma_y, "observation noise square root")?;
        let mut out = DMatrix::zeros(phases.len(), self.dof);
        for (i, &z) in phases.iter().enumerate() {
            let phi = self
                .basis
                .block_feature_matrix(z, self.dof, Order::Position)?;
            let y = &phi * &w + &noise_l * standard_normal_vector(self.dof, rng);
            out.row_mut(i).copy_from(&y.transpose());
        }
        Ok(out)
    }

    /// Log marginal likelihood of the demonstrations, with the weight vector
    /// integrated out in closed form. Linear in the trajectory lengths.
    pub fn log_marginal_likelihood(&self, demos: &[Demonstration]) -> Result<f64> {
        if demos.is_empty() {
            return Err(Error::input("need at least one demonstration"));
        }
        let sw = SpdFactor::new(&self.sigma_w, "weight covariance")?;
        let sy = SpdFactor::new(&self.sigma_y, "observation noise")?;
        let lam_w = sw.inverse();
        let prec_y = sy.inverse();
        let mut total = 0.0;
        for demo in demos {
            if demo.dof() != self.dof {
                return Err(Error::input("demonstration dimension does not match model"));
            }
            let design = DemoDesign::new(&self.basis, demo)?;
            total += self.demo_log_likelihood(&design, &lam_w, &prec_y, &sw, &sy)?;
        }
        Ok(total)
    }

    fn demo_log_likelihood(
        &self,
        design: &DemoDesign,
        lam_w: &DMatrix<f64>,
        prec_y: &DMatrix<f64>,
        sw: &SpdFactor,
        sy: &SpdFactor,
    ) -> Result<f64> {
        let t = design.samples as f64;
        let d = self.dof as f64;
        let a = lam_w + prec_y.kronecker(&design.gram);
        let fa = SpdFactor::new(&a, "posterior weight precision")?;
        let b = lam_w * &self.mu_w + design.stacked_projection(prec_y);
        let m = fa.solve_vec(&b);
        let quad_y = prec_y.dot(&design.outer);
        let quad_mu = self.mu_w.dot(&(lam_w * &self.mu_w));
        Ok(-0.5
            * (t * d * libm::log(2.0 * PI)
                + t * sy.log_det()
                + sw.log_det()
                + fa.log_det()
                + quad_mu
                + quad_y
                - b.dot(&m)))
    }
}

/// Per-demonstration sufficient statistics of the basis design.
///
/// Because every degree of freedom shares the feature vector, the accumulated
/// matrices factor through Kronecker products: the posterior precision
/// contribution is `kron(sigma_y^-1, gram)`.
pub(crate) struct DemoDesign {
    /// Sum over samples of `phi phi^T`, K x K.
    pub gram: DMatrix<f64>,
    /// Sum over samples of `phi y^T`, K x D.
    pub proj: DMatrix<f64>,
    /// Sum over samples of `y y^T`, D x D.
    pub outer: DMatrix<f64>,
    /// Feature vector per sample.
    pub feats: Vec<DVector<f64>>,
    pub samples: usize,
}

impl DemoDesign {
    pub fn new(basis: &BasisConfig, demo: &Demonstration) -> Result<Self> {
        let k = basis.k();
        let d = demo.dof();
        let mut gram = DMatrix::zeros(k, k);
        let mut proj = DMatrix::zeros(k, d);
        let mut outer = DMatrix::zeros(d, d);
        let phases = demo.phases();
        let mut feats = Vec::with_capacity(phases.len());
        for (i, &z) in phases.iter().enumerate() {
            let phi = basis.features(z)?;
            let y = demo.joints().row(i).transpose();
            gram.syger(1.0, &phi, &phi, 1.0);
            proj += &phi * y.transpose();
            outer.syger(1.0, &y, &y, 1.0);
            feats.push(phi);
        }
        gram.fill_upper_triangle_with_lower_triangle();
        outer.fill_upper_triangle_with_lower_triangle();
        Ok(DemoDesign {
            gram,
            proj,
            outer,
            feats,
            samples: phases.len(),
        })
    }

    /// DoF-major stacking of the columns of `proj * prec_y`: the summed
    /// `Phi^T sigma_y^-1 y` vector of length K * D.
    pub fn stacked_projection(&self, prec_y: &DMatrix<f64>) -> DVector<f64> {
        let weighted = &self.proj * prec_y;
        let k = self.proj.nrows();
        let d = self.proj.ncols();
        let mut out = DVector::zeros(k * d);
        for dof in 0..d {
            out.rows_mut(dof * k, k).copy_from(&weighted.column(dof));
        }
        out
    }
}

/// Render `n` synthetic demonstrations from a generating model: one weight
/// sample each, observed at equally spaced phases with the model's own
/// observation noise.
pub fn sample_demonstrations<R: Rng + ?Sized>(
    p: &ProMP,
    n: usize,
    samples_per_demo: usize,
    rng: &mut R,
) -> Result<Vec<Demonstration>> {
    if samples_per_demo < 2 {
        return Err(Error::input("need at least two samples per demonstration"));
    }
    let times: Vec<f64> = (0..samples_per_demo)
        .map(|i| i as f64 / (samples_per_demo - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let joints = p.sample_trajectory(&times, rng)?;
        out.push(Demonstration::new(times.clone(), joints)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_basis() -> BasisConfig {
        // Degree-0 polynomial only: phi(z) = (1).
        BasisConfig::new(alloc::vec![], 1.0, 0).unwrap()
    }

    #[test]
    fn scalar_marginal() {
        let p = ProMP::new(
            constant_basis(),
            1,
            DVector::from_row_slice(&[2.0]),
            DMatrix::from_row_slice(1, 1, &[0.5]),
            DMatrix::from_row_slice(1, 1, &[0.25]),
        )
        .unwrap();
        let m = p.marginal_at(0.3, Order::Position).unwrap();
        assert_relative_eq!(m.mean()[0], 2.0);
        assert_relative_eq!(m.cov()[(0, 0)], 0.75);
    }

    #[test]
    fn degenerate_marginal_is_deterministic() {
        let basis = BasisConfig::standard();
        let k = basis.k();
        let mu = DVector::from_fn(k, |i, _| i as f64 * 0.1);
        let p = ProMP::new(
            basis.clone(),
            1,
            mu.clone(),
            DMatrix::zeros(k, k),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let m = p.marginal_at(0.4, Order::Position).unwrap();
        let phi = basis.features(0.4).unwrap();
        assert_relative_eq!(m.mean()[0], phi.dot(&mu));
        assert_eq!(m.cov()[(0, 0)], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = p.sample_trajectory(&[0.0, 0.4, 1.0], &mut rng).unwrap();
        assert_relative_eq!(traj[(1, 0)], phi.dot(&mu));
    }

    #[test]
    fn velocity_marginal_omits_observation_noise() {
        let p = ProMP::new(
            constant_basis(),
            1,
            DVector::zeros(1),
            DMatrix::from_row_slice(1, 1, &[0.5]),
            DMatrix::from_row_slice(1, 1, &[0.25]),
        )
        .unwrap();
        let m = p.marginal_at(0.3, Order::Velocity).unwrap();
        // Constant basis: derivative features vanish entirely.
        assert_eq!(m.cov()[(0, 0)], 0.0);
    }

    #[test]
    fn seeded_trajectory_sampling_is_bit_identical() {
        let basis = BasisConfig::standard();
        let k = basis.k();
        let p = ProMP::new(
            basis,
            2,
            DVector::from_fn(2 * k, |i, _| (i as f64).sin()),
            DMatrix::identity(2 * k, 2 * k) * 0.3,
            DMatrix::identity(2, 2) * 1e-4,
        )
        .unwrap();
        let phases: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let a = p
            .sample_trajectory(&phases, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = p
            .sample_trajectory(&phases, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_log_likelihood_matches_closed_form() {
        // One sample, constant basis: the marginal is N(y; mu, s_w + s_y).
        let (mu, s_w, s_y, y) = (1.5, 0.8, 0.3, 0.9);
        let p = ProMP::new(
            constant_basis(),
            1,
            DVector::from_row_slice(&[mu]),
            DMatrix::from_row_slice(1, 1, &[s_w]),
            DMatrix::from_row_slice(1, 1, &[s_y]),
        )
        .unwrap();
        let demo = Demonstration::with_extent(
            alloc::vec![0.5],
            DMatrix::from_row_slice(1, 1, &[y]),
            0.0,
            1.0,
        )
        .unwrap();
        let ll = p.log_marginal_likelihood(&[demo]).unwrap();
        let var = s_w + s_y;
        let expect = -0.5 * ((y - mu) * (y - mu) / var + libm::log(var) + libm::log(2.0 * PI));
        assert_relative_eq!(ll, expect, epsilon = 1e-12);
    }

    #[test]
    fn likelihood_invariant_under_demo_order() {
        let basis = BasisConfig::standard();
        let k = basis.k();
        let p = ProMP::new(
            basis,
            2,
            DVector::from_fn(2 * k, |i, _| 0.05 * i as f64),
            DMatrix::identity(2 * k, 2 * k),
            DMatrix::identity(2, 2) * 0.01,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let demos = sample_demonstrations(&p, 3, 20, &mut rng).unwrap();
        let fwd = p.log_marginal_likelihood(&demos).unwrap();
        let rev: Vec<Demonstration> = demos.into_iter().rev().collect();
        assert_relative_eq!(
            fwd,
            p.log_marginal_likelihood(&rev).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn demonstration_validation() {
        let joints = DMatrix::zeros(2, 1);
        assert!(Demonstration::new(alloc::vec![0.0, 1.0], joints.clone()).is_ok());
        assert!(Demonstration::new(alloc::vec![1.0, 1.0], joints.clone()).is_err());
        assert!(Demonstration::new(alloc::vec![0.0], DMatrix::zeros(1, 1)).is_err());
        // Sample outside the declared extent.
        assert!(Demonstration::with_extent(alloc::vec![0.0, 2.0], joints, 0.0, 1.0).is_err());
    }

    #[test]
    fn phases_span_unit_interval() {
        let demo = Demonstration::new(alloc::vec![2.0, 3.0, 6.0], DMatrix::zeros(3, 1)).unwrap();
        assert_eq!(demo.phases(), alloc::vec![0.0, 0.25, 1.0]);
    }
}
