//! Time-dependent basis functions over the phase variable.
//!
//! A feature vector is the concatenation `[polynomial | RBF]`: the monomials
//! `1, z, …, z^degree` followed by unnormalized Gaussian bumps
//! `exp(-(z - c_i)² / (2 w²))`. The same features, differentiated with
//! respect to the phase, support conditioning on velocities and
//! accelerations; callers rescale by the inverse movement duration to get
//! wall-clock derivatives.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Derivative order of the feature map with respect to the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Position,
    Velocity,
    Acceleration,
}

impl Order {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            0 => Ok(Order::Position),
            1 => Ok(Order::Velocity),
            2 => Ok(Order::Acceleration),
            _ => Err(Error::input("derivative order must be 0, 1 or 2")),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Order::Position => 0,
            Order::Velocity => 1,
            Order::Acceleration => 2,
        }
    }
}

/// Shared feature map for every degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisConfig {
    rbf_centers: Vec<f64>,
    rbf_width: f64,
    poly_degree: usize,
}

impl BasisConfig {
    /// Build from explicit RBF centers (strictly increasing, inside [0, 1]),
    /// a shared positive width and a polynomial degree.
    pub fn new(rbf_centers: Vec<f64>, rbf_width: f64, poly_degree: usize) -> Result<Self> {
        if !rbf_centers.is_empty() {
            if !(rbf_width.is_finite() && rbf_width > 0.0) {
                return Err(Error::input("RBF width must be positive and finite"));
            }
            for pair in rbf_centers.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::input("RBF centers must be strictly increasing"));
                }
            }
            for &c in &rbf_centers {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::input("RBF centers must lie in [0, 1]"));
                }
            }
        }
        Ok(BasisConfig {
            rbf_centers,
            rbf_width,
            poly_degree,
        })
    }

    /// `n_rbf` centers equally spaced over [0, 1] inclusive, width `1/n_rbf`.
    pub fn with_default_rbfs(n_rbf: usize, poly_degree: usize) -> Self {
        let centers = match n_rbf {
            0 => Vec::new(),
            1 => alloc::vec![0.5],
            n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        };
        let width = if n_rbf == 0 { 1.0 } else { 1.0 / n_rbf as f64 };
        BasisConfig {
            rbf_centers: centers,
            rbf_width: width,
            poly_degree,
        }
    }

    /// Three RBFs plus a first-order polynomial, K = 5.
    pub fn standard() -> Self {
        Self::with_default_rbfs(3, 1)
    }

    /// Feature vector length: polynomial terms plus one entry per RBF.
    pub fn k(&self) -> usize {
        self.poly_degree + 1 + self.rbf_centers.len()
    }

    pub fn rbf_centers(&self) -> &[f64] {
        &self.rbf_centers
    }

    pub fn rbf_width(&self) -> f64 {
        self.rbf_width
    }

    pub fn poly_degree(&self) -> usize {
        self.poly_degree
    }

    /// Feature vector at phase `z`. Globally defined, so values slightly
    /// outside [0, 1] are fine; only non-finite phases are rejected.
    pub fn features(&self, z: f64) -> Result<DVector<f64>> {
        self.features_deriv(z, Order::Position)
    }

    /// Elementwise phase derivative of the feature vector.
    pub fn features_deriv(&self, z: f64, order: Order) -> Result<DVector<f64>> {
        if !z.is_finite() {
            return Err(Error::input("phase must be finite"));
        }
        let k = self.k();
        let mut out = DVector::zeros(k);
        let n_poly = self.poly_degree + 1;
        match order {
            Order::Position => {
                let mut p = 1.0;
                for i in 0..n_poly {
                    out[i] = p;
                    p *= z;
                }
            }
            Order::Velocity => {
                // d/dz z^i = i z^(i-1)
                let mut p = 1.0;
                for i in 1..n_poly {
                    out[i] = i as f64 * p;
                    p *= z;
                }
            }
            Order::Acceleration => {
                let mut p = 1.0;
                for i in 2..n_poly {
                    out[i] = (i * (i - 1)) as f64 * p;
                    p *= z;
                }
            }
        }
        let w2 = self.rbf_width * self.rbf_width;
        for (j, &c) in self.rbf_centers.iter().enumerate() {
            let d = z - c;
            let g = libm::exp(-0.5 * d * d / w2);
            out[n_poly + j] = match order {
                Order::Position => g,
                Order::Velocity => -d / w2 * g,
                Order::Acceleration => (d * d - w2) / (w2 * w2) * g,
            };
        }
        Ok(out)
    }

    /// Block-diagonal feature matrix: one feature row per degree of freedom,
    /// shape `d x (k * d)` with the weight vector laid out DoF-major.
    pub fn block_feature_matrix(&self, z: f64, d: usize, order: Order) -> Result<DMatrix<f64>> {
        if d == 0 {
            return Err(Error::input("degree-of-freedom count must be at least 1"));
        }
        let phi = self.features_deriv(z, order)?;
        let k = self.k();
        let mut out = DMatrix::zeros(d, k * d);
        for dof in 0..d {
            out.view_mut((dof, dof * k), (1, k))
                .copy_from(&phi.transpose());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_features() {
        let cfg = BasisConfig::new(alloc::vec![], 1.0, 1).unwrap();
        let f = cfg.features(0.5).unwrap();
        assert_eq!(f.as_slice(), &[1.0, 0.5]);
    }

    #[test]
    fn rbf_peak_is_one() {
        let cfg = BasisConfig::new(alloc::vec![0.3], 0.1, 0).unwrap();
        let f = cfg.features(0.3).unwrap();
        assert_eq!(f[1], 1.0);
    }

    #[test]
    fn standard_config_has_five_features() {
        let cfg = BasisConfig::standard();
        assert_eq!(cfg.k(), 5);
        assert_eq!(cfg.features(0.2).unwrap().len(), 5);
    }

    #[test]
    fn non_finite_phase_rejected() {
        let cfg = BasisConfig::standard();
        assert!(matches!(cfg.features(f64::NAN), Err(Error::Input(_))));
        assert!(matches!(cfg.features(f64::INFINITY), Err(Error::Input(_))));
    }

    #[test]
    fn invalid_order_index_rejected() {
        assert!(Order::from_index(3).is_err());
    }

    #[test]
    fn poly_derivative() {
        let cfg = BasisConfig::new(alloc::vec![], 1.0, 1).unwrap();
        let f = cfg.features_deriv(0.77, Order::Velocity).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn rbf_derivative_vanishes_at_center() {
        let cfg = BasisConfig::new(alloc::vec![0.4], 0.2, 0).unwrap();
        let f = cfg.features_deriv(0.4, Order::Velocity).unwrap();
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cfg = BasisConfig::standard();
        let z = 0.37;
        let h = 1e-6;
        let fp = cfg.features(z + h).unwrap();
        let fm = cfg.features(z - h).unwrap();
        let num = (fp.clone() - fm.clone()) / (2.0 * h);
        let ana = cfg.features_deriv(z, Order::Velocity).unwrap();
        assert_relative_eq!(ana, num, epsilon = 1e-6);

        let f0 = cfg.features(z).unwrap();
        let num2 = (fp - 2.0 * f0 + fm) / (h * h);
        let ana2 = cfg.features_deriv(z, Order::Acceleration).unwrap();
        for i in 0..cfg.k() {
            assert!((ana2[i] - num2[i]).abs() < 1e-3, "entry {i}");
        }
    }

    #[test]
    fn block_matrix_layout() {
        let cfg = BasisConfig::new(alloc::vec![], 1.0, 1).unwrap();
        let m = cfg.block_feature_matrix(0.5, 2, Order::Position).unwrap();
        assert_eq!(m.shape(), (2, 4));
        let expect = DMatrix::from_row_slice(2, 4, &[1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5]);
        assert_eq!(m, expect);
    }

    #[test]
    fn block_matrix_robot_size() {
        let cfg = BasisConfig::standard();
        let m = cfg.block_feature_matrix(0.3, 7, Order::Position).unwrap();
        assert_eq!(m.shape(), (7, 35));
    }

    #[test]
    fn centers_must_increase() {
        assert!(BasisConfig::new(alloc::vec![0.5, 0.5], 0.1, 0).is_err());
        assert!(BasisConfig::new(alloc::vec![0.2, 1.4], 0.1, 0).is_err());
        assert!(BasisConfig::new(alloc::vec![0.2, 0.8], 0.0, 0).is_err());
    }
}
