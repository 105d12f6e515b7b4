//! Symmetric positive-definite factorization helpers.
//!
//! Every covariance inversion in the crate goes through [`SpdFactor`]. On a
//! failed Cholesky we retry with a diagonal jitter of `1e-10 * trace / dim`,
//! escalating twice, and report the jitter in the error diagnostics if the
//! matrix never factors.

use alloc::string::String;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, MatrixDiagnostics, Result};

pub const BASE_JITTER: f64 = 1e-10;

pub fn diagnostics_of(m: &DMatrix<f64>, jitter_tried: Option<f64>) -> MatrixDiagnostics {
    let dim = m.nrows();
    let trace = m.trace();
    let min_diagonal = (0..dim).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
    let max_abs_entry = m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    MatrixDiagnostics {
        dim,
        trace,
        min_diagonal,
        max_abs_entry,
        jitter_tried,
    }
}

/// Cholesky factor of a symmetric positive-definite matrix, possibly obtained
/// after adding diagonal jitter.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
    /// Jitter that had to be added to the diagonal; zero when none was needed.
    pub jitter: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        debug_assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(SpdFactor {
                chol,
                dim,
                jitter: 0.0,
            });
        }
        let base = BASE_JITTER * m.trace() / dim as f64;
        let mut jitter = base;
        for _ in 0..3 {
            if jitter > 0.0 {
                let mut jittered = m.clone();
                for i in 0..dim {
                    jittered[(i, i)] += jitter;
                }
                if let Some(chol) = Cholesky::new(jittered) {
                    return Ok(SpdFactor { chol, dim, jitter });
                }
            }
            jitter *= 100.0;
        }
        let tried = if base > 0.0 {
            Some(jitter / 100.0)
        } else {
            None
        };
        Err(Error::Numerical {
            context: String::from(context),
            diagnostics: Some(diagnostics_of(m, tried)),
            iteration: None,
        })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += libm::log(l[(i, i)]);
        }
        2.0 * acc
    }
}

/// Force exact symmetry, averaging the off-diagonal pairs.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().fold(0.0_f64, |a, &x| a.max(x.abs())).max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Square root of a symmetric positive semi-definite matrix, for sampling.
///
/// Tries Cholesky first; falls back to an eigendecomposition so that exactly
/// singular covariances (zero variance directions) still work. Eigenvalues
/// below `-1e-8 * scale` are rejected as genuinely indefinite.
pub fn psd_sqrt(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol.unpack());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let mut sqrt_vals = DVector::zeros(m.nrows());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < -1e-8 * scale {
            return Err(Error::Numerical {
                context: String::from(context),
                diagnostics: Some(diagnostics_of(m, None)),
                iteration: None,
            });
        }
        sqrt_vals[i] = libm::sqrt(ev.max(0.0));
    }
    let mut out = eig.eigenvectors.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= sqrt_vals[j];
    }
    Ok(out)
}

/// Zero every cross block of a `(d*k) x (d*k)` matrix, keeping the `d`
/// diagonal `k x k` blocks.
pub fn block_diagonal_part(m: &DMatrix<f64>, d: usize, k: usize) -> DMatrix<f64> {
    debug_assert_eq!(m.nrows(), d * k);
    let mut out = DMatrix::zeros(d * k, d * k);
    for b in 0..d {
        let r = b * k;
        out.view_mut((r, r), (k, k))
            .copy_from(&m.view((r, r), (k, k)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factor_recovers_spd_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = SpdFactor::new(&m, "test").unwrap();
        assert_eq!(f.jitter, 0.0);
        let id = f.inverse() * &m;
        assert_relative_eq!(id, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(f.log_det(), libm::log(11.0), epsilon = 1e-12);
    }

    #[test]
    fn near_singular_matrix_gets_jitter() {
        // Rank-1 plus a floor that plain Cholesky rejects.
        let v = DVector::from_row_slice(&[1.0, 1.0, 1.0]);
        let m = &v * v.transpose();
        let f = SpdFactor::new(&m, "test");
        match f {
            Ok(f) => assert!(f.jitter > 0.0),
            Err(Error::Numerical { diagnostics, .. }) => {
                assert!(diagnostics.unwrap().jitter_tried.is_some())
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn psd_sqrt_handles_zero_matrix() {
        let m = DMatrix::zeros(3, 3);
        let l = psd_sqrt(&m, "test").unwrap();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_sqrt(&m, "test").is_err());
    }

    #[test]
    fn block_diagonal_extraction() {
        let m = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let b = block_diagonal_part(&m, 2, 2);
        assert_eq!(b[(0, 1)], m[(0, 1)]);
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(2, 3)], m[(2, 3)]);
        assert_eq!(b[(3, 0)], 0.0);
    }
}
