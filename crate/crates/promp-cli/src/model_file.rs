//! On-disk model format: a single JSON document holding the learned
//! parameters with flat, row-major matrix layout.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use promp_core::{BasisConfig, ProMP};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub rbf_centers: Vec<f64>,
    pub rbf_width: f64,
    pub poly_degree: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(rename = "D")]
    pub dof: usize,
    pub basis: BasisFile,
    /// Weight mean, DoF-major blocks.
    pub mu_w: Vec<f64>,
    /// Weight covariance, row-major.
    #[serde(rename = "Sigma_w")]
    pub sigma_w: Vec<f64>,
    /// Observation noise, row-major.
    #[serde(rename = "Sigma_y")]
    pub sigma_y: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl ModelFile {
    pub fn from_promp(p: &ProMP) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            dof: p.dof(),
            basis: BasisFile {
                rbf_centers: p.basis().rbf_centers().to_vec(),
                rbf_width: p.basis().rbf_width(),
                poly_degree: p.basis().poly_degree(),
            },
            mu_w: p.mu_w().iter().copied().collect(),
            sigma_w: row_major(p.sigma_w()),
            sigma_y: row_major(p.sigma_y()),
        }
    }

    pub fn into_promp(self) -> crate::Result<ProMP> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!(
                "unsupported model format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let basis = BasisConfig::new(
            self.basis.rbf_centers,
            self.basis.rbf_width,
            self.basis.poly_degree,
        )?;
        let dim = basis.k() * self.dof;
        if self.mu_w.len() != dim {
            return Err(CliError::InconsistentDimension(format!(
                "mu_w has {} entries, expected {dim}",
                self.mu_w.len()
            )));
        }
        if self.sigma_w.len() != dim * dim {
            return Err(CliError::InconsistentDimension(format!(
                "Sigma_w has {} entries, expected {}",
                self.sigma_w.len(),
                dim * dim
            )));
        }
        if self.sigma_y.len() != self.dof * self.dof {
            return Err(CliError::InconsistentDimension(format!(
                "Sigma_y has {} entries, expected {}",
                self.sigma_y.len(),
                self.dof * self.dof
            )));
        }
        let mu_w = DVector::from_vec(self.mu_w);
        let sigma_w = DMatrix::from_row_slice(dim, dim, &self.sigma_w);
        let sigma_y = DMatrix::from_row_slice(self.dof, self.dof, &self.sigma_y);
        Ok(ProMP::new(basis, self.dof, mu_w, sigma_w, sigma_y)?)
    }
}

pub fn save_model(path: &Path, p: &ProMP) -> crate::Result<()> {
    let file = ModelFile::from_promp(p);
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Input(format!("cannot serialize model: {e}")))?;
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> crate::Result<ProMP> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_promp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn round_trip_preserves_bits() {
        let basis = BasisConfig::standard();
        let k = basis.k();
        let p = ProMP::new(
            basis,
            2,
            DVector::from_fn(2 * k, |i, _| (i as f64 * 0.37).sin() / 3.0),
            DMatrix::identity(2 * k, 2 * k) * 0.123456789012345,
            DMatrix::identity(2, 2) * 1e-7,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &p).unwrap();
        let q = load_model(&path).unwrap();
        assert_eq!(p.mu_w(), q.mu_w());
        assert_eq!(p.sigma_w(), q.sigma_w());
        assert_eq!(p.sigma_y(), q.sigma_y());
        assert_eq!(p.basis(), q.basis());
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            dof: 2,
            basis: BasisFile {
                rbf_centers: vec![0.0, 0.5, 1.0],
                rbf_width: 0.3333,
                poly_degree: 1,
            },
            mu_w: vec![0.0; 7],
            sigma_w: vec![0.0; 100],
            sigma_y: vec![0.0; 4],
        };
        assert!(matches!(
            file.into_promp(),
            Err(CliError::InconsistentDimension(_))
        ));
    }
}
