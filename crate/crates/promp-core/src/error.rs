//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

use nalgebra::DVector;

pub type Result<T> = core::result::Result<T, Error>;

/// Summary of the matrix that made a factorization or solve fail.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDiagnostics {
    pub dim: usize,
    pub trace: f64,
    pub min_diagonal: f64,
    pub max_abs_entry: f64,
    /// Largest diagonal jitter that was tried before giving up, if any.
    pub jitter_tried: Option<f64>,
}

impl fmt::Display for MatrixDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dim={} trace={:.3e} min_diag={:.3e} max_abs={:.3e}",
            self.dim, self.trace, self.min_diagonal, self.max_abs_entry
        )?;
        if let Some(j) = self.jitter_tried {
            write!(f, " jitter_tried={:.3e}", j)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed argument or input data.
    Input(String),
    /// A numerical operation failed (typically a covariance factorization).
    Numerical {
        context: String,
        diagnostics: Option<MatrixDiagnostics>,
        /// EM iteration at which the failure happened, when applicable.
        iteration: Option<usize>,
    },
    /// Task-space adaptation did not reach a stationary point.
    Adaptation {
        iterations: usize,
        gradient_norm: f64,
        /// Best joint-space iterate found before giving up.
        best_iterate: DVector<f64>,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(context: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            diagnostics: None,
            iteration: None,
        }
    }

    pub fn numerical_with(context: impl Into<String>, diagnostics: MatrixDiagnostics) -> Self {
        Error::Numerical {
            context: context.into(),
            diagnostics: Some(diagnostics),
            iteration: None,
        }
    }

    pub fn at_iteration(mut self, it: usize) -> Self {
        if let Error::Numerical { iteration, .. } = &mut self {
            *iteration = Some(it);
        }
        self
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Numerical {
                context,
                diagnostics,
                iteration,
            } => {
                write!(f, "numerical error: {context}")?;
                if let Some(it) = iteration {
                    write!(f, " (iteration {it})")?;
                }
                if let Some(d) = diagnostics {
                    write!(f, " [{d}]")?;
                }
                Ok(())
            }
            Error::Adaptation {
                iterations,
                gradient_norm,
                ..
            } => write!(
                f,
                "adaptation error: optimizer stopped after {iterations} iterations \
                 with gradient norm {gradient_norm:.3e}"
            ),
        }
    }
}

impl core::error::Error for Error {}
