use alloc::vec::Vec;

use crate::chaos::BasisSet;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Regression functions `f(x)` of the Kriging mean.
#[derive(Debug, Clone, PartialEq)]
pub enum Trend {
    /// `f(x) = 1` (ordinary Kriging)
    Constant,
    /// `f(x) = (1, x₁, …, xₙ)`
    Linear,
    /// The orthonormal polynomials of a PCE basis (PC-Kriging).
    Pce(BasisSet),
}

impl Trend {
    /// Number of regression functions for inputs of dimension `dim`.
    pub fn len(&self, dim: usize) -> usize {
        match self {
            Self::Constant => 1,
            Self::Linear => dim + 1,
            Self::Pce(b) => b.len(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Self::Pce(b) if b.dim() != dim => Err(Error::DimensionMismatch { expected: b.dim(), found: dim }),
            _ => Ok(()),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Pce(_) => "pce",
        }
    }

    /// Writes `f(x)` into `out` (length [`len`](Self::len)).
    pub fn eval_into(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        match self {
            Self::Constant => out[0] = 1.0,
            Self::Linear => {
                out[0] = 1.0;
                out[1..].copy_from_slice(x);
            }
            Self::Pce(b) => b.eval_into(x, scratch, out),
        }
    }

    /// The regression matrix `F` with one row per design point.
    pub fn matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x.cols())?;
        let mut f = Matrix::zeros(x.rows(), self.len(x.cols()));
        let mut scratch = Vec::new();
        for i in 0..x.rows() {
            self.eval_into(x.row(i), &mut scratch, f.row_mut(i));
        }
        Ok(f)
    }
}
