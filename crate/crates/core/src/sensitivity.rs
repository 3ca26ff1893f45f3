//! Variance-based global sensitivity analysis by quasi-Monte Carlo.
//!
//! The two independent sample blocks `A` and `B` are the first and second
//! halves of one `2n`-dimensional Sobol sequence. Row `j` of the radial
//! matrix `AB_i` is row `j` of `A` with coordinate `i` taken from `B`.
//! First-order indices use the Saltelli (2010) estimator and total indices
//! the Jansen estimator.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::chaos::PceModel;
use crate::doe::{sobol_sequence, SOBOL_MAX_DIMENSION};
use crate::linalg::Matrix;
use crate::space::ParameterSpace;
use crate::{Error, Result};

/// Smallest accepted base sample count.
pub const MIN_BASE_COUNT: usize = 64;

/// How a set of indices was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    PceCoefficients,
    SaltelliJansen,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PceCoefficients => "pce",
            Self::SaltelliJansen => "saltelli-jansen",
        }
    }
}

/// First-order and total Sobol' indices, one entry per input.
///
/// Monte Carlo estimates are reported raw and may dip slightly below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolIndices {
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    /// Model evaluations spent; zero for coefficient-based indices.
    pub evaluation_count: usize,
    pub estimator: Estimator,
    /// Set when the output variance was zero and every index was reported as 0.
    pub zero_variance: bool,
}

/// The `N(n + 2)` evaluation points of a Saltelli campaign, in physical units.
///
/// Rows are ordered `A`, `B`, `AB_1`, …, `AB_n`, each block `N` rows long.
#[derive(Debug, Clone)]
pub struct SaltelliDesign {
    base_count: usize,
    dim: usize,
    points: Matrix,
}

impl SaltelliDesign {
    /// `seed` is used as the skip of the underlying Sobol sequence.
    pub fn new(space: &ParameterSpace, base_count: usize, seed: u64) -> Result<Self> {
        if base_count < MIN_BASE_COUNT {
            return Err(Error::InvalidArgument(alloc::format!(
                "base sample count {base_count} is below the minimum of {MIN_BASE_COUNT}"
            )));
        }
        let n = space.dim();
        if 2 * n > SOBOL_MAX_DIMENSION {
            return Err(Error::SobolDimension { requested: 2 * n, max: SOBOL_MAX_DIMENSION });
        }
        let ab = sobol_sequence(2 * n, base_count, seed)?.points;
        let params = space.params();
        let mut points = Matrix::zeros(base_count * (n + 2), n);
        for j in 0..base_count {
            let u = ab.row(j);
            for (k, p) in params.iter().enumerate() {
                let a = p.dist.quantile(u[k]);
                let b = p.dist.quantile(u[n + k]);
                points[(j, k)] = a;
                points[(base_count + j, k)] = b;
                for i in 0..n {
                    points[((2 + i) * base_count + j, k)] = if i == k { b } else { a };
                }
            }
        }
        Ok(Self { base_count, dim: n, points })
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Every evaluation point, one per row.
    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Indices from model outputs aligned with [`points`](Self::points).
    pub fn estimate(&self, values: &[f64]) -> Result<SobolIndices> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("non-finite model output at evaluation {i}")));
        }
        let (big_n, n) = (self.base_count, self.dim);
        let fa = &values[..big_n];
        let fb = &values[big_n..2 * big_n];

        let m = 2.0 * big_n as f64;
        let mean = values[..2 * big_n].iter().sum::<f64>() / m;
        let var = values[..2 * big_n].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;

        let mut first = vec![0.0; n];
        let mut total = vec![0.0; n];
        let zero_variance = !(var > 1e-300);
        if !zero_variance {
            for i in 0..n {
                let fab = &values[(2 + i) * big_n..(3 + i) * big_n];
                let mut s = 0.0;
                let mut t = 0.0;
                for j in 0..big_n {
                    s += (fb[j] - mean) * (fab[j] - fa[j]);
                    t += (fa[j] - fab[j]) * (fa[j] - fab[j]);
                }
                first[i] = s / big_n as f64 / var;
                total[i] = t / (2.0 * big_n as f64) / var;
            }
        }
        Ok(SobolIndices {
            first_order: first,
            total,
            evaluation_count: values.len(),
            estimator: Estimator::SaltelliJansen,
            zero_variance,
        })
    }
}

/// Sobol' indices of `model` over `space` from `base_count · (n + 2)` evaluations.
///
/// `model` receives physical points; the first error it returns aborts the campaign.
pub fn saltelli_sobol<F>(mut model: F, space: &ParameterSpace, base_count: usize, seed: u64) -> Result<SobolIndices>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let design = SaltelliDesign::new(space, base_count, seed)?;
    let values = design.points().row_iter().map(&mut model).collect::<Result<Vec<_>>>()?;
    design.estimate(&values)
}

/// One input's row in a [`SobolComparison`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub input: String,
    pub s1: f64,
    pub st: f64,
    pub s1_pce: f64,
    pub st_pce: f64,
    /// `max(|s1 − s1_pce|, |st − st_pce|)`
    pub delta: f64,
    pub flagged: bool,
}

/// Monte Carlo indices set beside the coefficient-based ones of a PCE.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolComparison {
    pub rows: Vec<ComparisonRow>,
    pub tolerance: f64,
}

impl SobolComparison {
    pub fn max_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.delta).fold(0.0, f64::max)
    }

    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    /// `input,S1,ST,S1_pce,ST_pce,delta` with full-precision numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("input,S1,ST,S1_pce,ST_pce,delta\n");
        for r in &self.rows {
            out.push_str(&alloc::format!(
                "{},{:?},{:?},{:?},{:?},{:?}\n",
                r.input, r.s1, r.st, r.s1_pce, r.st_pce, r.delta
            ));
        }
        out
    }
}

impl fmt::Display for SobolComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.rows.iter().map(|r| r.input.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<w$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}", "input", "S1", "ST", "S1_pce", "ST_pce", "delta")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<w$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}{}",
                r.input,
                r.s1,
                r.st,
                r.s1_pce,
                r.st_pce,
                r.delta,
                if r.flagged { "  *" } else { "" }
            )?;
        }
        write!(f, "max delta {:.4} (tolerance {})", self.max_delta(), self.tolerance)
    }
}

/// Tabulates two index sets over the same inputs; rows whose delta exceeds
/// `tolerance` are flagged.
pub fn compare_indices(names: &[&str], mc: &SobolIndices, pce: &SobolIndices, tolerance: f64) -> Result<SobolComparison> {
    let n = names.len();
    for len in [mc.first_order.len(), mc.total.len(), pce.first_order.len(), pce.total.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let rows = (0..n)
        .map(|i| {
            let delta = (mc.first_order[i] - pce.first_order[i]).abs().max((mc.total[i] - pce.total[i]).abs());
            ComparisonRow {
                input: names[i].into(),
                s1: mc.first_order[i],
                st: mc.total[i],
                s1_pce: pce.first_order[i],
                st_pce: pce.total[i],
                delta,
                flagged: delta > tolerance,
            }
        })
        .collect();
    Ok(SobolComparison { rows, tolerance })
}

/// Monte Carlo indices against the ones read off `pce`.
pub fn sobol_compare(pce: &PceModel, mc: &SobolIndices, tolerance: f64) -> Result<SobolComparison> {
    let names: Vec<&str> = pce.space().names().collect();
    compare_indices(&names, mc, &pce.sobol(), tolerance)
}
