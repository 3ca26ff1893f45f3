//! Designs of experiments in the unit hypercube and their mapping onto a
//! [`ParameterSpace`].

mod sobol;

pub use sobol::{SobolSequence, MAX_DIMENSION as SOBOL_MAX_DIMENSION};

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_xorshift::XorShiftRng;

use crate::linalg::Matrix;
use crate::space::ParameterSpace;
use crate::{Error, Result};

/// Coordinate system a design's points are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignForm {
    /// `[0, 1)^n`
    Unit,
    /// Standard domain of the polynomial families (`[-1, 1]` / standard normal).
    Standard,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoeKind {
    Sobol,
    Lhs,
    MonteCarlo,
    /// Loaded from a file or assembled by hand.
    External,
}

impl DoeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sobol => "sobol",
            Self::Lhs => "lhs",
            Self::MonteCarlo => "mc",
            Self::External => "external",
        }
    }
}

impl core::str::FromStr for DoeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sobol" => Ok(Self::Sobol),
            "lhs" => Ok(Self::Lhs),
            "mc" => Ok(Self::MonteCarlo),
            "external" => Ok(Self::External),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown design kind `{s}`"))),
        }
    }
}

/// How a design was produced; `skip` applies to Sobol, `seed` to LHS and MC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub kind: DoeKind,
    pub seed: u64,
    pub skip: u64,
}

/// N×n sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub points: Matrix,
    pub form: DesignForm,
    pub provenance: Provenance,
}

impl DesignMatrix {
    pub fn new(points: Matrix, form: DesignForm, provenance: Provenance) -> Self {
        Self { points, form, provenance }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    fn expect_form(&self, form: DesignForm) -> Result<()> {
        if self.form != form {
            return Err(Error::InvalidArgument(alloc::format!(
                "design is in {:?} form, expected {:?}",
                self.form, form
            )));
        }
        Ok(())
    }

    fn map_rows(&self, space: &ParameterSpace, form: DesignForm, f: impl Fn(&ParameterSpace, &[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        if self.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: self.dim() });
        }
        let mut data = Vec::with_capacity(self.len() * self.dim());
        for r in self.points.row_iter() {
            data.extend(f(space, r)?);
        }
        Ok(Self {
            points: Matrix::from_row_major(self.len(), self.dim(), data)?,
            form,
            provenance: self.provenance,
        })
    }

    /// Physical design → standard design.
    pub fn physical_to_standard(&self, space: &ParameterSpace) -> Result<Self> {
        self.expect_form(DesignForm::Physical)?;
        self.map_rows(space, DesignForm::Standard, |s, r| s.to_standard(r))
    }

    /// Unit design → standard design, without the detour through physical units.
    pub fn unit_to_standard(&self, space: &ParameterSpace) -> Result<Self> {
        self.expect_form(DesignForm::Unit)?;
        self.map_rows(space, DesignForm::Standard, |s, r| {
            Ok(s.params().iter().zip(r).map(|(p, &u)| p.dist.unit_to_standard(u)).collect())
        })
    }
}

fn check_args(dim: usize, count: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("design dimension must be positive".into()));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("design size must be positive".into()));
    }
    Ok(())
}

/// Points `skip + 1 … skip + count` of the Sobol sequence; the all-zeros
/// origin is never emitted.
pub fn sobol_sequence(dim: usize, count: usize, skip: u64) -> Result<DesignMatrix> {
    check_args(dim, count)?;
    let mut seq = SobolSequence::new(dim, skip)?;
    let mut points = Matrix::zeros(count, dim);
    for i in 0..count {
        seq.next_into(points.row_mut(i))?;
    }
    Ok(DesignMatrix::new(points, DesignForm::Unit, Provenance { kind: DoeKind::Sobol, seed: 0, skip }))
}

/// The PRNG behind every seeded design: xorshift128 (`rand_xorshift`),
/// seeded through `SeedableRng::seed_from_u64`.
pub fn rng_from_seed(seed: u64) -> XorShiftRng {
    XorShiftRng::seed_from_u64(seed)
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Latin hypercube: one point per stratum `[k/N, (k+1)/N)` along every axis.
pub fn lhs(dim: usize, count: usize, seed: u64) -> Result<DesignMatrix> {
    check_args(dim, count)?;
    let mut rng = rng_from_seed(seed);
    let mut points = Matrix::zeros(count, dim);
    let mut strata: Vec<usize> = (0..count).collect();
    for j in 0..dim {
        strata.shuffle(&mut rng);
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            points[(i, j)] = ((k as f64 + u) / count as f64).min(BELOW_ONE);
        }
    }
    Ok(DesignMatrix::new(points, DesignForm::Unit, Provenance { kind: DoeKind::Lhs, seed, skip: 0 }))
}

/// Independent uniform draws on the open interval `(0, 1)`, so that every
/// point has a finite normal quantile.
pub fn monte_carlo(dim: usize, count: usize, seed: u64) -> Result<DesignMatrix> {
    check_args(dim, count)?;
    let mut rng = rng_from_seed(seed);
    let points = Matrix::from_fn(count, dim, |_, _| ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64));
    Ok(DesignMatrix::new(points, DesignForm::Unit, Provenance { kind: DoeKind::MonteCarlo, seed, skip: 0 }))
}

/// Inverse-CDF map of a unit design onto the physical space, row order kept.
pub fn scale(design: &DesignMatrix, space: &ParameterSpace) -> Result<DesignMatrix> {
    design.expect_form(DesignForm::Unit)?;
    design.map_rows(space, DesignForm::Physical, |s, r| {
        Ok(s.params().iter().zip(r).map(|(p, &u)| p.dist.quantile(u)).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Distribution, Parameter};
    use alloc::string::String;
    use alloc::vec;

    fn raw(v: &[u64]) -> Vec<f64> {
        v.iter().map(|&k| k as f64 / 4_294_967_296.0).collect()
    }

    #[test]
    fn sobol_small_examples() {
        let d = sobol_sequence(1, 3, 0).unwrap();
        assert_eq!(d.points.as_slice(), &[0.5, 0.75, 0.25]);
        let d = sobol_sequence(2, 2, 0).unwrap();
        assert_eq!(d.points.as_slice(), &[0.5, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn sobol_skip_continues_stream() {
        let full = sobol_sequence(5, 40, 0).unwrap();
        let tail = sobol_sequence(5, 30, 10).unwrap();
        for i in 0..30 {
            assert_eq!(full.row(i + 10), tail.row(i));
        }
    }

    #[test]
    fn sobol_study_design_is_distinct_and_in_range() {
        let d = sobol_sequence(7, 100, 0).unwrap();
        assert_eq!((d.len(), d.dim()), (100, 7));
        assert!(d.points.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
        for i in 0..100 {
            for j in 0..i {
                assert_ne!(d.row(i), d.row(j));
            }
        }
    }

    fn dyadic_counts(pts: &[f64], k: u32) -> Vec<usize> {
        let cells = 1usize << k;
        let mut counts = vec![0usize; cells];
        for &p in pts {
            counts[(p * cells as f64) as usize] += 1;
        }
        counts
    }

    #[test]
    fn sobol_dyadic_balance() {
        let d = sobol_sequence(1, 64, 0).unwrap();
        for m in 1..=6u32 {
            let n = 1usize << m;
            // raw indices 0..2^m (origin restored) form a (0, m, 1)-net
            let net: Vec<f64> = core::iter::once(0.0).chain(d.points.as_slice()[..n - 1].iter().copied()).collect();
            for k in 0..=m {
                assert!(dyadic_counts(&net, k).iter().all(|&c| c == n >> k), "net m={m} k={k}");
            }
            // emitted points 1..=2^m: raw point 2^m replaces the origin and
            // shares its cell at every level coarser than 2^-m
            let emitted = &d.points.as_slice()[..n];
            for k in 0..m {
                assert!(dyadic_counts(emitted, k).iter().all(|&c| c == n >> k), "emitted m={m} k={k}");
            }
        }
    }

    #[test]
    fn sobol_errors() {
        assert!(sobol_sequence(0, 3, 0).is_err());
        assert!(matches!(sobol_sequence(SOBOL_MAX_DIMENSION + 1, 3, 0), Err(Error::SobolDimension { .. })));
        assert!(SOBOL_MAX_DIMENSION >= 21);
    }

    #[test]
    fn sobol_matches_reference_dim2() {
        // scipy.stats.qmc.Sobol(2, scramble=False), points 1..=4, times 2^32
        let d = sobol_sequence(2, 4, 0).unwrap();
        let expect = raw(&[
            2147483648, 2147483648, 3221225472, 1073741824, 1073741824, 3221225472, 1610612736, 1610612736,
        ]);
        assert_eq!(d.points.as_slice(), expect.as_slice());
    }

    #[test]
    fn lhs_stratified_and_deterministic() {
        let d = lhs(1, 4, 9).unwrap();
        let mut cells: Vec<usize> = d.points.as_slice().iter().map(|v| (v * 4.0) as usize).collect();
        cells.sort();
        assert_eq!(cells, vec![0, 1, 2, 3]);
        let one = lhs(2, 1, 3).unwrap();
        assert!(one.points.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(lhs(3, 50, 11).unwrap(), lhs(3, 50, 11).unwrap());
        assert_ne!(lhs(3, 50, 11).unwrap(), lhs(3, 50, 12).unwrap());
        let big = lhs(3, 50, 11).unwrap();
        for j in 0..3 {
            let mut c: Vec<usize> = big.points.column(j).iter().map(|v| (v * 50.0) as usize).collect();
            c.sort();
            assert_eq!(c, (0..50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn monte_carlo_mean_and_determinism() {
        let d = monte_carlo(2, 10_000, 5).unwrap();
        for j in 0..2 {
            let m = d.points.column(j).iter().sum::<f64>() / 10_000.0;
            // 6 sigma of the sample mean of U(0,1) at n = 1e4 is 0.0173
            assert!((m - 0.5).abs() < 0.02, "mean {m}");
        }
        let one = monte_carlo(1, 1, 0).unwrap();
        assert!((0.0..1.0).contains(&one.points[(0, 0)]));
        assert_eq!(monte_carlo(3, 20, 1).unwrap(), monte_carlo(3, 20, 1).unwrap());
    }

    #[test]
    fn scale_examples() {
        let mk = |d| Parameter { name: String::from("a"), dist: d, unit: String::new() };
        let s = ParameterSpace::new(vec![mk(Distribution::uniform(2.0, 4.0).unwrap())]).unwrap();
        let unit = DesignMatrix::new(
            Matrix::from_rows(&[[0.0], [0.5]]).unwrap(),
            DesignForm::Unit,
            Provenance { kind: DoeKind::External, seed: 0, skip: 0 },
        );
        let phys = scale(&unit, &s).unwrap();
        assert_eq!(phys.points.as_slice(), &[2.0, 3.0]);
        assert_eq!(phys.form, DesignForm::Physical);

        let n = ParameterSpace::new(vec![mk(Distribution::normal(0.0, 1.0).unwrap())]).unwrap();
        let u = DesignMatrix::new(Matrix::from_rows(&[[0.8413]]).unwrap(), DesignForm::Unit, unit.provenance);
        // scipy.special.ndtri(0.8413) = 0.99981509...
        assert!((scale(&u, &n).unwrap().points[(0, 0)] - 1.0).abs() < 1e-3);

        let two = ParameterSpace::unit_uniform(2).unwrap();
        assert!(matches!(scale(&unit, &two), Err(Error::DimensionMismatch { .. })));
        assert!(scale(&phys, &s).is_err());
    }
}
