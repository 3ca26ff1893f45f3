//! PC-Kriging: a Kriging model whose trend is a truncated orthonormal
//! polynomial basis. The polynomial coefficients are the generalised
//! least-squares trend `β`, estimated jointly with the length scales inside
//! the likelihood search.

use alloc::vec;
use alloc::vec::Vec;

use crate::chaos::{BasisSet, PceModel};
use crate::doe::{monte_carlo, DesignForm, DesignMatrix};
use crate::kriging::{fit_given_theta, mle_train, Kernel, KernelFamily, KrigingModel, MleOptions, MleReport, Prediction, Trend};
use crate::linalg::{axpy, dot};
use crate::space::ParameterSpace;
use crate::{Error, Result};

/// Default number of surrogate draws behind [`pck_moments`].
pub const DEFAULT_MC_COUNT: usize = 100_000;

#[derive(Debug, Clone)]
pub struct PckModel {
    space: ParameterSpace,
    kriging: KrigingModel,
    mle: Option<MleReport>,
}

/// Sample mean and sample standard deviation of surrogate draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

fn check_design(space: &ParameterSpace, design: &DesignMatrix, y: &[f64]) -> Result<()> {
    if design.form != DesignForm::Standard {
        return Err(Error::InvalidArgument("PC-Kriging needs a design in standard form".into()));
    }
    if design.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: design.dim() });
    }
    if y.len() != design.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), found: y.len() });
    }
    Ok(())
}

/// Trains a PC-Kriging model with a total-degree-`p` trend.
pub fn fit_pck(
    space: &ParameterSpace,
    design: &DesignMatrix,
    y: &[f64],
    p: usize,
    family: KernelFamily,
    options: &MleOptions,
) -> Result<PckModel> {
    check_design(space, design, y)?;
    let basis = BasisSet::total_degree(space, p)?;
    if design.len() <= basis.len() {
        return Err(Error::Underdetermined { samples: design.len(), terms: basis.len() });
    }
    let (kriging, report) = mle_train(&design.points, y, family, Trend::Pce(basis), options)?;
    Ok(PckModel { space: space.clone(), kriging, mle: Some(report) })
}

/// PC-Kriging at fixed length scales, e.g. when reloading a trained model.
pub fn fit_pck_given_theta(
    space: &ParameterSpace,
    design: &DesignMatrix,
    y: &[f64],
    p: usize,
    kernel: Kernel,
) -> Result<PckModel> {
    fit_pck_given_basis(space, design, y, BasisSet::total_degree(space, p)?, kernel)
}

/// [`fit_pck_given_theta`] with an explicit trend basis.
pub fn fit_pck_given_basis(
    space: &ParameterSpace,
    design: &DesignMatrix,
    y: &[f64],
    basis: BasisSet,
    kernel: Kernel,
) -> Result<PckModel> {
    check_design(space, design, y)?;
    if basis.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: basis.dim() });
    }
    if design.len() <= basis.len() {
        return Err(Error::Underdetermined { samples: design.len(), terms: basis.len() });
    }
    let kriging = fit_given_theta(&design.points, y, kernel, Trend::Pce(basis))?;
    Ok(PckModel { space: space.clone(), kriging, mle: None })
}

impl PckModel {
    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn kriging(&self) -> &KrigingModel {
        &self.kriging
    }

    pub fn basis(&self) -> &BasisSet {
        match self.kriging.trend() {
            Trend::Pce(b) => b,
            _ => unreachable!("PC-Kriging trend is always a PCE basis"),
        }
    }

    /// Likelihood search record; `None` for models built at fixed length scales.
    pub fn mle_report(&self) -> Option<&MleReport> {
        self.mle.as_ref()
    }

    /// The polynomial trend alone, as a PCE with coefficients `β`.
    pub fn trend_pce(&self) -> Result<PceModel> {
        PceModel::new(self.space.clone(), self.basis().clone(), self.kriging.beta().to_vec())
    }

    pub fn predict(&self, xi: &[f64]) -> Result<Prediction> {
        self.kriging.predict(xi)
    }

    pub fn predict_mean(&self, xi: &[f64]) -> Result<f64> {
        self.kriging.predict_mean(xi)
    }
}

pub fn pck_predict(model: &PckModel, xi: &[f64]) -> Result<Prediction> {
    model.predict(xi)
}

/// Monte Carlo mean and standard deviation of the predictor mean over the input distributions.
pub fn pck_moments(model: &PckModel, mc_count: usize, seed: u64) -> Result<Moments> {
    Ok(mc_moments_many(core::slice::from_ref(model), mc_count, seed)?[0])
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn finish(&self) -> Moments {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        Moments { mean: self.mean, std: crate::math::sqrt(var.max(0.0)) }
    }
}

/// [`pck_moments`] for many models over one shared set of draws.
///
/// When every model shares the input space, design and trend basis of the
/// first one (one model per output of a single study), basis values and
/// squared distances to the design are computed once per draw.
pub fn mc_moments_many(models: &[PckModel], mc_count: usize, seed: u64) -> Result<Vec<Moments>> {
    let Some(first) = models.first() else { return Ok(Vec::new()) };
    if models.iter().all(|m| m.space == first.space) {
        let krigings: Vec<&KrigingModel> = models.iter().map(|m| &m.kriging).collect();
        return kriging_mc_moments(&first.space, &krigings, mc_count, seed);
    }
    models.iter().map(|m| pck_moments(m, mc_count, seed)).collect()
}

/// Monte Carlo mean and standard deviation of Kriging predictor means over
/// `space`, for models trained in its standard coordinates.
///
/// All models see the same draws. Models sharing the design and trend of
/// the first one reuse its basis values and squared distances.
pub fn kriging_mc_moments(
    space: &ParameterSpace,
    models: &[&KrigingModel],
    mc_count: usize,
    seed: u64,
) -> Result<Vec<Moments>> {
    if mc_count == 0 {
        return Err(Error::InvalidArgument("Monte Carlo sample count must be positive".into()));
    }
    let Some(first) = models.first() else { return Ok(Vec::new()) };
    for m in models {
        if m.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: m.dim() });
        }
    }
    let shared = models.iter().all(|m| m.trend() == first.trend() && m.design() == first.design());
    if !shared {
        return models.iter().map(|m| kriging_mc_moments(space, &[*m], mc_count, seed).map(|v| v[0])).collect();
    }

    let dim = space.dim();
    let trend = first.trend();
    let x = first.design();
    let npts = x.rows();
    let weights: Vec<Vec<f64>> =
        models.iter().map(|m| m.kernel().theta().iter().map(|t| 1.0 / (t * t)).collect()).collect();

    let draws = monte_carlo(dim, mc_count, seed)?;
    let mut xi = vec![0.0; dim];
    let mut psi = vec![0.0; trend.len(dim)];
    let mut scratch = Vec::new();
    // squared distances to the design, one contiguous block per input dimension
    let mut d2 = vec![0.0; dim * npts];
    let mut h2 = vec![0.0; npts];
    let mut acc = vec![Welford::default(); models.len()];
    for u in draws.points.row_iter() {
        for ((s, &ui), p) in xi.iter_mut().zip(u).zip(space.params()) {
            *s = p.dist.unit_to_standard(ui);
        }
        trend.eval_into(&xi, &mut scratch, &mut psi);
        for (k, block) in d2.chunks_exact_mut(npts).enumerate() {
            for (d, row) in block.iter_mut().zip(x.row_iter()) {
                let t = xi[k] - row[k];
                *d = t * t;
            }
        }
        for ((m, w), a) in models.iter().zip(&weights).zip(acc.iter_mut()) {
            let family = m.kernel().family();
            h2.iter_mut().for_each(|h| *h = 0.0);
            for (block, &wk) in d2.chunks_exact(npts).zip(w) {
                axpy(wk, block, &mut h2);
            }
            family.from_scaled_sq_in_place(&mut h2);
            a.push(dot(&psi, m.beta()) + dot(&h2, m.alpha()));
        }
    }
    Ok(acc.iter().map(Welford::finish).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::fit_regression;
    use crate::doe::sobol_sequence;
    use crate::models::{ishigami, ishigami_reference};
    use crate::space::{Distribution, Parameter};
    use alloc::string::String;
    use core::f64::consts::PI;

    fn standard_design(space: &ParameterSpace, n: usize, skip: u64) -> DesignMatrix {
        sobol_sequence(space.dim(), n, skip).unwrap().unit_to_standard(space).unwrap()
    }

    #[test]
    fn order_zero_is_ordinary_kriging() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 30, 0);
        let y: Vec<f64> = d.points.row_iter().map(|r| (2.0 * r[0]).sin() + r[0] * r[1]).collect();
        let opts = MleOptions::default();
        let pck = fit_pck(&space, &d, &y, 0, KernelFamily::SquaredExponential, &opts).unwrap();
        let (ok, _) = mle_train(&d.points, &y, KernelFamily::SquaredExponential, Trend::Constant, &opts).unwrap();
        for i in 0..100 {
            let t = [-0.99 + 0.02 * i as f64, 0.8 - 0.016 * i as f64];
            let (a, b) = (pck.predict(&t).unwrap(), ok.predict(&t).unwrap());
            assert!((a.mean - b.mean).abs() <= 1e-10 * b.mean.abs().max(1.0));
            assert!((a.variance - b.variance).abs() <= 1e-10 * ok.sigma2());
        }
    }

    #[test]
    fn polynomial_absorbed_by_trend() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 20, 0);
        let f = |r: &[f64]| 1.0 + 0.5 * r[0] - r[1] * r[1] + 2.0 * r[0] * r[1];
        let y: Vec<f64> = d.points.row_iter().map(f).collect();
        let m = fit_pck(&space, &d, &y, 2, KernelFamily::Matern52, &MleOptions::default()).unwrap();
        let mean = y.iter().sum::<f64>() / 20.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 20.0;
        assert!(m.kriging().sigma2() <= 1e-10 * var);
        let pce = m.trend_pce().unwrap();
        for t in [[0.33, -0.71], [-0.9, 0.05], [0.6, 0.6]] {
            assert!((m.predict_mean(&t).unwrap() - f(&t)).abs() < 1e-6);
            assert!((m.predict_mean(&t).unwrap() - pce.predict(&t).unwrap()).abs() < 1e-8);
        }
        let reference = fit_regression(&space, m.basis(), &d, &y, None).unwrap();
        for (a, b) in pce.coeffs().iter().zip(reference.coeffs()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_slope_moments() {
        let space = ParameterSpace::unit_uniform(1).unwrap();
        let d = standard_design(&space, 10, 0);
        let y: Vec<f64> = d.points.row_iter().map(|r| 2.0 - 3.0 * r[0]).collect();
        let m = fit_pck(&space, &d, &y, 1, KernelFamily::SquaredExponential, &MleOptions::default()).unwrap();
        let mo = pck_moments(&m, DEFAULT_MC_COUNT, 1).unwrap();
        assert!((mo.std / (3.0 / 3f64.sqrt()) - 1.0).abs() < 0.01, "{mo:?}");
        assert!((mo.mean - 2.0).abs() < 0.02);
        assert_eq!(mo, pck_moments(&m, DEFAULT_MC_COUNT, 1).unwrap());
    }

    #[test]
    fn constant_surrogate_moments() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 12, 0);
        let m = fit_pck(&space, &d, &[4.5; 12], 1, KernelFamily::Matern52, &MleOptions::default()).unwrap();
        let mo = pck_moments(&m, 1000, 0).unwrap();
        assert!((mo.mean - 4.5).abs() < 1e-10 && mo.std < 1e-10);
    }

    #[test]
    fn shared_and_separate_paths_agree() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 15, 0);
        let y1: Vec<f64> = d.points.row_iter().map(|r| r[0].exp() + r[1]).collect();
        let y2: Vec<f64> = d.points.row_iter().map(|r| (r[0] * r[1]).cos()).collect();
        let opts = MleOptions::default();
        let m1 = fit_pck(&space, &d, &y1, 1, KernelFamily::SquaredExponential, &opts).unwrap();
        let m2 = fit_pck(&space, &d, &y2, 1, KernelFamily::SquaredExponential, &opts).unwrap();
        let both = mc_moments_many(&[m1.clone(), m2.clone()], 2000, 9).unwrap();
        for (m, mo) in [m1, m2].iter().zip(&both) {
            let draws = monte_carlo(2, 2000, 9).unwrap().unit_to_standard(&space).unwrap();
            let v: Vec<f64> = draws.points.row_iter().map(|r| m.predict_mean(r).unwrap()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let std = (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            assert!((mo.mean - mean).abs() < 1e-12 && (mo.std - std).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 6, 0);
        let e = fit_pck(&space, &d, &[0.0; 6], 2, KernelFamily::Matern52, &MleOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Underdetermined { samples: 6, terms: 6 }));
        assert!(alloc::format!("{e}").contains("lower the order"));
    }

    #[test]
    fn ishigami_two_hundred_samples() {
        let space = ParameterSpace::new(
            (1..=3)
                .map(|i| Parameter {
                    name: alloc::format!("x{i}"),
                    dist: Distribution::uniform(-PI, PI).unwrap(),
                    unit: String::new(),
                })
                .collect(),
        )
        .unwrap();
        let d = standard_design(&space, 200, 0);
        let y: Vec<f64> = d
            .points
            .row_iter()
            .map(|r| {
                let x = space.to_physical(r).unwrap();
                ishigami(&[x[0], x[1], x[2]], 7.0, 0.1)
            })
            .collect();
        let m = fit_pck(&space, &d, &y, 6, KernelFamily::SquaredExponential, &MleOptions::default()).unwrap();
        let mo = pck_moments(&m, DEFAULT_MC_COUNT, 0).unwrap();
        let r = ishigami_reference(7.0, 0.1);
        assert!((mo.mean - 3.5).abs() < 0.05, "{mo:?}");
        assert!((mo.std * mo.std / r.variance - 1.0).abs() < 0.05, "{mo:?}");
    }

    #[test]
    fn ordinary_kriging_moments_match_order_zero_pck() {
        let space = ParameterSpace::unit_uniform(2).unwrap();
        let d = standard_design(&space, 25, 0);
        let y: Vec<f64> = d.points.row_iter().map(|r| r[0] + 0.5 * r[1] * r[1]).collect();
        let opts = MleOptions::default();
        let pck = fit_pck(&space, &d, &y, 0, KernelFamily::SquaredExponential, &opts).unwrap();
        let (ok, _) = mle_train(&d.points, &y, KernelFamily::SquaredExponential, Trend::Constant, &opts).unwrap();
        let a = pck_moments(&pck, 5000, 3).unwrap();
        let b = kriging_mc_moments(&space, &[&ok], 5000, 3).unwrap()[0];
        assert!((a.mean - b.mean).abs() < 1e-10 && (a.std - b.std).abs() < 1e-10);
        assert!(kriging_mc_moments(&space, &[&ok], 0, 3).is_err());
    }
}
