use alloc::vec;
use alloc::vec::Vec;

use super::kernel::{correlation_matrix, factor_correlation, Kernel};
use super::trend::Trend;
use crate::linalg::{dot, norm2, Cholesky, Matrix, PivotedQr};
use crate::math;
use crate::{Error, Result};

/// Whitened trend matrices whose pivoted-QR condition estimate exceeds this are rejected.
const MAX_TREND_CONDITION: f64 = 1e12;

/// Predictive mean and variance at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Magnitude of a negative raw variance that was clamped to zero, else 0.
    pub clamped: f64,
}

/// Leave-one-out residuals at fixed hyperparameters (trend re-estimated per fold).
#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub residuals: Vec<f64>,
    /// Mean squared residual over the sample variance of `y` (raw when `y` is constant).
    pub error: f64,
}

/// Generalised least squares at a fixed correlation matrix.
#[derive(Debug, Clone)]
pub(crate) struct Gls {
    pub chol: Cholesky,
    /// `G = L⁻¹F`
    pub g: Matrix,
    pub qr: PivotedQr,
    pub beta: Vec<f64>,
    /// `L⁻¹(y − Fβ)`
    pub z: Vec<f64>,
    pub sigma2: f64,
    pub log_det: f64,
}

impl Gls {
    pub fn new(chol: Cholesky, f: &Matrix, y: &[f64]) -> Result<Self> {
        let g = chol.solve_lower_matrix(f);
        let qr = PivotedQr::new(&g);
        let condition = qr.condition_estimate();
        if !(condition <= MAX_TREND_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        let mut ly = y.to_vec();
        chol.solve_lower_in_place(&mut ly);
        let beta = qr.solve_least_squares(&ly);
        let gb = g.mul_vec(&beta);
        let z: Vec<f64> = ly.iter().zip(&gb).map(|(a, b)| a - b).collect();
        let sigma2 = dot(&z, &z) / y.len() as f64;
        let log_det = chol.log_det();
        Ok(Self { chol, g, qr, beta, z, sigma2, log_det })
    }

    /// Concentrated log-likelihood `−(N/2) ln σ² − ½ ln det R`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.z.len() as f64;
        -0.5 * n * math::ln(self.sigma2.max(f64::MIN_POSITIVE)) - 0.5 * self.log_det
    }

    /// `R⁻¹(y − Fβ)`
    pub fn alpha(&self) -> Vec<f64> {
        let mut a = self.z.clone();
        self.chol.solve_upper_in_place(&mut a);
        a
    }
}

/// A trained Kriging predictor over standard-domain inputs.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    x: Matrix,
    y: Vec<f64>,
    kernel: Kernel,
    trend: Trend,
    gls: Gls,
    alpha: Vec<f64>,
}

/// Kriging model for fixed hyperparameters.
///
/// `x` holds one standard-domain design point per row. Needs more points than
/// trend functions and a factorisable correlation matrix.
pub fn fit_given_theta(x: &Matrix, y: &[f64], kernel: Kernel, trend: Trend) -> Result<KrigingModel> {
    let (n, dim) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if kernel.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: kernel.dim() });
    }
    let p = trend.len(dim);
    if n <= p {
        return Err(Error::Underdetermined { samples: n, terms: p });
    }
    check_finite(x.as_slice(), "design")?;
    check_finite(y, "response")?;
    let r = correlation_matrix(&kernel, x)?;
    let chol = factor_correlation(&r, x)?;
    let f = trend.matrix(x)?;
    let gls = Gls::new(chol, &f, y)?;
    let alpha = gls.alpha();
    Ok(KrigingModel { x: x.clone(), y: y.to_vec(), kernel, trend, gls, alpha })
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|a| !a.is_finite()) {
        Some(i) => Err(Error::InvalidArgument(alloc::format!("non-finite {what} value at position {i}"))),
        None => Ok(()),
    }
}

impl KrigingModel {
    pub fn design(&self) -> &Matrix {
        &self.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn trend(&self) -> &Trend {
        &self.trend
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn beta(&self) -> &[f64] {
        &self.gls.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.gls.sigma2
    }

    /// `R⁻¹(y − Fβ)`
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn log_likelihood(&self) -> f64 {
        self.gls.log_likelihood()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        check_finite(x, "prediction input")
    }

    fn cross_correlation(&self, x: &[f64]) -> Vec<f64> {
        self.x.row_iter().map(|xi| self.kernel.correlation(x, xi)).collect()
    }

    fn trend_at(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.gls.beta.len()];
        self.trend.eval_into(x, &mut Vec::new(), &mut f);
        f
    }

    /// Predictor mean `fᵀβ + rᵀR⁻¹(y − Fβ)`.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(dot(&self.trend_at(x), &self.gls.beta) + dot(&self.cross_correlation(x), &self.alpha))
    }

    /// Predictor mean and variance `σ²(1 − rᵀR⁻¹r + uᵀ(FᵀR⁻¹F)⁻¹u)`, `u = FᵀR⁻¹r − f`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_point(x)?;
        let f = self.trend_at(x);
        let mut w = self.cross_correlation(x);
        let mean = dot(&f, &self.gls.beta) + dot(&w, &self.alpha);
        self.gls.chol.solve_lower_in_place(&mut w);
        let g = self.gls.g.tr_mul_vec(&w);
        let u: Vec<f64> = g.iter().zip(&f).map(|(a, b)| a - b).collect();
        let raw = self.gls.sigma2 * (1.0 - dot(&w, &w) + self.gls.qr.gram_inverse_quadratic(&u));
        let (variance, clamped) = if raw < 0.0 { (0.0, -raw) } else { (raw, 0.0) };
        Ok(Prediction { mean, variance, clamped })
    }

    /// Leave-one-out residuals `e_i = [R⁻¹(y − Fβ)]_i / M_ii` with
    /// `M = R⁻¹ − R⁻¹F(FᵀR⁻¹F)⁻¹FᵀR⁻¹`.
    pub fn loo(&self) -> LooReport {
        let n = self.y.len();
        let linv = self.gls.chol.lower_inverse();
        let mut col = vec![0.0; n];
        let residuals: Vec<f64> = (0..n)
            .map(|i| {
                for (k, c) in col.iter_mut().enumerate() {
                    *c = linv[(k, i)];
                }
                let q = self.gls.qr.thin_qt(&col);
                let m = dot(&col, &col) - dot(&q, &q);
                self.alpha[i] / m
            })
            .collect();
        let mean = self.y.iter().sum::<f64>() / n as f64;
        let var = self.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let mse = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
        LooReport { error: if var > 0.0 { mse / var } else { mse }, residuals }
    }

    /// `‖FᵀR⁻¹(y − Fβ)‖ / ‖FᵀR⁻¹y‖`, zero at an exact GLS solution.
    pub fn gls_residual(&self) -> f64 {
        let f = self.trend.matrix(&self.x).expect("trend dimension checked at fit");
        let num = norm2(&f.tr_mul_vec(&self.alpha));
        let ry = self.gls.chol.solve(&self.y);
        let den = norm2(&f.tr_mul_vec(&ry));
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{rng_from_seed, sobol_sequence};
    use crate::kriging::{KernelFamily, DEFAULT_NUGGET};
    use rand::Rng;

    /// Gauss-Jordan inverse with partial pivoting.
    fn gj_inverse(a: &Matrix) -> Matrix {
        let n = a.rows();
        let mut m = a.clone();
        let mut inv = Matrix::identity(n);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs())).unwrap();
            for k in 0..n {
                let t = m[(c, k)];
                m[(c, k)] = m[(p, k)];
                m[(p, k)] = t;
                let t = inv[(c, k)];
                inv[(c, k)] = inv[(p, k)];
                inv[(p, k)] = t;
            }
            let d = m[(c, c)];
            for k in 0..n {
                m[(c, k)] /= d;
                inv[(c, k)] /= d;
            }
            for i in 0..n {
                if i != c {
                    let f = m[(i, c)];
                    for k in 0..n {
                        m[(i, k)] -= f * m[(c, k)];
                        inv[(i, k)] -= f * inv[(c, k)];
                    }
                }
            }
        }
        inv
    }

    struct Dense {
        beta: Vec<f64>,
        sigma2: f64,
        mean: f64,
        variance: f64,
    }

    /// The predictor equations evaluated literally with explicit inverses.
    fn dense_oracle(x: &Matrix, y: &[f64], k: &Kernel, trend: &Trend, x0: &[f64]) -> Dense {
        let n = x.rows();
        let ri = gj_inverse(&correlation_matrix(k, x).unwrap());
        let f = trend.matrix(x).unwrap();
        let ft_ri = f.transpose().matmul(&ri);
        let a_inv = gj_inverse(&ft_ri.matmul(&f));
        let beta = a_inv.mul_vec(&ft_ri.mul_vec(y));
        let res: Vec<f64> = y.iter().zip(f.mul_vec(&beta)).map(|(a, b)| a - b).collect();
        let sigma2 = dot(&res, &ri.mul_vec(&res)) / n as f64;
        let r: Vec<f64> = x.row_iter().map(|xi| k.correlation(x0, xi)).collect();
        let mut f0 = vec![0.0; beta.len()];
        trend.eval_into(x0, &mut Vec::new(), &mut f0);
        let mean = dot(&f0, &beta) + dot(&r, &ri.mul_vec(&res));
        let u: Vec<f64> = ft_ri.mul_vec(&r).iter().zip(&f0).map(|(a, b)| a - b).collect();
        let variance = sigma2 * (1.0 - dot(&r, &ri.mul_vec(&r)) + dot(&u, &a_inv.mul_vec(&u)));
        Dense { beta, sigma2, mean, variance }
    }

    fn random_instance(seed: u64) -> (Matrix, Vec<f64>, Kernel, Trend) {
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(6..=20);
        let dim = rng.random_range(1..=3);
        let x = Matrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x.row_iter().map(|r| r.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + r[0] * r[0]).collect();
        // length scales tied to the closest pair keep R well conditioned, so
        // the comparisons below measure the algebra rather than the data
        let mut sep = f64::INFINITY;
        for i in 0..n {
            for j in 0..i {
                let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                sep = sep.min(d2.sqrt());
            }
        }
        let theta = (0..dim).map(|_| sep * rng.random_range(0.5..2.0)).collect();
        let family = if seed % 2 == 0 { KernelFamily::SquaredExponential } else { KernelFamily::Matern52 };
        let trend = if seed % 3 == 0 { Trend::Linear } else { Trend::Constant };
        (x, y, Kernel::new(family, theta, DEFAULT_NUGGET).unwrap(), trend)
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..20 {
            let (x, y, k, trend) = random_instance(seed);
            let m = fit_given_theta(&x, &y, k.clone(), trend.clone()).unwrap();
            let probe = [0.13, -0.42, 0.77];
            let x0 = &probe[..x.cols()];
            let o = dense_oracle(&x, &y, &k, &trend, x0);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            for (a, b) in m.beta().iter().zip(&o.beta) {
                assert!(rel(*a, *b) < 1e-8, "seed {seed}: beta {a} vs {b}");
            }
            assert!(rel(m.sigma2(), o.sigma2) < 1e-8);
            let p = m.predict(x0).unwrap();
            assert!(rel(p.mean, o.mean) < 1e-8);
            // the variance is a difference of O(1) terms, so it is compared on the σ² scale
            assert!((p.variance - o.variance).abs() < 1e-8 * o.sigma2, "seed {seed}: {} vs {}", p.variance, o.variance);
            assert!(m.gls_residual() < 1e-8);
        }
    }

    #[test]
    fn interpolates_training_data() {
        for seed in 0..200 {
            let (x, y, k, trend) = random_instance(seed);
            let m = fit_given_theta(&x, &y, k, trend).unwrap();
            let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (i, xi) in x.row_iter().enumerate() {
                let p = m.predict(xi).unwrap();
                assert!((p.mean - y[i]).abs() <= 1e-6 * ymax, "seed {seed} n {} d {} {:?}: {} vs {}", x.rows(), x.cols(), m.kernel(), p.mean, y[i]);
                assert!(p.variance <= 1e-8 * m.sigma2(), "seed {seed} var {} s2 {}", p.variance, m.sigma2());
                assert!(p.clamped <= 1e-8 * m.sigma2());
            }
        }
    }

    #[test]
    fn identity_correlation_gives_ordinary_least_squares() {
        let x = Matrix::from_fn(5, 1, |i, _| i as f64);
        let y = [1.0, 4.0, 2.0, 8.0, 5.0];
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![1e-3], 0.0).unwrap();
        let m = fit_given_theta(&x, &y, k, Trend::Constant).unwrap();
        assert!((m.beta()[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn trend_only_data() {
        let x = sobol_sequence(2, 12, 0).unwrap().points;
        let y: Vec<f64> = x.row_iter().map(|r| 1.5 - 2.0 * r[0] + 0.25 * r[1]).collect();
        let k = Kernel::new(KernelFamily::Matern52, vec![0.4, 0.4], DEFAULT_NUGGET).unwrap();
        let m = fit_given_theta(&x, &y, k, Trend::Linear).unwrap();
        for (a, b) in m.beta().iter().zip([1.5, -2.0, 0.25]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(m.sigma2() < 1e-18);
    }

    #[test]
    fn far_field_reverts_to_trend() {
        let x = Matrix::from_rows(&[[0.0], [0.3], [0.7]]).unwrap();
        let y = [1.0, 2.0, 0.5];
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![0.2], DEFAULT_NUGGET).unwrap();
        let m = fit_given_theta(&x, &y, k.clone(), Trend::Constant).unwrap();
        let p = m.predict(&[50.0]).unwrap();
        assert!((p.mean - m.beta()[0]).abs() < 1e-12);
        assert!(p.variance >= m.sigma2());
        let o = dense_oracle(&x, &y, &k, &Trend::Constant, &[50.0]);
        assert!((p.variance - o.variance).abs() < 1e-10 * o.variance);
    }

    #[test]
    fn row_permutation_invariance() {
        let (x, y, k, trend) = random_instance(4);
        let m = fit_given_theta(&x, &y, k.clone(), trend.clone()).unwrap();
        let n = x.rows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 5 + 3) % n).collect();
        let mut seen = vec![false; n];
        perm.iter().for_each(|&p| seen[p] = true);
        let perm: Vec<usize> = if seen.iter().all(|s| *s) { perm } else { (0..n).rev().collect() };
        let xp = Matrix::from_fn(n, x.cols(), |i, j| x[(perm[i], j)]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let mp = fit_given_theta(&xp, &yp, k, trend).unwrap();
        for t in 0..10 {
            let x0: Vec<f64> = (0..x.cols()).map(|j| -0.9 + 0.19 * t as f64 + 0.05 * j as f64).collect();
            let (a, b) = (m.predict(&x0).unwrap(), mp.predict(&x0).unwrap());
            assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
        }
    }

    #[test]
    fn loo_matches_refits() {
        let (x, y, k, trend) = random_instance(6);
        let m = fit_given_theta(&x, &y, k.clone(), trend.clone()).unwrap();
        let loo = m.loo();
        let n = x.rows();
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let xi = Matrix::from_fn(n - 1, x.cols(), |r, c| x[(keep[r], c)]);
            let yi: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
            let mi = fit_given_theta(&xi, &yi, k.clone(), trend.clone()).unwrap();
            let e = y[i] - mi.predict_mean(x.row(i)).unwrap();
            assert!((loo.residuals[i] - e).abs() < 1e-6 * e.abs().max(1e-3), "{i}: {} vs {e}", loo.residuals[i]);
        }
    }

    #[test]
    fn preconditions() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let k = Kernel::new(KernelFamily::SquaredExponential, vec![1.0], DEFAULT_NUGGET).unwrap();
        assert!(matches!(fit_given_theta(&x, &[1.0, 2.0], k.clone(), Trend::Linear), Err(Error::Underdetermined { .. })));
        assert!(fit_given_theta(&x, &[1.0], k.clone(), Trend::Constant).is_err());
        assert!(fit_given_theta(&x, &[1.0, f64::NAN], k.clone(), Trend::Constant).is_err());
        let m = fit_given_theta(&x, &[1.0, 2.0], k, Trend::Constant).unwrap();
        assert!(m.predict(&[0.0, 1.0]).is_err());
        assert!(m.predict(&[f64::INFINITY]).is_err());
    }
}
