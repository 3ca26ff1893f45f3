use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kernel::{inverse_squares, Kernel, KernelFamily, DEFAULT_NUGGET};
use super::model::{fit_given_theta, Gls, KrigingModel};
use super::trend::Trend;
use crate::doe::sobol_sequence;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::math;
use crate::{Error, Result};

/// Settings of the maximum-likelihood search.
#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    /// Lower bound on every length scale.
    pub lower: f64,
    /// Upper bound on every length scale.
    pub upper: f64,
    /// Number of local searches, started from a Sobol design in `ln θ`.
    pub starts: usize,
    /// Skip of the Sobol start design.
    pub seed: u64,
    /// Iteration cap per local search.
    pub max_iter: usize,
    pub nugget: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { lower: 1e-2, upper: 1e2, starts: 8, seed: 0, max_iter: 100, nugget: DEFAULT_NUGGET }
    }
}

/// Outcome of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct StartReport {
    pub initial_theta: Vec<f64>,
    /// `-∞` when the starting point could not be evaluated.
    pub initial_log_likelihood: f64,
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleReport {
    pub starts: Vec<StartReport>,
    /// Index into `starts` of the returned optimum.
    pub best: usize,
}

impl MleReport {
    pub fn evaluations(&self) -> usize {
        self.starts.iter().map(|s| s.evaluations).sum()
    }
}

/// Trains length scales by maximising the concentrated log-likelihood
/// `−(N/2) ln σ²(θ) − ½ ln det R(θ)` with `β` and `σ²` profiled out.
///
/// Each start runs a projected BFGS search over `ln θ` in the box given by
/// `options`; the best end point over all starts is refitted and returned.
pub fn mle_train(
    x: &Matrix,
    y: &[f64],
    family: KernelFamily,
    trend: Trend,
    options: &MleOptions,
) -> Result<(KrigingModel, MleReport)> {
    let (n, dim) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let p = trend.len(dim);
    if n < p + 2 {
        return Err(Error::Underdetermined { samples: n, terms: p + 2 });
    }
    if !(options.lower > 0.0 && options.lower < options.upper && options.upper.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "length-scale bounds [{}, {}] are not a valid positive interval",
            options.lower, options.upper
        )));
    }
    if options.starts == 0 {
        return Err(Error::InvalidArgument("at least one likelihood start is needed".into()));
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite training data".into()));
    }

    let objective = Objective::new(x, y, family, &trend, options)?;
    let (lo, hi) = (math::ln(options.lower), math::ln(options.upper));
    let design = sobol_sequence(dim, options.starts, options.seed)?;

    let mut starts = Vec::with_capacity(options.starts);
    let mut last_error = String::new();
    for u in design.points.row_iter() {
        let rho0: Vec<f64> = u.iter().map(|u| lo + u * (hi - lo)).collect();
        let initial_theta = objective.theta(&rho0);
        let mut value = |rho: &[f64]| match objective.state(rho) {
            Ok(s) => Some(s),
            Err(e) => {
                last_error = alloc::format!("{e}");
                None
            }
        };
        let run = minimize_box(&mut value, |s| objective.gradient(s), &rho0, lo, hi, options.max_iter);
        starts.push(match run {
            Some(r) => StartReport {
                initial_theta,
                initial_log_likelihood: -r.initial_value,
                theta: objective.theta(&r.x),
                log_likelihood: -r.value,
                iterations: r.iterations,
                evaluations: r.evaluations,
            },
            None => StartReport {
                initial_theta: initial_theta.clone(),
                initial_log_likelihood: f64::NEG_INFINITY,
                theta: initial_theta,
                log_likelihood: f64::NEG_INFINITY,
                iterations: 0,
                evaluations: 1,
            },
        });
    }

    // first maximum wins ties so the result does not depend on float noise in later starts
    let mut best = None;
    for (i, s) in starts.iter().enumerate() {
        if s.log_likelihood.is_finite() && best.map_or(true, |b: usize| s.log_likelihood > starts[b].log_likelihood) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(Error::Optimisation(alloc::format!(
            "all {} likelihood starts failed; last error: {last_error}",
            options.starts
        )));
    };
    let kernel = Kernel::new(family, starts[best].theta.clone(), options.nugget)?;
    let model = fit_given_theta(x, y, kernel, trend)?;
    Ok((model, MleReport { starts, best }))
}

/// Negative concentrated log-likelihood over `ρ = ln θ` with cached pairwise distances.
struct Objective<'a> {
    y: &'a [f64],
    f: Matrix,
    family: KernelFamily,
    nugget: f64,
    bounds: (f64, f64),
    n: usize,
    dim: usize,
    /// `(x_ik − x_jk)²` for every pair `j < i`, row-major by pair
    sq: Vec<f64>,
}

struct State {
    theta_inv_sq: Vec<f64>,
    /// scaled squared distance and correlation per pair
    h2: Vec<f64>,
    r: Vec<f64>,
    gls: Gls,
    value: f64,
}

impl<'a> Objective<'a> {
    fn new(x: &Matrix, y: &'a [f64], family: KernelFamily, trend: &Trend, options: &MleOptions) -> Result<Self> {
        let (n, dim) = (x.rows(), x.cols());
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * dim);
        for i in 0..n {
            for j in 0..i {
                sq.extend(x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)));
            }
        }
        Ok(Self {
            y,
            f: trend.matrix(x)?,
            family,
            nugget: options.nugget,
            bounds: (options.lower, options.upper),
            n,
            dim,
            sq,
        })
    }

    /// `θ = e^ρ`, clamped so that round-off never leaves the box.
    fn theta(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().map(|r| math::exp(*r).clamp(self.bounds.0, self.bounds.1)).collect()
    }

    fn state(&self, rho: &[f64]) -> Result<State> {
        let w = inverse_squares(&self.theta(rho));
        let npairs = self.n * (self.n - 1) / 2;
        let h2: Vec<f64> = self
            .sq
            .chunks_exact(self.dim)
            .map(|d| d.iter().zip(&w).fold(0.0, |acc, (d, w)| acc + d * w))
            .collect();
        let mut r = h2.clone();
        self.family.from_scaled_sq_in_place(&mut r);
        debug_assert_eq!(r.len(), npairs);
        let mut m = Matrix::zeros(self.n, self.n);
        let mut p = 0;
        for i in 0..self.n {
            m.row_mut(i)[..i].copy_from_slice(&r[p..p + i]);
            m[(i, i)] = 1.0 + self.nugget;
            p += i;
        }
        let gls = Gls::new(Cholesky::new(&m)?, &self.f, self.y)?;
        let value = -gls.log_likelihood();
        if !value.is_finite() {
            return Err(Error::Optimisation("non-finite likelihood".into()));
        }
        Ok(State { theta_inv_sq: w, h2, r, gls, value })
    }

    /// Gradient of the negative log-likelihood in `ρ`:
    /// `−Σ_{i<j} W_ij ∂R_ij/∂ρ_k` with `W = ααᵀ/σ² − R⁻¹`.
    fn gradient(&self, s: &State) -> Vec<f64> {
        let alpha = s.gls.alpha();
        let rinv = s.gls.chol.inverse();
        let sigma2 = s.gls.sigma2.max(f64::MIN_POSITIVE);
        let mut g = vec![0.0; self.dim];
        let mut p = 0;
        for i in 0..self.n {
            let ri = rinv.row(i);
            for j in 0..i {
                let w = alpha[i] * alpha[j] / sigma2 - ri[j];
                let c = w * self.family.log_scale_derivative_factor(s.h2[p], s.r[p]);
                let d = &self.sq[p * self.dim..(p + 1) * self.dim];
                for (gk, dk) in g.iter_mut().zip(d) {
                    *gk += c * dk;
                }
                p += 1;
            }
        }
        g.iter_mut().zip(&s.theta_inv_sq).for_each(|(gk, w)| *gk *= -w);
        g
    }
}

impl State {
    fn value(&self) -> f64 {
        self.value
    }
}

struct Minimum {
    x: Vec<f64>,
    value: f64,
    initial_value: f64,
    iterations: usize,
    evaluations: usize,
}

/// Projected BFGS with Armijo backtracking on the box `[lo, hi]ⁿ`.
///
/// Returns `None` when the starting point cannot be evaluated. Points that
/// fail to evaluate during the search are treated as infinitely bad.
fn minimize_box(
    value: &mut impl FnMut(&[f64]) -> Option<State>,
    gradient: impl Fn(&State) -> Vec<f64>,
    x0: &[f64],
    lo: f64,
    hi: f64,
    max_iter: usize,
) -> Option<Minimum> {
    const ARMIJO: f64 = 1e-4;
    const MAX_STEP: f64 = 2.0;
    const MIN_STEP: f64 = 1e-6;
    // log-likelihood differences are invariant to rescaling y, so absolute
    // tolerances are meaningful; changes below these carry no information
    const STEP_TOL: f64 = 1e-6;
    const WINDOW: usize = 5;
    const WINDOW_TOL: f64 = 1e-2;
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(lo, hi)).collect();
    let mut state = value(&x)?;
    let mut evaluations = 1;
    let initial_value = state.value();
    let mut g = gradient(&state);
    let mut h = Matrix::identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut history = Vec::with_capacity(max_iter + 1);
    history.push(initial_value);

    while iterations < max_iter {
        let fx = state.value();
        let free: Vec<bool> = (0..n).map(|i| !((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0))).collect();
        let pg = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg <= 1e-6 * fx.abs().max(1.0) {
            break;
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| if free[i] { -(0..n).filter(|&j| free[j]).map(|j| h[(i, j)] * g[j]).sum::<f64>() } else { 0.0 })
            .collect();
        if dot(&d, &g) >= 0.0 {
            h = Matrix::identity(n);
            fresh = true;
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax > MAX_STEP {
            d.iter_mut().for_each(|v| *v *= MAX_STEP / dmax);
        }

        // halve once, then shrink fast: repeated failures mean the model is
        // far from quadratic and small steps are what is left
        let mut t = 1.0;
        let mut accepted = None;
        while t * MAX_STEP.min(dmax) > MIN_STEP {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| (a + t * b).clamp(lo, hi)).collect();
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if s.iter().all(|v| *v == 0.0) {
                break;
            }
            evaluations += 1;
            if let Some(st) = value(&xn) {
                if st.value() <= fx + ARMIJO * dot(&g, &s) {
                    accepted = Some((xn, s, st));
                    break;
                }
            }
            t *= if t == 1.0 { 0.5 } else { 0.2 };
        }
        let Some((xn, s, st)) = accepted else { break };
        iterations += 1;
        let gn = gradient(&st);
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * math::sqrt(dot(&s, &s) * dot(&yv, &yv)) {
            if fresh {
                let scale = sy / dot(&yv, &yv);
                h = Matrix::from_fn(n, n, |i, j| if i == j { scale } else { 0.0 });
                fresh = false;
            }
            bfgs_update(&mut h, &s, &yv, sy);
        }
        history.push(st.value());
        let stalled = history.len() > WINDOW && history[history.len() - 1 - WINDOW] - st.value() < WINDOW_TOL;
        let converged = fx - st.value() < STEP_TOL || stalled;
        x = xn;
        g = gn;
        state = st;
        if converged {
            break;
        }
    }
    Some(Minimum { x, value: state.value(), initial_value, iterations, evaluations })
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`, `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut Matrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
