//! Gauss quadrature rules for the uniform measure on `[-1, 1]` and the
//! standard normal measure.
//!
//! Nodes come from Newton iteration on the classical (non-normalised)
//! Legendre and physicists' Hermite recurrences, so the rules are independent
//! of the orthonormal bases in [`crate::chaos`] and can serve as a check on
//! them. Weights are normalised to sum to one (probability measures).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math;

/// Quadrature nodes and weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss–Legendre rule for the uniform probability measure on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = math::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // standard weight 2 / ((1 - x²) P'ₙ²), halved for the probability measure
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss–Hermite rule for the standard normal probability measure.
///
/// Computed for the physicists' weight `exp(-t²)` with orthonormal Hermite
/// functions (the Numerical Recipes scheme), then mapped via `x = √2 t`,
/// `w = w_t / √π`.
pub fn gauss_hermite(n: usize) -> Rule {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    let mut t = vec![0.0; n];
    let mut wt = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => math::sqrt(2.0 * nf + 1.0) - 1.85575 * math::powf(2.0 * nf + 1.0, -0.16667),
            1 => z - 1.14 * math::powf(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * math::sqrt(2.0 / (jf + 1.0)) * p2 - math::sqrt(jf / (jf + 1.0)) * p3;
            }
            pp = math::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        t[i] = z;
        t[n - 1 - i] = -z;
        wt[i] = 2.0 / (pp * pp);
        wt[n - 1 - i] = wt[i];
    }
    let sqrt_pi = math::sqrt(PI);
    let mut nodes: Vec<f64> = t.iter().map(|v| v * core::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = wt.iter().map(|w| w / sqrt_pi).collect();
    nodes.reverse();
    weights.reverse();
    Rule { nodes, weights }
}
