use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::space::{Distribution, ParameterSpace};
use crate::{Error, Result};

/// One-dimensional orthonormal polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Normalised Legendre, orthonormal under `U(-1, 1)`.
    Legendre,
    /// Normalised probabilists' Hermite, orthonormal under `N(0, 1)`.
    Hermite,
}

impl Family {
    pub fn for_distribution(dist: &Distribution) -> Self {
        match dist {
            Distribution::Uniform { .. } => Self::Legendre,
            Distribution::Normal { .. } => Self::Hermite,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Legendre => "legendre",
            Self::Hermite => "hermite",
        }
    }

    /// Writes `ψ₀(x) … ψ_d(x)` into `out` (length `d + 1`).
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        let Some(first) = out.first_mut() else { return };
        *first = 1.0;
        if out.len() == 1 {
            return;
        }
        match self {
            Self::Legendre => {
                // classical P_n recurrence, then scale by sqrt(2n + 1)
                let (mut p0, mut p1) = (1.0, x);
                out[1] = math::sqrt(3.0) * x;
                for n in 1..out.len() - 1 {
                    let nf = n as f64;
                    let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
                    p0 = p1;
                    p1 = p2;
                    out[n + 1] = math::sqrt(2.0 * nf + 3.0) * p2;
                }
            }
            Self::Hermite => {
                // ψ_{n+1} = (x ψ_n - sqrt(n) ψ_{n-1}) / sqrt(n + 1)
                out[1] = x;
                for n in 1..out.len() - 1 {
                    let nf = n as f64;
                    out[n + 1] = (x * out[n] - math::sqrt(nf) * out[n - 1]) / math::sqrt(nf + 1.0);
                }
            }
        }
    }

    pub fn eval(&self, degree: usize, x: f64) -> f64 {
        let mut buf = vec![0.0; degree + 1];
        self.eval_all(x, &mut buf);
        buf[degree]
    }
}

/// Per-dimension polynomial degrees `b = (b₁ … bₙ)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidArgument("multi-index needs at least one dimension".into()));
        }
        Ok(Self(degrees))
    }

    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }

    /// Dimensions with a nonzero degree.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &d)| d > 0).map(|(i, _)| i)
    }
}

/// `(n + p)! / (n! p!)`, or `None` on overflow.
pub fn basis_size(n: usize, p: usize) -> Option<usize> {
    // C(n + p, p) built incrementally stays integral at every step
    let mut c: usize = 1;
    for k in 1..=p {
        c = c.checked_mul(n + k)? / k;
    }
    Some(c)
}

/// Ordered multi-index set with the polynomial family of each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    indices: Vec<MultiIndex>,
    families: Vec<Family>,
    max_degree: usize,
}

impl BasisSet {
    pub fn new(indices: Vec<MultiIndex>, families: Vec<Family>) -> Result<Self> {
        let n = families.len();
        if n == 0 || indices.is_empty() {
            return Err(Error::InvalidArgument("basis needs at least one dimension and one term".into()));
        }
        if let Some(bad) = indices.iter().find(|m| m.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.dim() });
        }
        let max_degree = indices.iter().flat_map(|m| m.degrees().iter()).copied().max().unwrap_or(0) as usize;
        Ok(Self { indices, families, max_degree })
    }

    /// Total-degree set `{b : |b| ≤ p}` in graded-lex order, families matched
    /// to the space's distributions.
    pub fn total_degree(space: &ParameterSpace, p: usize) -> Result<Self> {
        let families = space.params().iter().map(|q| Family::for_distribution(&q.dist)).collect();
        Self::new(total_degree_indices(space.dim(), p)?, families)
    }

    /// Total-degree set with one family for every dimension.
    pub fn total_degree_uniform_family(n: usize, p: usize, family: Family) -> Result<Self> {
        Self::new(total_degree_indices(n, p)?, vec![family; n])
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn position(&self, index: &[u32]) -> Option<usize> {
        self.indices.iter().position(|m| m.degrees() == index)
    }

    /// `ψ_b(ξ)` for every term, written into `out` (length `len()`).
    /// `scratch` holds the 1-D tables; it is resized as needed.
    pub fn eval_into(&self, xi: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        let stride = self.max_degree + 1;
        scratch.resize(stride * self.dim(), 0.0);
        for (d, (fam, &x)) in self.families.iter().zip(xi).enumerate() {
            fam.eval_all(x, &mut scratch[d * stride..(d + 1) * stride]);
        }
        for (o, m) in out.iter_mut().zip(&self.indices) {
            *o = m
                .degrees()
                .iter()
                .enumerate()
                .filter(|(_, &b)| b > 0)
                .map(|(d, &b)| scratch[d * stride + b as usize])
                .product();
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: xi.len() });
        }
        let mut out = vec![0.0; self.len()];
        let mut scratch = Vec::new();
        self.eval_into(xi, &mut scratch, &mut out);
        Ok(out)
    }
}

/// Every `b ∈ ℕⁿ` with `|b| ≤ p`, graded by total degree and, within a degree,
/// by decreasing leading exponents: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.
pub fn total_degree_indices(n: usize, p: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::InvalidArgument("basis dimension must be positive".into()));
    }
    let count = basis_size(n, p)
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("basis size C({}, {p}) overflows", n + p)))?;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0u32; n];
    for degree in 0..=p {
        fill_degree(&mut current, 0, degree as u32, &mut out);
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

fn fill_degree(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    for d in (0..=remaining).rev() {
        current[pos] = d;
        fill_degree(current, pos + 1, remaining - d, out);
    }
    current[pos] = 0;
}
