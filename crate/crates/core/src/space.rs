//! Uncertain input parameters and the isoprobabilistic map between physical
//! coordinates and the standard domain of the orthogonal polynomials.
//!
//! Uniform inputs map affinely onto `[-1, 1]` (Legendre support), normal
//! inputs onto the standard normal (Hermite weight).

use alloc::string::String;
use alloc::vec::Vec;

use crate::special::inverse_normal_cdf;
use crate::{Error, Result};

/// Marginal distribution of one uncertain input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, stddev: f64 },
}

impl Distribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidArgument(alloc::format!(
                "uniform bounds must satisfy lo < hi (got lo={lo}, hi={hi})"
            )));
        }
        Ok(Self::Uniform { lo, hi })
    }

    /// Uniform interval of half-width `percent`% of `mean` around `mean`.
    pub fn uniform_percent(mean: f64, percent: f64) -> Result<Self> {
        let half = (mean * percent / 100.0).abs();
        Self::uniform(mean - half, mean + half)
    }

    pub fn normal(mean: f64, stddev: f64) -> Result<Self> {
        if !mean.is_finite() || !(stddev > 0.0) || !stddev.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "normal standard deviation must be positive (got {stddev})"
            )));
        }
        Ok(Self::Normal { mean, stddev })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Normal { mean, .. } => mean,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform { .. })
    }

    fn to_standard(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Uniform { lo, hi } => {
                if !(lo..=hi).contains(&x) {
                    return None;
                }
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                Some(if x == lo {
                    -1.0
                } else if x == hi {
                    1.0
                } else {
                    ((x - mid) / half).clamp(-1.0, 1.0)
                })
            }
            Self::Normal { mean, stddev } => x.is_finite().then(|| (x - mean) / stddev),
        }
    }

    fn to_physical(&self, xi: f64) -> Option<f64> {
        match *self {
            Self::Uniform { lo, hi } => {
                if !(-1.0..=1.0).contains(&xi) {
                    return None;
                }
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                Some(if xi == -1.0 {
                    lo
                } else if xi == 1.0 {
                    hi
                } else {
                    (mid + half * xi).clamp(lo, hi)
                })
            }
            Self::Normal { mean, stddev } => xi.is_finite().then(|| mean + stddev * xi),
        }
    }

    /// Inverse CDF applied to a unit-hypercube coordinate.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Normal { mean, stddev } => mean + stddev * inverse_normal_cdf(u),
        }
    }

    /// Unit-hypercube coordinate mapped straight to the standard domain.
    pub fn unit_to_standard(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { .. } => 2.0 * u - 1.0,
            Self::Normal { .. } => inverse_normal_cdf(u),
        }
    }
}

/// One named uncertain input.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub dist: Distribution,
    pub unit: String,
}

/// Ordered set of uncertain inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidArgument("parameter space needs at least one input".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if p.name.trim().is_empty() {
                return Err(Error::InvalidArgument(alloc::format!("parameter {i} has an empty name")));
            }
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidArgument(alloc::format!("duplicate parameter name `{}`", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// Every input `Uniform(-1, 1)`, named `x1 … xn`.
    pub fn unit_uniform(n: usize) -> Result<Self> {
        let params = (0..n)
            .map(|i| Parameter {
                name: alloc::format!("x{}", i + 1),
                dist: Distribution::Uniform { lo: -1.0, hi: 1.0 },
                unit: String::new(),
            })
            .collect();
        Self::new(params)
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    /// Physical values at the distribution means.
    pub fn nominal(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.dist.mean()).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        self.params
            .iter()
            .zip(x)
            .map(|(p, &v)| {
                p.dist
                    .to_standard(v)
                    .ok_or_else(|| Error::OutOfSupport { name: p.name.clone(), value: v })
            })
            .collect()
    }

    pub fn to_physical(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi.len())?;
        self.params
            .iter()
            .zip(xi)
            .map(|(p, &v)| {
                p.dist
                    .to_physical(v)
                    .ok_or_else(|| Error::OutOfSupport { name: p.name.clone(), value: v })
            })
            .collect()
    }
}

/// Parses the one-parameter-per-line text format.
///
/// ```text
/// # name, kind, bounds
/// InletPressure, uniform, mean=904388, unc=5%, unit=Pa
/// x,             uniform, lo=0, hi=2
/// z,             normal,  mean=5, std=2
/// ```
///
/// Percent entries expand to `Uniform(mean(1 - u/100), mean(1 + u/100))`.
/// Order of the lines is kept.
pub fn parse_space(text: &str) -> Result<ParameterSpace> {
    let mut params: Vec<Parameter> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let param = parse_line(body, line)?;
        if params.iter().any(|p| p.name == param.name) {
            return Err(parse_error(line, Some(&param.name), "duplicate parameter name".into()));
        }
        params.push(param);
    }
    if params.is_empty() {
        return Err(parse_error(0, None, "no parameters defined".into()));
    }
    ParameterSpace::new(params)
}

fn parse_error(line: usize, name: Option<&str>, message: String) -> Error {
    Error::Parse { line, name: name.map(String::from), message }
}

fn parse_line(body: &str, line: usize) -> Result<Parameter> {
    let mut fields = body.split(',').map(str::trim);
    let name = fields.next().unwrap_or("");
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(parse_error(line, None, alloc::format!("invalid parameter name `{name}`")));
    }
    let err = |message: String| parse_error(line, Some(name), message);
    let kind = fields.next().ok_or_else(|| err("missing distribution kind".into()))?;

    let (mut lo, mut hi, mut mean, mut unc, mut std) = (None, None, None, None, None);
    let mut unit = String::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(alloc::format!("expected key=value, found `{field}`")))?;
        if key == "unit" {
            unit = value.into();
            continue;
        }
        let number = |v: &str| -> Result<f64> {
            let x: f64 = v.parse().map_err(|_| err(alloc::format!("`{key}` is not a number: `{v}`")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(err(alloc::format!("`{key}` must be finite")))
            }
        };
        let slot = match key {
            "lo" => &mut lo,
            "hi" => &mut hi,
            "mean" => &mut mean,
            "unc" => &mut unc,
            "std" => &mut std,
            _ => return Err(err(alloc::format!("unknown key `{key}`"))),
        };
        if slot.is_some() {
            return Err(err(alloc::format!("`{key}` given twice")));
        }
        *slot = Some(if key == "unc" { number(value.strip_suffix('%').unwrap_or(value).trim())? } else { number(value)? });
    }

    let dist = match (kind.to_ascii_lowercase().as_str(), lo, hi, mean, unc, std) {
        ("uniform", Some(lo), Some(hi), None, None, None) => {
            if lo >= hi {
                return Err(err(alloc::format!("degenerate interval: lo={lo} must be below hi={hi}")));
            }
            Distribution::Uniform { lo, hi }
        }
        ("uniform", None, None, Some(mean), Some(unc), None) => {
            if !(unc > 0.0) || mean == 0.0 {
                return Err(err(alloc::format!("degenerate interval: mean={mean}, unc={unc}%")));
            }
            Distribution::uniform_percent(mean, unc).map_err(|e| err(alloc::format!("{e}")))?
        }
        ("uniform", ..) => return Err(err("uniform needs either lo=,hi= or mean=,unc=%".into())),
        ("normal", None, None, Some(mean), None, Some(std)) => {
            if !(std > 0.0) {
                return Err(err(alloc::format!("standard deviation must be positive, got {std}")));
            }
            Distribution::Normal { mean, stddev: std }
        }
        ("normal", ..) => return Err(err("normal needs mean= and std=".into())),
        (other, ..) => return Err(err(alloc::format!("unknown distribution kind `{other}`"))),
    };
    Ok(Parameter { name: name.into(), dist, unit })
}
