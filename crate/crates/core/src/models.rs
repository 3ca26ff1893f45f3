//! Built-in analytic models: the Ishigami benchmark and a quasi-1D isentropic
//! converging–diverging nozzle standing in for a CFD solve.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::space::{Distribution, Parameter, ParameterSpace};
use crate::{Error, Result};

/// Ishigami function `sin x₁ + a sin² x₂ + b x₃⁴ sin x₁`, inputs on `U(-π, π)³`.
pub fn ishigami(x: &[f64; 3], a: f64, b: f64) -> f64 {
    let s1 = math::sin(x[0]);
    let s2 = math::sin(x[1]);
    let x3 = x[2] * x[2];
    s1 + a * s2 * s2 + b * x3 * x3 * s1
}

/// Closed-form moments and Sobol' indices of the Ishigami function.
#[derive(Debug, Clone, Copy)]
pub struct IshigamiReference {
    pub mean: f64,
    pub variance: f64,
    pub first_order: [f64; 3],
    pub total: [f64; 3],
}

pub fn ishigami_reference(a: f64, b: f64) -> IshigamiReference {
    let pi2 = core::f64::consts::PI * core::f64::consts::PI;
    let pi4 = pi2 * pi2;
    let pi8 = pi4 * pi4;
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0) * (1.0 + b * pi4 / 5.0);
    let v2 = a * a / 8.0;
    let v13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    let variance = a * a / 8.0 + b * pi4 / 5.0 + b * b * pi8 / 18.0 + 0.5;
    IshigamiReference {
        mean: a / 2.0,
        variance,
        first_order: [v1 / variance, v2 / variance, 0.0],
        total: [(v1 + v13) / variance, v2 / variance, v13 / variance],
    }
}

/// Nozzle length along the centreline (m).
pub const NOZZLE_LENGTH: f64 = 0.123;
/// Inlet half-height (m).
pub const INLET_HALF_HEIGHT: f64 = 0.018;
/// Throat half-height (m).
pub const THROAT_HALF_HEIGHT: f64 = 0.0042;
/// Fraction of the length occupied by the converging section.
pub const CONVERGING_FRACTION: f64 = 0.4;
/// Design exit Mach number, reached at [`NOMINAL_GAMMA`].
pub const DESIGN_EXIT_MACH: f64 = 1.5;
pub const NOMINAL_GAMMA: f64 = 1.01767;
pub const DEFAULT_STATIONS: usize = 50;

/// Names of the seven nozzle inputs, in the order [`nozzle_q1d`] expects.
pub const NOZZLE_INPUTS: [&str; 7] = [
    "InletPressure",
    "InletTemperature",
    "GammaValue",
    "GasConstant",
    "Viscosity",
    "ThermalConductivity",
    "AcentricFactor",
];

/// Nominal value and uniform half-width (percent of nominal) of each nozzle input.
pub const NOZZLE_NOMINAL: [(f64, f64); 7] = [
    (904388.0, 5.0),
    (542.13, 1.0),
    (1.01767, 1.0),
    (35.17, 2.0),
    (1.21409e-5, 2.0),
    (0.030542828, 2.0),
    (0.524, 5.0),
];

/// Units matching [`NOZZLE_INPUTS`].
pub const NOZZLE_UNITS: [&str; 7] = ["Pa", "K", "-", "J/(kg K)", "Pa s", "W/(m K)", "-"];

/// The seven uniform nozzle inputs built from [`NOZZLE_NOMINAL`].
pub fn nozzle_space() -> ParameterSpace {
    let params = NOZZLE_INPUTS
        .iter()
        .zip(NOZZLE_NOMINAL)
        .zip(NOZZLE_UNITS)
        .map(|((name, (mean, pct)), unit)| Parameter {
            name: (*name).into(),
            dist: Distribution::uniform_percent(mean, pct).expect("positive nominal values"),
            unit: unit.into(),
        })
        .collect();
    ParameterSpace::new(params).expect("distinct names")
}

/// Field prefixes of the nozzle output blocks.
pub const NOZZLE_FIELDS: [&str; 4] = ["p", "T", "M", "rho"];

/// `A/A*` for Mach `m` and heat-capacity ratio `gamma`.
pub fn area_ratio(m: f64, gamma: f64) -> f64 {
    let gm1 = gamma - 1.0;
    let base = (2.0 / (gamma + 1.0)) * (1.0 + 0.5 * gm1 * m * m);
    let expo = (gamma + 1.0) / (2.0 * gm1);
    math::exp(expo * math::ln(base)) / m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowBranch {
    Subsonic,
    Supersonic,
}

const SUBSONIC_BRACKET: (f64, f64) = (1e-3, 1.0);
const SUPERSONIC_BRACKET: (f64, f64) = (1.0, 10.0);

/// Inverts the area–Mach relation on one branch by bisection until the
/// relative residual is at most 1e-12 (or the bracket collapses to one ulp).
pub fn mach_from_area_ratio(ratio: f64, gamma: f64, branch: FlowBranch) -> Result<f64> {
    if !(ratio.is_finite() && gamma > 1.0) {
        return Err(Error::AreaMachNoRoot { ratio });
    }
    if ratio <= 1.0 {
        // only the throat reaches A/A* = 1; below that is rounding noise
        return if ratio > 1.0 - 1e-12 { Ok(1.0) } else { Err(Error::AreaMachNoRoot { ratio }) };
    }
    let (mut lo, mut hi) = match branch {
        FlowBranch::Subsonic => SUBSONIC_BRACKET,
        FlowBranch::Supersonic => SUPERSONIC_BRACKET,
    };
    // g(m) = A/A*(m) - ratio: decreasing on the subsonic branch, increasing on the supersonic one
    let g = |m: f64| area_ratio(m, gamma) - ratio;
    let sign = if branch == FlowBranch::Subsonic { -1.0 } else { 1.0 };
    if sign * g(lo) > 0.0 || sign * g(hi) < 0.0 {
        return Err(Error::AreaMachNoRoot { ratio });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = g(mid);
        if r.abs() <= 1e-12 * ratio {
            return Ok(mid);
        }
        if sign * r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Planar converging–diverging geometry with linear walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NozzleGeometry {
    pub length: f64,
    pub throat_x: f64,
    pub inlet_half_height: f64,
    pub throat_half_height: f64,
    pub exit_half_height: f64,
}

impl NozzleGeometry {
    /// Reference nozzle; the exit height gives Mach 1.5 at the nominal gamma.
    pub fn reference() -> Self {
        let exit_ratio = area_ratio(DESIGN_EXIT_MACH, NOMINAL_GAMMA);
        Self {
            length: NOZZLE_LENGTH,
            throat_x: CONVERGING_FRACTION * NOZZLE_LENGTH,
            inlet_half_height: INLET_HALF_HEIGHT,
            throat_half_height: THROAT_HALF_HEIGHT,
            exit_half_height: THROAT_HALF_HEIGHT * exit_ratio,
        }
    }

    pub fn half_height(&self, x: f64) -> f64 {
        if x <= self.throat_x {
            let t = x / self.throat_x;
            self.inlet_half_height + (self.throat_half_height - self.inlet_half_height) * t
        } else if x >= self.length {
            self.exit_half_height
        } else {
            let t = (x - self.throat_x) / (self.length - self.throat_x);
            self.throat_half_height + (self.exit_half_height - self.throat_half_height) * t
        }
    }

    pub fn branch(&self, x: f64) -> FlowBranch {
        if x <= self.throat_x {
            FlowBranch::Subsonic
        } else {
            FlowBranch::Supersonic
        }
    }

    /// Equispaced centreline stations from inlet to exit (both included).
    pub fn stations(&self, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => alloc::vec![self.length],
            _ => (0..count)
                .map(|k| self.length * (k as f64 / (count - 1) as f64))
                .collect(),
        }
    }

    pub fn mach_at(&self, x: f64, gamma: f64) -> Result<f64> {
        let ratio = self.half_height(x) / self.throat_half_height;
        mach_from_area_ratio(ratio, gamma, self.branch(x))
    }
}

/// Physical inputs of the nozzle stand-in. Viscosity, thermal conductivity and
/// acentric factor are carried along but do not enter isentropic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NozzleInputs {
    pub inlet_pressure: f64,
    pub inlet_temperature: f64,
    pub gamma: f64,
    pub gas_constant: f64,
    pub viscosity: f64,
    pub thermal_conductivity: f64,
    pub acentric_factor: f64,
}

impl NozzleInputs {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 7 {
            return Err(Error::DimensionMismatch { expected: 7, found: x.len() });
        }
        let inputs = Self {
            inlet_pressure: x[0],
            inlet_temperature: x[1],
            gamma: x[2],
            gas_constant: x[3],
            viscosity: x[4],
            thermal_conductivity: x[5],
            acentric_factor: x[6],
        };
        if !(inputs.gamma > 1.0 && inputs.gas_constant > 0.0 && inputs.inlet_temperature > 0.0 && inputs.inlet_pressure > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "nozzle needs gamma > 1 and positive R, T0, p0 (got gamma={}, R={}, T0={}, p0={})",
                inputs.gamma, inputs.gas_constant, inputs.inlet_temperature, inputs.inlet_pressure
            )));
        }
        Ok(inputs)
    }
}

/// Centreline profiles `[p(·), T(·), M(·), ρ(·)]` at `stations` equispaced
/// points, for the reference geometry. Inlet conditions are stagnation values.
pub fn nozzle_q1d(x: &[f64], stations: usize) -> Result<Vec<f64>> {
    nozzle_q1d_with(&NozzleGeometry::reference(), &NozzleInputs::from_slice(x)?, stations)
}

pub fn nozzle_q1d_with(geometry: &NozzleGeometry, inputs: &NozzleInputs, stations: usize) -> Result<Vec<f64>> {
    if stations == 0 {
        return Err(Error::InvalidArgument("nozzle needs at least one station".into()));
    }
    let g = inputs.gamma;
    let gm1 = g - 1.0;
    let mut out = alloc::vec![0.0; 4 * stations];
    for (k, x) in geometry.stations(stations).into_iter().enumerate() {
        let m = geometry.mach_at(x, g)?;
        let factor = 1.0 + 0.5 * gm1 * m * m;
        let t = inputs.inlet_temperature / factor;
        let p = inputs.inlet_pressure * math::exp(-(g / gm1) * math::ln(factor));
        out[k] = p;
        out[stations + k] = t;
        out[2 * stations + k] = m;
        out[3 * stations + k] = p / (inputs.gas_constant * t);
    }
    Ok(out)
}

/// Output labels `p_000 … rho_{S-1}` matching [`nozzle_q1d`].
pub fn nozzle_labels(stations: usize) -> Vec<String> {
    NOZZLE_FIELDS
        .iter()
        .flat_map(|f| (0..stations).map(move |k| format!("{f}_{k:03}")))
        .collect()
}
