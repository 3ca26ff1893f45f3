//! Versioned JSON files of fitted surrogates.
//!
//! A file holds the parameter space, the output labels and one record per
//! output. Polynomial bases are stored as family tags plus the multi-index
//! list; Kriging-based models store the shared standard-coordinate design,
//! the responses, the kernel and the fitted `β` and `σ²`. Loading refits
//! Kriging models at the stored length scales and checks that `β` and `σ²`
//! come out as recorded. All numbers are written in shortest round-trip
//! form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uqforge_core::chaos::{BasisSet, Family, FitDiagnostics, MultiIndex, PceModel};
use uqforge_core::doe::{DesignForm, DesignMatrix, DoeKind, Provenance};
use uqforge_core::kriging::{fit_given_theta, Kernel, KernelFamily, KrigingModel, Trend};
use uqforge_core::linalg::Matrix;
use uqforge_core::pck::fit_pck_given_basis;
use uqforge_core::space::{Distribution, Parameter, ParameterSpace};

use crate::config::SurrogateKind;
use crate::surrogate::{Surrogate, SurrogateSet};
use crate::{Error, Result};

pub const FORMAT: &str = "uqforge-surrogate";
pub const VERSION: u32 = 1;

/// Largest relative change of `β` or `σ²` accepted when a Kriging model is rebuilt.
const REFIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct FileV1 {
    format: String,
    version: u32,
    kind: SurrogateKind,
    space: Vec<ParamRecord>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<BasisRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<Vec<Vec<f64>>>,
    outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct ParamRecord {
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    unit: String,
    #[serde(flatten)]
    dist: DistRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "dist", rename_all = "lowercase")]
enum DistRecord {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct BasisRecord {
    families: Vec<String>,
    indices: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct OutputRecord {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostics: Option<DiagnosticsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct DiagnosticsRecord {
    samples: usize,
    residual_norm: f64,
    /// Absent when infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loo_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct KernelRecord {
    family: String,
    theta: Vec<f64>,
    nugget: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn space_record(space: &ParameterSpace) -> Vec<ParamRecord> {
    space
        .params()
        .iter()
        .map(|p| ParamRecord {
            name: p.name.clone(),
            unit: p.unit.clone(),
            dist: match p.dist {
                Distribution::Uniform { lo, hi } => DistRecord::Uniform { lo, hi },
                Distribution::Normal { mean, stddev } => DistRecord::Normal { mean, std: stddev },
            },
        })
        .collect()
}

fn basis_record(b: &BasisSet) -> BasisRecord {
    BasisRecord {
        families: b.families().iter().map(|f| f.as_str().to_string()).collect(),
        indices: b.indices().iter().map(|i| i.degrees().to_vec()).collect(),
    }
}

fn kernel_record(k: &Kernel) -> KernelRecord {
    KernelRecord { family: k.family().as_str().into(), theta: k.theta().to_vec(), nugget: k.nugget() }
}

fn kriging_record(label: &str, m: &KrigingModel) -> OutputRecord {
    OutputRecord {
        label: label.into(),
        kernel: Some(kernel_record(m.kernel())),
        y: Some(m.responses().to_vec()),
        beta: Some(m.beta().to_vec()),
        sigma2: Some(m.sigma2()),
        ..Default::default()
    }
}

/// Serialises a surrogate set to pretty-printed JSON.
pub fn to_json(set: &SurrogateSet) -> Result<String> {
    let mut file = FileV1 {
        format: FORMAT.into(),
        version: VERSION,
        kind: set.kind,
        space: space_record(&set.space),
        labels: set.labels.clone(),
        basis: None,
        trend: None,
        design: None,
        outputs: Vec::with_capacity(set.models.len()),
    };
    for (label, model) in set.labels.iter().zip(&set.models) {
        let record = match model {
            Surrogate::Pce(m) => {
                file.basis.get_or_insert_with(|| basis_record(m.basis()));
                OutputRecord {
                    label: label.clone(),
                    coeffs: Some(m.coeffs().to_vec()),
                    diagnostics: m.diagnostics().map(|d| DiagnosticsRecord {
                        samples: d.samples,
                        residual_norm: d.residual_norm,
                        condition_estimate: finite(d.condition_estimate),
                        loo_error: finite(d.loo_error),
                    }),
                    ..Default::default()
                }
            }
            Surrogate::Kriging(m) => {
                file.trend.get_or_insert_with(|| m.trend().as_str().into());
                file.design.get_or_insert_with(|| m.design().row_iter().map(<[f64]>::to_vec).collect());
                kriging_record(label, m)
            }
            Surrogate::Pck(m) => {
                file.basis.get_or_insert_with(|| basis_record(m.basis()));
                file.design.get_or_insert_with(|| m.kriging().design().row_iter().map(<[f64]>::to_vec).collect());
                kriging_record(label, m.kriging())
            }
        };
        file.outputs.push(record);
    }
    serde_json::to_string_pretty(&file).map_err(|e| Error::Precondition(format!("cannot serialise surrogate: {e}")))
}

pub fn save(path: &Path, set: &SurrogateSet) -> Result<()> {
    crate::csvio::write_text(path, &(to_json(set)? + "\n"))
}

pub fn load(path: &Path) -> Result<SurrogateSet> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    from_json(&text, path)
}

pub fn from_json(text: &str, path: &Path) -> Result<SurrogateSet> {
    let bad = |m: String| Error::schema(path, m);
    let file: FileV1 = serde_json::from_str(text).map_err(|e| bad(format!("not a surrogate file: {e}")))?;
    if file.format != FORMAT {
        return Err(bad(format!("format `{}` is not `{FORMAT}`", file.format)));
    }
    if file.version != VERSION {
        return Err(bad(format!("unsupported surrogate file version {} (this build reads {VERSION})", file.version)));
    }
    if file.labels.len() != file.outputs.len() || file.labels.iter().zip(&file.outputs).any(|(l, o)| *l != o.label) {
        return Err(bad("labels and output records disagree".into()));
    }
    let params = file
        .space
        .iter()
        .map(|p| {
            let dist = match p.dist {
                DistRecord::Uniform { lo, hi } => Distribution::uniform(lo, hi),
                DistRecord::Normal { mean, std } => Distribution::normal(mean, std),
            }
            .map_err(|e| bad(format!("parameter `{}`: {e}", p.name)))?;
            Ok(Parameter { name: p.name.clone(), dist, unit: p.unit.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let space = ParameterSpace::new(params).map_err(|e| bad(e.to_string()))?;

    let basis = match &file.basis {
        Some(b) => Some(parse_basis(b, &space).map_err(bad)?),
        None => None,
    };
    let need = |what: &str, ok: bool| if ok { Ok(()) } else { Err(bad(format!("{} surrogate lacks `{what}`", file.kind))) };
    let design = match &file.design {
        Some(rows) => {
            let m = Matrix::from_rows(rows).map_err(|e| bad(format!("design: {e}")))?;
            if m.cols() != space.dim() {
                return Err(bad(format!("design has {} columns for {} inputs", m.cols(), space.dim())));
            }
            Some(m)
        }
        None => None,
    };

    let mut models = Vec::with_capacity(file.outputs.len());
    for o in &file.outputs {
        let ctx = |m: String| bad(format!("output `{}`: {m}", o.label));
        let model = match file.kind {
            SurrogateKind::Pce => {
                need("basis", basis.is_some())?;
                let coeffs = o.coeffs.clone().ok_or_else(|| ctx("missing coeffs".into()))?;
                let mut m = PceModel::new(space.clone(), basis.clone().expect("checked"), coeffs).map_err(|e| ctx(e.to_string()))?;
                if let Some(d) = &o.diagnostics {
                    m = m.with_diagnostics(FitDiagnostics {
                        samples: d.samples,
                        residual_norm: d.residual_norm,
                        condition_estimate: d.condition_estimate.unwrap_or(f64::INFINITY),
                        loo_error: d.loo_error.unwrap_or(f64::INFINITY),
                    });
                }
                Surrogate::Pce(m)
            }
            SurrogateKind::Kriging | SurrogateKind::Pck => {
                need("design", design.is_some())?;
                let x = design.as_ref().expect("checked");
                let (Some(k), Some(y), Some(beta), Some(sigma2)) = (&o.kernel, &o.y, &o.beta, o.sigma2) else {
                    return Err(ctx("Kriging records need kernel, y, beta and sigma2".into()));
                };
                let family: KernelFamily = k.family.parse().map_err(|e| ctx(format!("{e}")))?;
                let kernel = Kernel::new(family, k.theta.clone(), k.nugget).map_err(|e| ctx(e.to_string()))?;
                let model = if file.kind == SurrogateKind::Pck {
                    need("basis", basis.is_some())?;
                    let b = basis.clone().expect("checked");
                    let d = DesignMatrix::new(x.clone(), DesignForm::Standard, Provenance { kind: DoeKind::External, seed: 0, skip: 0 });
                    Surrogate::Pck(fit_pck_given_basis(&space, &d, y, b, kernel).map_err(|e| ctx(e.to_string()))?)
                } else {
                    let trend = match file.trend.as_deref() {
                        Some("constant") | None => Trend::Constant,
                        Some("linear") => Trend::Linear,
                        Some(t) => return Err(ctx(format!("unknown trend `{t}`"))),
                    };
                    Surrogate::Kriging(fit_given_theta(x, y, kernel, trend).map_err(|e| ctx(e.to_string()))?)
                };
                let m = model.kriging().expect("Kriging-based");
                let scale = beta.iter().fold(m.sigma2().sqrt(), |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
                let beta_ok = beta.len() == m.beta().len()
                    && beta.iter().zip(m.beta()).all(|(a, b)| (a - b).abs() <= REFIT_TOLERANCE * scale);
                let sigma_ok = (sigma2 - m.sigma2()).abs() <= REFIT_TOLERANCE * sigma2.abs().max(scale * scale * 1e-16);
                if !beta_ok || !sigma_ok {
                    return Err(ctx("rebuilt Kriging model does not reproduce the stored beta/sigma2".into()));
                }
                model
            }
        };
        models.push(model);
    }
    Ok(SurrogateSet { kind: file.kind, space, labels: file.labels, models })
}

fn parse_basis(b: &BasisRecord, space: &ParameterSpace) -> std::result::Result<BasisSet, String> {
    if b.families.len() != space.dim() {
        return Err(format!("basis has {} families for {} inputs", b.families.len(), space.dim()));
    }
    let families = b
        .families
        .iter()
        .map(|f| match f.as_str() {
            "legendre" => Ok(Family::Legendre),
            "hermite" => Ok(Family::Hermite),
            other => Err(format!("unknown polynomial family `{other}`")),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let indices = b
        .indices
        .iter()
        .map(|i| MultiIndex::new(i.clone()).map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    BasisSet::new(indices, families).map_err(|e| e.to_string())
}
