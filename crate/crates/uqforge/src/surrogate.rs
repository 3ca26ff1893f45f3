//! One surrogate per model output, all of the same kind and trained on one
//! shared design.

use uqforge_core::chaos::{BasisSet, PceFitter, PceModel};
use uqforge_core::doe::DesignMatrix;
use uqforge_core::kriging::{mle_train, KernelFamily, KrigingModel, MleOptions, Trend};
use uqforge_core::linalg::Matrix;
use uqforge_core::pck::{fit_pck, kriging_mc_moments, mc_moments_many, Moments, PckModel};
use uqforge_core::sensitivity::{compare_indices, saltelli_sobol, SobolComparison, SobolIndices};
use uqforge_core::space::ParameterSpace;

use crate::config::{KrigingTrend, Project, SurrogateKind};
use crate::runner::{par_map, ResponseSet};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum Surrogate {
    Pce(PceModel),
    Kriging(KrigingModel),
    Pck(PckModel),
}

impl Surrogate {
    /// Mean and, for Kriging-based models, predictive variance at a standard point.
    pub fn predict(&self, xi: &[f64]) -> Result<(f64, Option<f64>)> {
        Ok(match self {
            Self::Pce(m) => (m.predict(xi)?, None),
            Self::Kriging(m) => {
                let p = m.predict(xi)?;
                (p.mean, Some(p.variance))
            }
            Self::Pck(m) => {
                let p = m.predict(xi)?;
                (p.mean, Some(p.variance))
            }
        })
    }

    pub fn predict_mean(&self, xi: &[f64]) -> uqforge_core::Result<f64> {
        match self {
            Self::Pce(m) => m.predict(xi),
            Self::Kriging(m) => m.predict_mean(xi),
            Self::Pck(m) => m.predict_mean(xi),
        }
    }

    /// The polynomial part: the expansion itself, or the PC-Kriging trend.
    pub fn pce(&self) -> Result<Option<PceModel>> {
        Ok(match self {
            Self::Pce(m) => Some(m.clone()),
            Self::Kriging(_) => None,
            Self::Pck(m) => Some(m.trend_pce()?),
        })
    }

    pub fn kriging(&self) -> Option<&KrigingModel> {
        match self {
            Self::Pce(_) => None,
            Self::Kriging(m) => Some(m),
            Self::Pck(m) => Some(m.kriging()),
        }
    }

    /// Normalised leave-one-out error.
    pub fn loo_error(&self) -> f64 {
        match self {
            Self::Pce(m) => m.diagnostics().map_or(f64::NAN, |d| d.loo_error),
            Self::Kriging(m) => m.loo().error,
            Self::Pck(m) => m.kriging().loo().error,
        }
    }
}

/// Settings of one fitting run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub kind: SurrogateKind,
    pub order: usize,
    pub kernel: KernelFamily,
    pub trend: KrigingTrend,
    pub mle: MleOptions,
    pub jobs: usize,
}

impl FitSettings {
    pub fn from_project(p: &Project) -> Self {
        let s = &p.config.surrogate;
        Self { kind: s.kind, order: s.order, kernel: p.kernel, trend: s.trend, mle: p.mle_options(), jobs: p.config.run.jobs }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateSet {
    pub kind: SurrogateKind,
    pub space: ParameterSpace,
    pub labels: Vec<String>,
    pub models: Vec<Surrogate>,
}

/// Fits one surrogate per response column on the rows that did not fail.
pub fn fit_all(space: &ParameterSpace, design: &DesignMatrix, responses: &ResponseSet, settings: &FitSettings) -> Result<SurrogateSet> {
    if design.len() != responses.len() {
        return Err(Error::Precondition(format!(
            "design has {} rows but the responses have {}",
            design.len(),
            responses.len()
        )));
    }
    let keep: Vec<usize> = (0..design.len()).filter(|&i| !responses.failed[i]).collect();
    if keep.is_empty() {
        return Err(Error::Precondition("every model evaluation failed; nothing to fit".into()));
    }
    let sub = DesignMatrix::new(
        Matrix::from_fn(keep.len(), design.dim(), |i, j| design.points[(keep[i], j)]),
        design.form,
        design.provenance,
    );
    let columns: Vec<Vec<f64>> =
        (0..responses.labels.len()).map(|j| keep.iter().map(|&i| responses.values[(i, j)]).collect()).collect();

    let models: Vec<Result<Surrogate>> = match settings.kind {
        SurrogateKind::Pce => {
            let basis = BasisSet::total_degree(space, settings.order)?;
            let fitter = PceFitter::new(space, &basis, &sub, None)?;
            par_map(columns.len(), settings.jobs, |j| Ok(Surrogate::Pce(fitter.fit(&columns[j])?)))
        }
        SurrogateKind::Kriging => {
            let trend = match settings.trend {
                KrigingTrend::Constant => Trend::Constant,
                KrigingTrend::Linear => Trend::Linear,
            };
            par_map(columns.len(), settings.jobs, |j| {
                let (m, _) = mle_train(&sub.points, &columns[j], settings.kernel, trend.clone(), &settings.mle)?;
                Ok(Surrogate::Kriging(m))
            })
        }
        SurrogateKind::Pck => par_map(columns.len(), settings.jobs, |j| {
            Ok(Surrogate::Pck(fit_pck(space, &sub, &columns[j], settings.order, settings.kernel, &settings.mle)?))
        }),
    };
    let models = models
        .into_iter()
        .zip(&responses.labels)
        .map(|(m, label)| m.map_err(|e| Error::Precondition(format!("fitting output `{label}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurrogateSet { kind: settings.kind, space: space.clone(), labels: responses.labels.clone(), models })
}

impl SurrogateSet {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Means and standard deviations of every output: analytic for PCE,
    /// `mc_count` shared surrogate draws otherwise.
    pub fn moments(&self, mc_count: usize, seed: u64) -> Result<Vec<Moments>> {
        match self.kind {
            SurrogateKind::Pce => Ok(self
                .models
                .iter()
                .map(|m| match m {
                    Surrogate::Pce(p) => {
                        let (mean, var) = p.moments();
                        Moments { mean, std: var.sqrt() }
                    }
                    _ => unreachable!("uniform kinds"),
                })
                .collect()),
            SurrogateKind::Pck => {
                let pcks: Vec<PckModel> = self
                    .models
                    .iter()
                    .map(|m| match m {
                        Surrogate::Pck(p) => p.clone(),
                        _ => unreachable!("uniform kinds"),
                    })
                    .collect();
                Ok(mc_moments_many(&pcks, mc_count, seed)?)
            }
            SurrogateKind::Kriging => {
                let ks: Vec<&KrigingModel> = self.models.iter().filter_map(Surrogate::kriging).collect();
                Ok(kriging_mc_moments(&self.space, &ks, mc_count, seed)?)
            }
        }
    }

    /// Saltelli/Jansen indices of output `j` computed on the surrogate, set
    /// beside the coefficient-based indices of its polynomial part.
    pub fn sobol(&self, j: usize, base_count: usize, seed: u64, tolerance: f64) -> Result<SobolReport> {
        let model = &self.models[j];
        let space = &self.space;
        let mc = saltelli_sobol(|x| model.predict_mean(&space.to_standard(x)?), space, base_count, seed)?;
        let names: Vec<&str> = space.names().collect();
        let comparison = match model.pce()? {
            Some(pce) => Some(compare_indices(&names, &mc, &pce.sobol(), tolerance)?),
            None => None,
        };
        Ok(SobolReport { label: self.labels[j].clone(), names: names.iter().map(|s| s.to_string()).collect(), mc, comparison })
    }
}

/// Sobol' indices of one output.
#[derive(Debug, Clone)]
pub struct SobolReport {
    pub label: String,
    pub names: Vec<String>,
    pub mc: SobolIndices,
    /// Present when the surrogate has a polynomial part.
    pub comparison: Option<SobolComparison>,
}

impl SobolReport {
    /// `input,S1,ST,S1_pce,ST_pce,delta`; the polynomial columns stay empty
    /// for plain Kriging.
    pub fn to_csv(&self) -> String {
        match &self.comparison {
            Some(c) => c.to_csv(),
            None => {
                let mut s = String::from("input,S1,ST,S1_pce,ST_pce,delta\n");
                for (k, name) in self.names.iter().enumerate() {
                    s.push_str(&format!("{name},{:?},{:?},,,\n", self.mc.first_order[k], self.mc.total[k]));
                }
                s
            }
        }
    }

    pub fn pretty(&self) -> String {
        let mut s = format!("Sobol' indices of `{}` ({} surrogate evaluations", self.label, self.mc.evaluation_count);
        if self.mc.zero_variance {
            s.push_str(", zero output variance");
        }
        s.push_str(")\n");
        match &self.comparison {
            Some(c) => s.push_str(&c.to_string()),
            None => {
                let w = self.names.iter().map(String::len).max().unwrap_or(5).max(5);
                s.push_str(&format!("{:<w$}  {:>9}  {:>9}\n", "input", "S1", "ST"));
                for (k, name) in self.names.iter().enumerate() {
                    s.push_str(&format!("{name:<w$}  {:>9.4}  {:>9.4}\n", self.mc.first_order[k], self.mc.total[k]));
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uqforge_core::doe::{scale, sobol_sequence};
    use uqforge_core::models::ishigami;
    use uqforge_core::space::{Distribution, Parameter};

    fn settings(kind: SurrogateKind, order: usize) -> FitSettings {
        FitSettings { kind, order, kernel: KernelFamily::SquaredExponential, trend: KrigingTrend::Constant, mle: MleOptions::default(), jobs: 2 }
    }

    fn plane() -> (ParameterSpace, DesignMatrix, ResponseSet) {
        let space = ParameterSpace::new(
            ["u", "v"].iter().map(|n| Parameter { name: n.to_string(), dist: Distribution::Uniform { lo: 0.0, hi: 2.0 }, unit: String::new() }).collect(),
        )
        .unwrap();
        let unit = sobol_sequence(2, 24, 0).unwrap();
        let std = unit.unit_to_standard(&space).unwrap();
        let phys = scale(&unit, &space).unwrap();
        let mut values = Matrix::zeros(24, 2);
        for (i, r) in phys.points.row_iter().enumerate() {
            values[(i, 0)] = 1.0 + r[0] + 0.5 * r[1];
            values[(i, 1)] = 4.0;
        }
        let r = ResponseSet { labels: vec!["lin".into(), "flat".into()], values, failed: vec![false; 24], diagnostics: vec![None; 24] };
        (space, std, r)
    }

    #[test]
    fn all_kinds_reproduce_a_plane() {
        let (space, design, r) = plane();
        for kind in [SurrogateKind::Pce, SurrogateKind::Kriging, SurrogateKind::Pck] {
            let set = fit_all(&space, &design, &r, &settings(kind, 1)).unwrap();
            let (m, v) = set.models[0].predict(&[0.2, -0.4]).unwrap();
            let tol = if kind == SurrogateKind::Kriging { 1e-3 } else { 1e-8 };
            assert!((m - (1.0 + 1.2 + 0.5 * 0.6)).abs() < tol, "{kind}: {m}");
            assert_eq!(v.is_some(), kind != SurrogateKind::Pce);
            let mo = set.moments(20_000, 0).unwrap();
            assert!((mo[0].mean - 2.5).abs() < 0.01, "{kind}: {mo:?}");
            assert!((mo[1].mean - 4.0).abs() < 1e-9 && mo[1].std < 1e-6, "{kind}: {mo:?}");
        }
    }

    #[test]
    fn failed_rows_are_left_out() {
        let (space, design, mut r) = plane();
        r.failed[3] = true;
        r.values.row_mut(3).fill(f64::NAN);
        let set = fit_all(&space, &design, &r, &settings(SurrogateKind::Pck, 1)).unwrap();
        assert_eq!(set.models[0].kriging().unwrap().design().rows(), 23);
    }

    #[test]
    fn order_too_high_is_a_precondition_error() {
        let (space, design, r) = plane();
        let e = fit_all(&space, &design, &r, &settings(SurrogateKind::Pce, 6)).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("24 samples for 28 unknowns"), "{e}");
    }

    #[test]
    fn sobol_report_on_ishigami_pce() {
        let pi = std::f64::consts::PI;
        let space = ParameterSpace::new(
            ["x1", "x2", "x3"].iter().map(|n| Parameter { name: n.to_string(), dist: Distribution::Uniform { lo: -pi, hi: pi }, unit: String::new() }).collect(),
        )
        .unwrap();
        let unit = sobol_sequence(3, 240, 0).unwrap();
        let phys = scale(&unit, &space).unwrap();
        let values = Matrix::from_fn(240, 1, |i, _| {
            let r = phys.points.row(i);
            ishigami(&[r[0], r[1], r[2]], 7.0, 0.1)
        });
        let resp = ResponseSet { labels: vec!["y".into()], values, failed: vec![false; 240], diagnostics: vec![None; 240] };
        let set = fit_all(&space, &unit.unit_to_standard(&space).unwrap(), &resp, &settings(SurrogateKind::Pce, 7)).unwrap();
        let rep = set.sobol(0, 1 << 12, 0, 0.05).unwrap();
        let c = rep.comparison.as_ref().unwrap();
        assert!(c.max_delta() < 0.05, "{}", rep.pretty());
        assert!(rep.to_csv().starts_with("input,S1,ST,S1_pce,ST_pce,delta\nx1,"));
    }
}
