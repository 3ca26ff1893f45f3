//! Study configuration: a TOML file naming the parameter-space file, the
//! model, the design and the surrogate settings.
//!
//! ```toml
//! space = "nozzle_inputs.cfg"   # relative to this file
//! out = "nozzle_study"          # relative to this file
//!
//! [model]
//! kind = "builtin"              # or "external"
//! name = "nozzle"               # nozzle | ishigami | constant
//! stations = 50
//!
//! [doe]
//! kind = "sobol"                # sobol | lhs | mc
//! size = 100
//! seed = 0                      # skip for sobol, PRNG seed otherwise
//!
//! [surrogate]
//! kind = "pck"                  # pce | kriging | pck
//! order = 2
//! kernel = "sqexp"              # sqexp | matern52
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uqforge_core::chaos::basis_size;
use uqforge_core::doe::DoeKind;
use uqforge_core::kriging::{KernelFamily, MleOptions, DEFAULT_NUGGET};
use uqforge_core::space::{parse_space, ParameterSpace};

use crate::runner::{ExternalModel, ModelSpec};
use crate::{Error, Result};

/// The parameter file of the nozzle case, as shipped in `configs/`.
pub const NOZZLE_INPUTS_CFG: &str = include_str!("../configs/nozzle_inputs.cfg");

/// The nozzle study configuration shipped in `configs/`.
pub const NOZZLE_STUDY_TOML: &str = include_str!("../configs/nozzle_study.toml");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub space: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelConfig,
    #[serde(default)]
    pub doe: DoeConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub moments: MomentsConfig,
    #[serde(default)]
    pub sobol: SobolConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("uqforge_out")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Builtin,
    External,
}

/// `[model]` table. Builtins use `name` plus their options, external
/// solvers `command`, `labels` and the file names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_file: Option<String>,
    /// Seconds per evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DoeChoice {
    Sobol,
    Lhs,
    Mc,
}

impl From<DoeChoice> for DoeKind {
    fn from(c: DoeChoice) -> Self {
        match c {
            DoeChoice::Sobol => DoeKind::Sobol,
            DoeChoice::Lhs => DoeKind::Lhs,
            DoeChoice::Mc => DoeKind::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DoeConfig {
    pub kind: DoeChoice,
    pub size: usize,
    pub seed: u64,
}

impl Default for DoeConfig {
    fn default() -> Self {
        Self { kind: DoeChoice::Sobol, size: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Pce,
    Kriging,
    Pck,
}

impl SurrogateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pce => "pce",
            Self::Kriging => "kriging",
            Self::Pck => "pck",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pce" => Ok(Self::Pce),
            "kriging" => Ok(Self::Kriging),
            "pck" => Ok(Self::Pck),
            _ => Err(format!("unknown surrogate kind `{s}` (expected pce, kriging or pck)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KrigingTrend {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    /// Total polynomial degree (PCE, PC-Kriging trend).
    pub order: usize,
    pub kernel: String,
    /// Trend of plain Kriging.
    pub trend: KrigingTrend,
    pub starts: usize,
    pub nugget: f64,
    pub theta_lower: f64,
    pub theta_upper: f64,
    pub max_iter: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        let mle = MleOptions::default();
        Self {
            kind: SurrogateKind::Pck,
            order: 2,
            kernel: KernelFamily::SquaredExponential.as_str().into(),
            trend: KrigingTrend::Constant,
            starts: mle.starts,
            nugget: DEFAULT_NUGGET,
            theta_lower: mle.lower,
            theta_upper: mle.upper,
            max_iter: mle.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub mc_count: usize,
    pub seed: u64,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self { mc_count: uqforge_core::pck::DEFAULT_MC_COUNT, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SobolConfig {
    pub base_count: usize,
    pub seed: u64,
    /// Largest accepted gap between Monte Carlo and polynomial indices.
    pub tolerance: f64,
    /// Output labels to analyse; all outputs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
}

impl Default for SobolConfig {
    fn default() -> Self {
        Self { base_count: 4096, seed: 0, tolerance: 0.05, outputs: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    /// Design CSV (physical units) to predict at; the stage's own design when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub jobs: usize,
    /// Keep the per-evaluation scratch directories of external runs.
    pub keep_scratch: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { jobs: 1, keep_scratch: false }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub jobs: Option<usize>,
    /// Replaces the design, Monte Carlo and Sobol seeds.
    pub seed: Option<u64>,
    pub order: Option<usize>,
    pub kind: Option<SurrogateKind>,
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(path, e.to_string().trim().replace('\n', " ")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(j) = o.jobs {
            self.run.jobs = j;
        }
        if let Some(s) = o.seed {
            self.doe.seed = s;
            self.moments.seed = s;
            self.sobol.seed = s;
        }
        if let Some(p) = o.order {
            self.surrogate.order = p;
        }
        if let Some(k) = o.kind {
            self.surrogate.kind = k;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }
}

/// A loaded configuration: the effective settings with the parameter space
/// parsed and every path resolved.
#[derive(Debug, Clone)]
pub struct Project {
    pub config: StudyConfig,
    pub config_path: PathBuf,
    pub space: ParameterSpace,
    pub space_text: String,
    pub space_path: PathBuf,
    pub out_dir: PathBuf,
    pub model: ModelSpec,
    pub kernel: KernelFamily,
}

impl Project {
    pub fn load(config_path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(config_path)
            .map_err(|e| Error::config(config_path, format!("cannot read config: {e}")))?;
        let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut config = StudyConfig::from_toml(&text, config_path)?;
        config.apply(overrides);
        let out_dir = match &overrides.out {
            Some(o) => o.clone(),
            None => base.join(&config.out),
        };
        Self::from_config(config, config_path, &base, out_dir)
    }

    /// Builds a project from an in-memory configuration; relative paths
    /// resolve against `base`.
    pub fn from_config(config: StudyConfig, config_path: &Path, base: &Path, out_dir: PathBuf) -> Result<Self> {
        let space_path = base.join(&config.space);
        let space_text = std::fs::read_to_string(&space_path)
            .map_err(|e| Error::config(config_path, format!("cannot read space file {}: {e}", space_path.display())))?;
        let space = parse_space(&space_text).map_err(|e| Error::config(&space_path, e.to_string()))?;
        let model = ModelSpec::from_config(&config.model, base).map_err(|m| Error::config(config_path, m))?;
        let kernel = config
            .surrogate
            .kernel
            .parse::<KernelFamily>()
            .map_err(|e| Error::config(config_path, format!("surrogate.kernel: {e}")))?;
        let project = Self {
            config,
            config_path: config_path.to_path_buf(),
            space,
            space_text,
            space_path,
            out_dir,
            model,
            kernel,
        };
        project.check_settings()?;
        Ok(project)
    }

    fn check_settings(&self) -> Result<()> {
        let c = &self.config;
        let bad = |m: String| Err(Error::config(&self.config_path, m));
        if let Some(arity) = self.model.input_arity() {
            if arity != self.space.dim() {
                return bad(format!(
                    "model `{}` takes {arity} inputs but the space defines {}",
                    self.model.name(),
                    self.space.dim()
                ));
            }
        }
        if c.doe.size == 0 {
            return bad("doe.size must be positive".into());
        }
        if c.run.jobs == 0 {
            return bad("run.jobs must be at least 1".into());
        }
        if c.moments.mc_count == 0 {
            return bad("moments.mc_count must be positive".into());
        }
        if c.surrogate.starts == 0 || c.surrogate.max_iter == 0 {
            return bad("surrogate.starts and surrogate.max_iter must be positive".into());
        }
        if !(c.surrogate.nugget >= 0.0 && c.surrogate.nugget.is_finite()) {
            return bad("surrogate.nugget must be finite and non-negative".into());
        }
        if !(c.surrogate.theta_lower > 0.0 && c.surrogate.theta_lower < c.surrogate.theta_upper && c.surrogate.theta_upper.is_finite()) {
            return bad("surrogate theta bounds need 0 < theta_lower < theta_upper".into());
        }
        if !(c.sobol.tolerance >= 0.0) {
            return bad("sobol.tolerance must be non-negative".into());
        }
        Ok(())
    }

    pub fn mle_options(&self) -> MleOptions {
        let s = &self.config.surrogate;
        MleOptions {
            lower: s.theta_lower,
            upper: s.theta_upper,
            starts: s.starts,
            seed: self.config.doe.seed,
            max_iter: s.max_iter,
            nugget: s.nugget,
        }
    }

    /// Number of trend or expansion terms of the configured surrogate.
    pub fn trend_terms(&self) -> Result<usize> {
        let n = self.space.dim();
        let s = &self.config.surrogate;
        match s.kind {
            SurrogateKind::Kriging => Ok(match s.trend {
                KrigingTrend::Constant => 1,
                KrigingTrend::Linear => n + 1,
            }),
            _ => basis_size(n, s.order).ok_or_else(|| {
                Error::Precondition(format!("basis size for n={n}, p={} overflows", s.order))
            }),
        }
    }

    /// Checks that `samples` usable rows are enough for the configured surrogate.
    pub fn check_sample_count(&self, samples: usize) -> Result<()> {
        let terms = self.trend_terms()?;
        let s = &self.config.surrogate;
        let (ok, need) = match s.kind {
            SurrogateKind::Pce => (samples >= terms, format!("N >= P = {terms}")),
            SurrogateKind::Pck => (samples > terms, format!("N > P = {terms}")),
            SurrogateKind::Kriging => (samples >= terms + 2, format!("N >= {}", terms + 2)),
        };
        if ok {
            return Ok(());
        }
        Err(Error::Precondition(format!(
            "{} with order {} needs {need} samples but N = {samples}; lower the order or add samples",
            s.kind, s.order
        )))
    }

    /// Hash over the effective configuration and the parameter-space text.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serialises"));
        h.update([0]);
        h.update(self.space_text.as_bytes());
        format!("{:x}", h.finalize())
    }

    pub fn external(&self) -> Option<&ExternalModel> {
        match &self.model {
            ModelSpec::External(e) => Some(e),
            _ => None,
        }
    }

    pub fn timeout(&self) -> Option<Duration> {
        self.external().map(|e| e.timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uqforge_core::models::nozzle_space;
    use uqforge_core::space::Distribution;

    #[test]
    fn shipped_space_matches_builtin_nozzle_space() {
        let parsed = parse_space(NOZZLE_INPUTS_CFG).unwrap();
        let reference = nozzle_space();
        assert_eq!(parsed.dim(), 7);
        for (a, b) in parsed.params().iter().zip(reference.params()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.unit, b.unit);
            let (Distribution::Uniform { lo: l1, hi: h1 }, Distribution::Uniform { lo: l2, hi: h2 }) = (a.dist, b.dist) else {
                panic!("uniform expected")
            };
            assert_eq!((l1, h1), (l2, h2));
        }
    }

    #[test]
    fn shipped_study_config_parses_with_defaults() {
        let c = StudyConfig::from_toml(NOZZLE_STUDY_TOML, Path::new("nozzle_study.toml")).unwrap();
        assert_eq!(c.doe, DoeConfig { kind: DoeChoice::Sobol, size: 100, seed: 0 });
        assert_eq!(c.surrogate.kind, SurrogateKind::Pck);
        assert_eq!(c.surrogate.order, 2);
        assert_eq!(c.moments.mc_count, 100_000);
        assert_eq!(c.model.stations, Some(50));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = StudyConfig::from_toml("space = \"a\"\n[model]\nkind = \"builtin\"\nnmae = \"x\"\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("nmae"), "{e}");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = StudyConfig::from_toml(NOZZLE_STUDY_TOML, Path::new("x.toml")).unwrap();
        c.apply(&Overrides { jobs: Some(4), seed: Some(9), order: Some(3), kind: Some(SurrogateKind::Pce), out: None });
        assert_eq!((c.run.jobs, c.doe.seed, c.moments.seed, c.sobol.seed), (4, 9, 9, 9));
        assert_eq!((c.surrogate.order, c.surrogate.kind), (3, SurrogateKind::Pce));
    }
}
