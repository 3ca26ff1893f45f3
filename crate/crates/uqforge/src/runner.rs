//! Batch evaluation of builtin and external models over a physical design.
//!
//! External solvers run once per design row in a fresh scratch directory:
//! the row is written to `input.csv` (a header of parameter names, then one
//! line of values), the command is started there, and `output.csv` (a header
//! of labels, then one line of values) is read back. A non-zero exit status,
//! a timeout or an unreadable output file masks the row; the run only fails
//! as a whole when the command cannot be started.
//!
//! Scratch directories are created under `$UQFORGE_SCRATCH` when set, the
//! system temporary directory otherwise.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use uqforge_core::linalg::Matrix;
use uqforge_core::models::{ishigami, nozzle_labels, nozzle_q1d};
use wait_timeout::ChildExt;

use crate::config::{ModelConfig, ModelKind};
use crate::{Error, Result};

/// Environment variable overriding the scratch root of external runs.
pub const SCRATCH_ENV: &str = "UQFORGE_SCRATCH";

/// Default number of nozzle centerline stations.
pub const DEFAULT_STATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalModel {
    /// Program and arguments. Elements starting with `./` or `../` are
    /// resolved against the configuration directory.
    pub command: Vec<String>,
    pub labels: Vec<String>,
    pub input_file: String,
    pub output_file: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Quasi-1D nozzle: seven inputs, `4·stations` outputs.
    Nozzle { stations: usize },
    /// Ishigami function of three inputs.
    Ishigami { a: f64, b: f64 },
    /// The same value everywhere, for any number of inputs.
    Constant { value: f64 },
    External(ExternalModel),
}

impl ModelSpec {
    pub fn from_config(c: &ModelConfig, base: &Path) -> std::result::Result<Self, String> {
        let external_keys = c.command.is_some() || c.labels.is_some() || c.input_file.is_some() || c.output_file.is_some() || c.timeout.is_some();
        match c.kind {
            ModelKind::Builtin => {
                if external_keys {
                    return Err("model: command, labels, input_file, output_file and timeout apply to external models only".into());
                }
                let name = c.name.as_deref().ok_or("model.name is required for builtin models")?;
                let spec = match name {
                    "nozzle" => Self::Nozzle { stations: c.stations.unwrap_or(DEFAULT_STATIONS) },
                    "ishigami" => Self::Ishigami { a: c.a.unwrap_or(7.0), b: c.b.unwrap_or(0.1) },
                    "constant" => Self::Constant { value: c.value.unwrap_or(0.0) },
                    other => return Err(format!("model.name: unknown builtin `{other}` (expected nozzle, ishigami or constant)")),
                };
                let unused = match spec {
                    Self::Nozzle { stations } => {
                        if stations == 0 {
                            return Err("model.stations must be positive".into());
                        }
                        c.value.is_some() || c.a.is_some() || c.b.is_some()
                    }
                    Self::Ishigami { .. } => c.value.is_some() || c.stations.is_some(),
                    _ => c.a.is_some() || c.b.is_some() || c.stations.is_some(),
                };
                if unused {
                    return Err(format!("model: option not understood by builtin `{name}`"));
                }
                Ok(spec)
            }
            ModelKind::External => {
                if c.name.is_some() || c.stations.is_some() || c.value.is_some() || c.a.is_some() || c.b.is_some() {
                    return Err("model: name, stations, value, a and b apply to builtin models only".into());
                }
                let command = c.command.clone().unwrap_or_default();
                if command.is_empty() || command[0].is_empty() {
                    return Err("model.command must name a program".into());
                }
                let labels = c.labels.clone().unwrap_or_default();
                if labels.is_empty() {
                    return Err("model.labels must list at least one output".into());
                }
                let timeout = c.timeout.unwrap_or(3600.0);
                if !(timeout > 0.0 && timeout.is_finite()) {
                    return Err("model.timeout must be a positive number of seconds".into());
                }
                let command = command
                    .into_iter()
                    .map(|a| {
                        if a.starts_with("./") || a.starts_with("../") {
                            absolute(&base.join(&a)).to_string_lossy().into_owned()
                        } else {
                            a
                        }
                    })
                    .collect();
                Ok(Self::External(ExternalModel {
                    command,
                    labels,
                    input_file: c.input_file.clone().unwrap_or_else(|| "input.csv".into()),
                    output_file: c.output_file.clone().unwrap_or_else(|| "output.csv".into()),
                    timeout: Duration::from_secs_f64(timeout),
                }))
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Nozzle { .. } => "nozzle",
            Self::Ishigami { .. } => "ishigami",
            Self::Constant { .. } => "constant",
            Self::External(e) => &e.command[0],
        }
    }

    /// Required number of inputs, when the model fixes one.
    pub fn input_arity(&self) -> Option<usize> {
        match self {
            Self::Nozzle { .. } => Some(7),
            Self::Ishigami { .. } => Some(3),
            _ => None,
        }
    }

    pub fn output_labels(&self) -> Vec<String> {
        match self {
            Self::Nozzle { stations } => nozzle_labels(*stations),
            Self::Ishigami { .. } | Self::Constant { .. } => vec!["y".into()],
            Self::External(e) => e.labels.clone(),
        }
    }

    fn evaluate_builtin(&self, x: &[f64]) -> std::result::Result<Vec<f64>, String> {
        match *self {
            Self::Nozzle { stations } => nozzle_q1d(x, stations).map_err(|e| e.to_string()),
            Self::Ishigami { a, b } => Ok(vec![ishigami(&[x[0], x[1], x[2]], a, b)]),
            Self::Constant { value } => Ok(vec![value]),
            Self::External(_) => unreachable!(),
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Model outputs aligned row for row with a design. Failed rows hold NaN
/// and carry a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub labels: Vec<String>,
    pub values: Matrix,
    pub failed: Vec<bool>,
    pub diagnostics: Vec<Option<String>>,
}

impl ResponseSet {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn failures(&self) -> usize {
        self.failed.iter().filter(|&&f| f).count()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// `"k of N evaluations failed"` followed by the first diagnostics.
    pub fn summary(&self) -> String {
        let mut s = format!("{} of {} evaluations failed", self.failures(), self.len());
        let shown: Vec<String> = self
            .diagnostics
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.as_ref().map(|d| format!("row {i}: {d}")))
            .take(3)
            .collect();
        if !shown.is_empty() {
            s.push_str("; ");
            s.push_str(&shown.join("; "));
        }
        s
    }
}

/// Options of [`evaluate_batch`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Concurrent evaluations; 0 and 1 both mean sequential.
    pub jobs: usize,
    /// Parameter names written to the input file header.
    pub names: Vec<String>,
    /// Keep the scratch directories of external runs.
    pub keep_scratch: bool,
    /// Overrides `$UQFORGE_SCRATCH` and the temporary directory.
    pub scratch_root: Option<PathBuf>,
}

/// Evaluates `model` at every row of `design` (physical units).
///
/// Rows come back in design order whatever the completion order.
pub fn evaluate_batch(model: &ModelSpec, design: &Matrix, options: &RunOptions) -> Result<ResponseSet> {
    if let Some(n) = model.input_arity() {
        if design.cols() != n {
            return Err(Error::Precondition(format!(
                "model `{}` takes {n} inputs, design has {} columns",
                model.name(),
                design.cols()
            )));
        }
    }
    let labels = model.output_labels();
    let m = labels.len();
    let rows: Vec<std::result::Result<Vec<f64>, String>> = match model {
        ModelSpec::External(ext) => run_external(ext, design, options)?,
        _ => par_map(design.rows(), options.jobs, |i| model.evaluate_builtin(design.row(i))),
    };

    let mut values = Matrix::zeros(design.rows(), m);
    let mut failed = vec![false; design.rows()];
    let mut diagnostics = vec![None; design.rows()];
    for (i, r) in rows.into_iter().enumerate() {
        let r = r.and_then(|v| {
            if v.len() != m {
                Err(format!("expected {m} outputs, got {}", v.len()))
            } else if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                Err(format!("output `{}` is not finite", labels[k]))
            } else {
                Ok(v)
            }
        });
        match r {
            Ok(v) => values.row_mut(i).copy_from_slice(&v),
            Err(d) => {
                values.row_mut(i).fill(f64::NAN);
                failed[i] = true;
                diagnostics[i] = Some(d);
            }
        }
    }
    Ok(ResponseSet { labels, values, failed, diagnostics })
}

/// `f(0) … f(count - 1)` on up to `jobs` threads, results in index order.
pub fn par_map<T: Send>(count: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, count.max(1));
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let v = f(i);
                slots.lock().expect("worker panicked")[i] = Some(v);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|v| v.expect("every index visited")).collect()
}

fn scratch_root(options: &RunOptions) -> PathBuf {
    options
        .scratch_root
        .clone()
        .or_else(|| std::env::var_os(SCRATCH_ENV).map(PathBuf::from))
        .unwrap_or_else(std::env::temp_dir)
}

fn run_external(ext: &ExternalModel, design: &Matrix, options: &RunOptions) -> Result<Vec<std::result::Result<Vec<f64>, String>>> {
    let root = scratch_root(options);
    std::fs::create_dir_all(&root).map_err(Error::io(&root))?;
    let scratch = tempfile::Builder::new().prefix("uqforge-run-").tempdir_in(&root).map_err(Error::io(&root))?;
    let names: Vec<String> = if options.names.len() == design.cols() {
        options.names.clone()
    } else {
        (1..=design.cols()).map(|k| format!("x{k}")).collect()
    };

    let rows = par_map(design.rows(), options.jobs, |i| {
        let dir = scratch.path().join(format!("eval_{i:05}"));
        run_one(ext, &dir, &names, design.row(i))
    });
    if options.keep_scratch {
        let _ = scratch.keep();
    }
    rows.into_iter()
        .map(|r| match r {
            Err(RunFailure::Fatal(e)) => Err(e),
            Err(RunFailure::Row(d)) => Ok(Err(d)),
            Ok(v) => Ok(Ok(v)),
        })
        .collect()
}

enum RunFailure {
    /// The row failed; others may still succeed.
    Row(String),
    /// Nothing can succeed (command missing, scratch not writable).
    Fatal(Error),
}

/// The input file body for one design row.
pub fn format_input(names: &[String], row: &[f64]) -> String {
    let values: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    format!("{}\n{}\n", names.join(","), values.join(","))
}

/// Parses an output file body: one header line of labels, one line of values.
pub fn parse_output(text: &str, labels: &[String]) -> std::result::Result<Vec<f64>, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("output file is empty")?.split(',').map(str::trim).collect();
    let data = lines.next().ok_or("output file has no data line")?;
    if lines.next().is_some() {
        return Err("output file has more than one data line".into());
    }
    if header.len() != labels.len() || header.iter().zip(labels).any(|(h, l)| h != l) {
        return Err(format!("output header `{}` does not match labels `{}`", header.join(","), labels.join(",")));
    }
    let values: Vec<f64> = data
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("unparseable output value `{}`", v.trim())))
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != labels.len() {
        return Err(format!("expected {} output values, found {}", labels.len(), values.len()));
    }
    Ok(values)
}

fn run_one(ext: &ExternalModel, dir: &Path, names: &[String], row: &[f64]) -> std::result::Result<Vec<f64>, RunFailure> {
    std::fs::create_dir_all(dir).map_err(|e| RunFailure::Fatal(Error::io(dir)(e)))?;
    let input = dir.join(&ext.input_file);
    std::fs::write(&input, format_input(names, row)).map_err(|e| RunFailure::Fatal(Error::io(&input)(e)))?;
    let stderr_path = dir.join("stderr.log");
    let stdout = std::fs::File::create(dir.join("stdout.log")).map_err(|e| RunFailure::Fatal(Error::io(dir)(e)))?;
    let stderr = std::fs::File::create(&stderr_path).map_err(|e| RunFailure::Fatal(Error::io(dir)(e)))?;

    let mut child = Command::new(&ext.command[0])
        .args(&ext.command[1..])
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
        .map_err(|e| {
            RunFailure::Fatal(Error::ExternalModel(format!("cannot start external model `{}`: {e}", ext.command[0])))
        })?;
    let status = match child.wait_timeout(ext.timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(RunFailure::Row(format!("timed out after {:?}", ext.timeout)));
        }
        Err(e) => return Err(RunFailure::Row(format!("waiting for the model failed: {e}"))),
    };
    if !status.success() {
        let mut tail = String::new();
        if let Ok(mut f) = std::fs::File::open(&stderr_path) {
            let _ = f.read_to_string(&mut tail);
        }
        let tail = tail.lines().last().unwrap_or("").trim();
        let mut msg = format!("exited with {status}");
        if !tail.is_empty() {
            msg.push_str(": ");
            msg.push_str(tail);
        }
        return Err(RunFailure::Row(msg));
    }
    let out = dir.join(&ext.output_file);
    let text = std::fs::read_to_string(&out).map_err(|e| RunFailure::Row(format!("cannot read {}: {e}", ext.output_file)))?;
    parse_output(&text, &ext.labels).map_err(RunFailure::Row)
}
