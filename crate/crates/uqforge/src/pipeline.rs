//! The stages behind the command line. Each stage reads the files written by
//! the previous ones from the output directory and never calls back into
//! earlier stages.

use std::path::{Path, PathBuf};

use uqforge_core::doe::{lhs, monte_carlo, scale, sobol_sequence, DesignMatrix, DoeKind};
use uqforge_core::models::{nozzle_q1d, NozzleGeometry, NOZZLE_FIELDS};
use uqforge_core::pck::Moments;

use crate::config::{DoeChoice, Project, SurrogateKind};
use crate::csvio::{fmt_f64, read_design, read_responses, write_design, write_responses, write_text, DesignFile, Table};
use crate::runner::{evaluate_batch, ModelSpec, RunOptions};
use crate::serial;
use crate::surrogate::{fit_all, FitSettings, SobolReport, SurrogateSet};
use crate::{Error, Result};

pub const DESIGN_CSV: &str = "design.csv";
pub const RESPONSES_CSV: &str = "responses.csv";
pub const SURROGATE_JSON: &str = "surrogate.json";
pub const FIT_REPORT_CSV: &str = "fit_report.csv";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const MOMENTS_CSV: &str = "moments.csv";
pub const SOBOL_DIR: &str = "sobol";
pub const SOBOL_TXT: &str = "sobol.txt";
pub const SAMPLES_CENTERLINE_CSV: &str = "samples_centerline.csv";
pub const MEAN_STD_CENTERLINE_CSV: &str = "mean_std_centerline.csv";
pub const NOMINAL_CENTERLINE_CSV: &str = "nominal_centerline.csv";
pub const SOBOL_EXIT_CSV: &str = "sobol_exit.csv";
pub const STUDY_SUMMARY_TXT: &str = "study_summary.txt";

/// Files a stage read and wrote, and notes for the user.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl StageOutput {
    fn merge(&mut self, other: StageOutput) {
        for i in other.inputs {
            if !self.outputs.contains(&i) && !self.inputs.contains(&i) {
                self.inputs.push(i);
            }
        }
        self.outputs.extend(other.outputs);
        self.messages.extend(other.messages);
    }
}

fn require(p: &Project, file: &str, what: &'static str, stage: &'static str) -> Result<PathBuf> {
    let path = p.out_dir.join(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingInput { what, path, stage })
    }
}

fn names(p: &Project) -> Vec<String> {
    p.space.names().map(String::from).collect()
}

/// The configured design in unit form.
pub fn unit_design(p: &Project) -> Result<DesignMatrix> {
    let d = &p.config.doe;
    let n = p.space.dim();
    Ok(match d.kind {
        DoeChoice::Sobol => sobol_sequence(n, d.size, d.seed)?,
        DoeChoice::Lhs => lhs(n, d.size, d.seed)?,
        DoeChoice::Mc => monte_carlo(n, d.size, d.seed)?,
    })
}

pub fn sample(p: &Project) -> Result<StageOutput> {
    p.check_sample_count(p.config.doe.size)?;
    let design = scale(&unit_design(p)?, &p.space)?;
    let path = p.out_dir.join(DESIGN_CSV);
    write_design(&path, &design, &names(p))?;
    Ok(StageOutput {
        outputs: vec![path],
        messages: vec![format!(
            "{} design: {} points in {} dimensions",
            DoeKind::from(p.config.doe.kind).as_str(),
            design.len(),
            design.dim()
        )],
        ..Default::default()
    })
}

fn load_design(p: &Project, path: &Path) -> Result<DesignFile> {
    let file = read_design(path)?;
    if file.design.dim() != p.space.dim() {
        return Err(Error::schema(path, format!("design has {} columns, the space has {} inputs", file.design.dim(), p.space.dim())));
    }
    if let Some(n) = &file.names {
        if *n != names(p) {
            return Err(Error::schema(path, format!("design columns `{}` differ from the space `{}`", n.join(","), names(p).join(","))));
        }
    }
    Ok(file)
}

pub fn run(p: &Project) -> Result<StageOutput> {
    let design_path = require(p, DESIGN_CSV, "design", "sample")?;
    let file = load_design(p, &design_path)?;
    p.check_sample_count(file.design.len())?;
    let options = RunOptions {
        jobs: p.config.run.jobs,
        names: names(p),
        keep_scratch: p.config.run.keep_scratch,
        scratch_root: None,
    };
    let r = evaluate_batch(&p.model, &file.design.points, &options)?;
    let path = p.out_dir.join(RESPONSES_CSV);
    write_responses(&path, &r)?;
    if r.failures() == r.len() {
        return Err(Error::ExternalModel(format!("model `{}`: {}", p.model.name(), r.summary())));
    }
    let mut messages = vec![format!("{} evaluations of `{}`, {} outputs each", r.len(), p.model.name(), r.labels.len())];
    if r.failures() > 0 {
        messages.push(format!("warning: {}", r.summary()));
    }
    Ok(StageOutput { inputs: vec![design_path], outputs: vec![path], messages })
}

pub fn fit(p: &Project) -> Result<StageOutput> {
    let design_path = require(p, DESIGN_CSV, "design", "sample")?;
    let responses_path = require(p, RESPONSES_CSV, "responses", "run")?;
    let file = load_design(p, &design_path)?;
    let responses = read_responses(&responses_path)?;
    if responses.len() != file.design.len() {
        return Err(Error::schema(
            &responses_path,
            format!("{} response rows for {} design points", responses.len(), file.design.len()),
        ));
    }
    let usable = responses.len() - responses.failures();
    p.check_sample_count(usable)?;
    let standard = file.design.physical_to_standard(&p.space)?;
    let set = fit_all(&p.space, &standard, &responses, &FitSettings::from_project(p))?;

    let surrogate_path = p.out_dir.join(SURROGATE_JSON);
    serial::save(&surrogate_path, &set)?;
    let report_path = p.out_dir.join(FIT_REPORT_CSV);
    fit_report(&set, usable).write(&report_path)?;
    let worst = set.models.iter().map(|m| m.loo_error()).fold(0.0, f64::max);
    Ok(StageOutput {
        inputs: vec![design_path, responses_path],
        outputs: vec![surrogate_path, report_path],
        messages: vec![format!(
            "{} {} surrogates on {usable} samples (order {}); largest leave-one-out error {worst:.3e}",
            set.models.len(),
            set.kind,
            p.config.surrogate.order
        )],
    })
}

fn fit_report(set: &SurrogateSet, samples: usize) -> Table {
    let kriging = set.kind != SurrogateKind::Pce;
    let mut header = vec!["output".to_string(), "samples".into(), "loo_error".into()];
    if kriging {
        header.extend(["sigma2".into(), "log_likelihood".into()]);
        header.extend(set.space.names().map(|n| format!("theta_{n}")));
    }
    let mut t = Table::new(header);
    for (label, m) in set.labels.iter().zip(&set.models) {
        let mut row = vec![label.clone(), samples.to_string(), fmt_f64(m.loo_error())];
        if let Some(k) = m.kriging() {
            row.extend([fmt_f64(k.sigma2()), fmt_f64(k.log_likelihood())]);
            row.extend(k.kernel().theta().iter().map(|&t| fmt_f64(t)));
        }
        t.push(row);
    }
    t
}

fn load_surrogate(p: &Project) -> Result<(PathBuf, SurrogateSet)> {
    let path = require(p, SURROGATE_JSON, "surrogate", "fit")?;
    let set = serial::load(&path)?;
    if set.space != p.space {
        return Err(Error::schema(&path, "surrogate was fitted on a different parameter space than the configuration"));
    }
    Ok((path, set))
}

pub fn predict(p: &Project) -> Result<StageOutput> {
    let (surrogate_path, set) = load_surrogate(p)?;
    let points_path = match &p.config.predict.points {
        Some(rel) => {
            let path = p.config_path.parent().unwrap_or(Path::new("")).join(rel);
            if !path.is_file() {
                return Err(Error::config(&p.config_path, format!("predict.points file {} not found", path.display())));
            }
            path
        }
        None => require(p, DESIGN_CSV, "design", "sample")?,
    };
    let file = load_design(p, &points_path)?;
    let with_var = set.kind != SurrogateKind::Pce;
    let mut header = vec!["point".to_string()];
    for l in &set.labels {
        header.push(format!("{l}_mean"));
        if with_var {
            header.push(format!("{l}_var"));
        }
    }
    let mut t = Table::new(header);
    for (i, x) in file.design.points.row_iter().enumerate() {
        let xi = p.space.to_standard(x)?;
        let mut row = vec![i.to_string()];
        for m in &set.models {
            let (mean, var) = m.predict(&xi)?;
            row.push(fmt_f64(mean));
            if let Some(v) = var {
                row.push(fmt_f64(v));
            }
        }
        t.push(row);
    }
    let path = p.out_dir.join(PREDICTIONS_CSV);
    t.write(&path)?;
    Ok(StageOutput {
        inputs: vec![surrogate_path, points_path],
        outputs: vec![path],
        messages: vec![format!("{} points, {} outputs", file.design.len(), set.labels.len())],
    })
}

fn moments_table(set: &SurrogateSet, moments: &[Moments]) -> Table {
    let mut t = Table::new(["output", "mean", "std"]);
    for (l, m) in set.labels.iter().zip(moments) {
        t.push(vec![l.clone(), fmt_f64(m.mean), fmt_f64(m.std)]);
    }
    t
}

pub fn moments(p: &Project) -> Result<StageOutput> {
    let (surrogate_path, set) = load_surrogate(p)?;
    let c = &p.config.moments;
    let moments = set.moments(c.mc_count, c.seed)?;
    let path = p.out_dir.join(MOMENTS_CSV);
    moments_table(&set, &moments).write(&path)?;
    let how = match set.kind {
        SurrogateKind::Pce => "from the expansion coefficients".to_string(),
        _ => format!("from {} surrogate draws (seed {})", c.mc_count, c.seed),
    };
    Ok(StageOutput { inputs: vec![surrogate_path], outputs: vec![path], messages: vec![format!("moments of {} outputs {how}", set.labels.len())] })
}

fn sobol_targets(p: &Project, set: &SurrogateSet) -> Result<Vec<usize>> {
    match &p.config.sobol.outputs {
        None => Ok((0..set.labels.len()).collect()),
        Some(list) => list
            .iter()
            .map(|l| set.index_of(l).ok_or_else(|| Error::config(&p.config_path, format!("sobol.outputs: unknown output `{l}`"))))
            .collect(),
    }
}

fn sobol_reports(p: &Project, set: &SurrogateSet, targets: &[usize]) -> Result<Vec<SobolReport>> {
    let c = &p.config.sobol;
    targets.iter().map(|&j| set.sobol(j, c.base_count, c.seed, c.tolerance)).collect()
}

fn write_sobol(p: &Project, reports: &[SobolReport], out: &mut StageOutput) -> Result<()> {
    let mut pretty = String::new();
    for r in reports {
        let path = p.out_dir.join(SOBOL_DIR).join(format!("{}.csv", r.label));
        write_text(&path, &r.to_csv())?;
        out.outputs.push(path);
        pretty.push_str(&r.pretty());
        pretty.push('\n');
        if r.comparison.as_ref().is_some_and(|c| c.any_flagged()) {
            out.messages.push(format!(
                "warning: `{}`: Monte Carlo and polynomial indices differ by more than {}",
                r.label, p.config.sobol.tolerance
            ));
        }
    }
    let path = p.out_dir.join(SOBOL_TXT);
    write_text(&path, &pretty)?;
    out.outputs.push(path);
    Ok(())
}

pub fn sobol(p: &Project) -> Result<StageOutput> {
    let (surrogate_path, set) = load_surrogate(p)?;
    let targets = sobol_targets(p, &set)?;
    let reports = sobol_reports(p, &set, &targets)?;
    let mut out = StageOutput { inputs: vec![surrogate_path], ..Default::default() };
    write_sobol(p, &reports, &mut out)?;
    out.messages.insert(
        0,
        format!("Sobol' indices of {} outputs, base count {} (seed {})", reports.len(), p.config.sobol.base_count, p.config.sobol.seed),
    );
    Ok(out)
}

/// `sample → run → fit → moments → sobol`, plus the centerline tables when
/// the model is the builtin nozzle.
pub fn study(p: &Project) -> Result<StageOutput> {
    p.check_sample_count(p.config.doe.size)?;
    let mut out = StageOutput::default();
    out.merge(sample(p)?);
    out.merge(run(p)?);
    out.merge(fit(p)?);
    out.merge(moments(p)?);
    match p.model {
        ModelSpec::Nozzle { stations } => out.merge(nozzle_tables(p, stations)?),
        _ => out.merge(sobol(p)?),
    }
    Ok(out)
}

fn field_index(field: usize, station: usize, stations: usize) -> usize {
    field * stations + station
}

fn nozzle_tables(p: &Project, stations: usize) -> Result<StageOutput> {
    let x = NozzleGeometry::reference().stations(stations);
    let mut out = StageOutput::default();

    let responses_path = p.out_dir.join(RESPONSES_CSV);
    let responses = read_responses(&responses_path)?;
    let mut header = vec!["sample".to_string(), "station".into(), "x".into()];
    header.extend(NOZZLE_FIELDS.iter().map(|f| f.to_string()));
    let mut samples = Table::new(header.clone());
    for i in (0..responses.len()).filter(|&i| !responses.failed[i]) {
        for (k, xk) in x.iter().enumerate() {
            let mut row = vec![i.to_string(), k.to_string(), fmt_f64(*xk)];
            row.extend((0..NOZZLE_FIELDS.len()).map(|f| fmt_f64(responses.values[(i, field_index(f, k, stations))])));
            samples.push(row);
        }
    }
    let path = p.out_dir.join(SAMPLES_CENTERLINE_CSV);
    samples.write(&path)?;
    out.outputs.push(path);

    let nominal = nozzle_q1d(&p.space.nominal(), stations)?;
    let mut nominal_table = Table::new(header[1..].to_vec());
    for (k, xk) in x.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(*xk)];
        row.extend((0..NOZZLE_FIELDS.len()).map(|f| fmt_f64(nominal[field_index(f, k, stations)])));
        nominal_table.push(row);
    }
    let path = p.out_dir.join(NOMINAL_CENTERLINE_CSV);
    nominal_table.write(&path)?;
    out.outputs.push(path);

    let moments = Table::read(&p.out_dir.join(MOMENTS_CSV))?;
    let expected = responses.labels.len();
    if moments.rows.len() != expected {
        return Err(Error::schema(p.out_dir.join(MOMENTS_CSV), format!("{} rows, expected {expected}", moments.rows.len())));
    }
    let mut header = vec!["station".to_string(), "x".into()];
    for f in NOZZLE_FIELDS {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_std"));
    }
    let mut mean_std = Table::new(header);
    for (k, xk) in x.iter().enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(*xk)];
        for f in 0..NOZZLE_FIELDS.len() {
            let r = &moments.rows[field_index(f, k, stations)];
            row.push(r[1].clone());
            row.push(r[2].clone());
        }
        mean_std.push(row);
    }
    let path = p.out_dir.join(MEAN_STD_CENTERLINE_CSV);
    mean_std.write(&path)?;
    out.outputs.push(path);

    let (surrogate_path, set) = load_surrogate(p)?;
    let exit: Vec<usize> = (0..NOZZLE_FIELDS.len()).map(|f| field_index(f, stations - 1, stations)).collect();
    let reports = sobol_reports(p, &set, &exit)?;
    write_sobol(p, &reports, &mut out)?;
    let mut exit_table = Table::new(["field", "input", "S1", "ST", "S1_pce", "ST_pce", "delta"]);
    for (f, r) in NOZZLE_FIELDS.iter().zip(&reports) {
        for line in r.to_csv().lines().skip(1) {
            let mut row = vec![f.to_string()];
            row.extend(line.split(',').map(String::from));
            exit_table.push(row);
        }
    }
    let path = p.out_dir.join(SOBOL_EXIT_CSV);
    exit_table.write(&path)?;
    out.outputs.push(path);
    out.inputs.push(surrogate_path);

    let summary = study_summary(p, stations, &nominal, &moments, &reports);
    let path = p.out_dir.join(STUDY_SUMMARY_TXT);
    write_text(&path, &summary)?;
    out.outputs.push(path);
    out.messages.push(summary.trim_end().to_string());
    Ok(out)
}

fn study_summary(p: &Project, stations: usize, nominal: &[f64], moments: &Table, reports: &[SobolReport]) -> String {
    let num = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
    let mut s = format!(
        "nozzle study: {} samples, {} surrogates of order {}, {} stations\n",
        p.config.doe.size, p.config.surrogate.kind, p.config.surrogate.order, stations
    );
    s.push_str(&format!("nominal exit Mach number: {:.9}\n", nominal[field_index(2, stations - 1, stations)]));
    s.push_str("field  exit mean       exit std        max std/|mean|  max |mean-nominal|/std\n");
    for (f, name) in NOZZLE_FIELDS.iter().enumerate() {
        let (mut rel, mut dev) = (0.0f64, 0.0f64);
        for k in 0..stations {
            let i = field_index(f, k, stations);
            let (mean, std) = (num(&moments.rows[i][1]), num(&moments.rows[i][2]));
            rel = rel.max(std / mean.abs());
            if std > 0.0 {
                dev = dev.max((mean - nominal[i]).abs() / std);
            }
        }
        let e = field_index(f, stations - 1, stations);
        s.push_str(&format!(
            "{name:<5}  {:<14.6e}  {:<14.6e}  {rel:<14.4e}  {dev:.4}\n",
            num(&moments.rows[e][1]),
            num(&moments.rows[e][2])
        ));
    }
    s.push_str("largest exit-station total index per input:\n");
    if let Some(first) = reports.first() {
        for (k, name) in first.names.iter().enumerate() {
            let st = reports.iter().map(|r| r.mc.total[k]).fold(f64::NEG_INFINITY, f64::max);
            s.push_str(&format!("  {name:<20} {st:.6}\n"));
        }
    }
    s
}
