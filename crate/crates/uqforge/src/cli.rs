//! `uqforge <stage> --config FILE [--jobs K] [--seed S] [--order P] [--kind pce|kriging|pck] [--out DIR]`
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for failed
//! preconditions (missing or malformed stage inputs, too few samples, …),
//! 4 when the external model fails. Errors are printed to stderr as one line
//! `error kind=<kind> code=<code>: <message>`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::config::{Overrides, Project, SurrogateKind};
use crate::manifest::Manifest;
use crate::pipeline::{self, StageOutput};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// Write the design of experiments.
    Sample,
    /// Evaluate the model at every design point.
    Run,
    /// Fit one surrogate per model output.
    Fit,
    /// Predict at the design points or at `predict.points`.
    Predict,
    /// Surrogate means and standard deviations.
    Moments,
    /// Sobol' indices on the surrogate.
    Sobol,
    /// All of the above in sequence.
    Study,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::Run => "run",
            Self::Fit => "fit",
            Self::Predict => "predict",
            Self::Moments => "moments",
            Self::Sobol => "sobol",
            Self::Study => "study",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Pce,
    Kriging,
    Pck,
}

#[derive(Debug, Parser)]
#[command(name = "uqforge", version, about = "Surrogate-based uncertainty quantification of black-box models")]
struct Cli {
    stage: Stage,
    /// Study configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Concurrent model evaluations and surrogate fits.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Seed of the design, the Monte Carlo draws and the Sobol' estimator.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Polynomial order of PCE and PC-Kriging surrogates.
    #[arg(long, value_name = "P")]
    order: Option<usize>,
    #[arg(long)]
    kind: Option<KindArg>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Runs one stage and writes its manifest.
pub fn run_stage(stage: Stage, project: &Project, command: &str) -> Result<StageOutput> {
    let mut out = match stage {
        Stage::Sample => pipeline::sample(project)?,
        Stage::Run => pipeline::run(project)?,
        Stage::Fit => pipeline::fit(project)?,
        Stage::Predict => pipeline::predict(project)?,
        Stage::Moments => pipeline::moments(project)?,
        Stage::Sobol => pipeline::sobol(project)?,
        Stage::Study => pipeline::study(project)?,
    };
    let manifest = Manifest::new(project, stage.as_str(), command, &out.inputs, &out.outputs)?;
    out.outputs.push(manifest.write(&project.out_dir)?);
    Ok(out)
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let overrides = Overrides {
        jobs: cli.jobs.map(|j| j as usize),
        seed: cli.seed,
        order: cli.order,
        kind: cli.kind.map(|k| match k {
            KindArg::Pce => SurrogateKind::Pce,
            KindArg::Kriging => SurrogateKind::Kriging,
            KindArg::Pck => SurrogateKind::Pck,
        }),
        out: cli.out.clone(),
    };
    let command = args.iter().map(|a| a.to_string_lossy()).collect::<Vec<_>>().join(" ");
    let result = Project::load(&cli.config, &overrides).and_then(|p| run_stage(cli.stage, &p, &command));
    match result {
        Ok(out) => {
            for m in &out.messages {
                println!("{m}");
            }
            for o in &out.outputs {
                println!("wrote {}", o.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            e.exit_code()
        }
    }
}
