use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uqforge::config::{NOZZLE_STUDY_TOML, NOZZLE_INPUTS_CFG};
use uqforge::csvio::{read_design, Table};

fn uqforge(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqforge"))
        .arg(args[0])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .output()
        .expect("spawn uqforge")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\n{}", o.status, stderr(o));
}

fn nozzle_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("nozzle_inputs.cfg"), NOZZLE_INPUTS_CFG).unwrap();
    let cfg = dir.path().join("nozzle_study.toml");
    std::fs::write(&cfg, NOZZLE_STUDY_TOML).unwrap();
    (dir, cfg)
}

fn small_dir(space: &str, config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("space.cfg"), space).unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

const TWO_INPUTS: &str = "a, uniform, lo=0, hi=1\nb, uniform, lo=-2, hi=2\n";

#[test]
fn sample_writes_physical_nozzle_design() {
    let (dir, cfg) = nozzle_dir();
    let o = uqforge(&cfg, &["sample"]);
    assert_ok(&o);
    let out = dir.path().join("nozzle_study");
    let d = read_design(&out.join("design.csv")).unwrap();
    assert_eq!((d.design.len(), d.design.dim()), (100, 7));
    // nominal point first, every row inside the table bounds
    assert_eq!(d.design.row(0)[0], 904388.0);
    for i in 0..100 {
        let p = d.design.row(i)[0];
        assert!((859167.0..=949608.0).contains(&p), "{p}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest_sample.json")).unwrap()).unwrap();
    assert_eq!(manifest["stage"], "sample");
    assert_eq!(manifest["seeds"]["doe"], 0);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|f| f["path"].as_str().unwrap().ends_with("design.csv")));
}

#[test]
fn order_three_pce_on_hundred_samples_is_refused() {
    let (_dir, cfg) = nozzle_dir();
    assert_ok(&uqforge(&cfg, &["sample"]));
    assert_ok(&uqforge(&cfg, &["run"]));
    let o = uqforge(&cfg, &["fit", "--kind", "pce", "--order", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let e = stderr(&o);
    assert!(e.starts_with("error kind=precondition code=3"), "{e}");
    assert!(e.contains("P = 120") && e.contains("N = 100"), "{e}");
    assert_eq!(e.trim_end().lines().count(), 1);

    // the same check stops `sample` before any model run
    let (_dir, cfg) = nozzle_dir();
    let o = uqforge(&cfg, &["sample", "--kind", "pce", "--order", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn constant_model_moments() {
    let config = r#"
space = "space.cfg"
out = "out"
[model]
kind = "builtin"
name = "constant"
value = 2.75
[doe]
size = 12
[surrogate]
kind = "pce"
order = 2
"#;
    let (dir, cfg) = small_dir(TWO_INPUTS, config);
    for stage in ["sample", "run", "fit", "moments"] {
        assert_ok(&uqforge(&cfg, &[stage]));
    }
    let t = Table::read(&dir.path().join("out/moments.csv")).unwrap();
    assert_eq!(t.header, ["output", "mean", "std"]);
    let mean: f64 = t.rows[0][1].parse().unwrap();
    let std: f64 = t.rows[0][2].parse().unwrap();
    assert!((mean - 2.75).abs() < 1e-12, "{mean}");
    assert!(std.abs() < 1e-12, "{std}");
}

#[test]
fn later_stages_name_their_missing_inputs() {
    let (_dir, cfg) = nozzle_dir();
    for (stage, file, prior) in
        [("run", "design.csv", "sample"), ("fit", "design.csv", "sample"), ("moments", "surrogate.json", "fit"), ("sobol", "surrogate.json", "fit")]
    {
        let o = uqforge(&cfg, &[stage]);
        assert_eq!(o.status.code(), Some(3), "{stage}");
        let e = stderr(&o);
        assert!(e.contains(file) && e.contains(&format!("uqforge {prior}")), "{stage}: {e}");
    }
    assert_ok(&uqforge(&cfg, &["sample"]));
    let e = stderr(&uqforge(&cfg, &["fit"]));
    assert!(e.contains("responses.csv"), "{e}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let (dir, cfg) = nozzle_dir();
    let missing = dir.path().join("absent.toml");
    let o = uqforge(&missing, &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=config code=2"));

    std::fs::write(&cfg, NOZZLE_STUDY_TOML.replace("[doe]", "[doe]\nsizes = 3")).unwrap();
    let o = uqforge(&cfg, &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sizes"));

    let (_dir, cfg) = small_dir("a, uniform, lo=2, hi=1\n", "space = \"space.cfg\"\n[model]\nkind = \"builtin\"\nname = \"constant\"\n");
    let o = uqforge(&cfg, &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1") && stderr(&o).contains("`a`"), "{}", stderr(&o));

    // unknown stage and bad flag values come from the argument parser
    let (_dir, cfg) = nozzle_dir();
    assert_eq!(uqforge(&cfg, &["train"]).status.code(), Some(2));
    assert_eq!(uqforge(&cfg, &["fit", "--kind", "svm"]).status.code(), Some(2));
}

#[test]
fn external_model_failures_exit_with_four() {
    let base = "space = \"space.cfg\"\nout = \"out\"\n[doe]\nsize = 8\n[surrogate]\nkind = \"pce\"\norder = 1\n";
    let (_dir, cfg) = small_dir(TWO_INPUTS, &format!("{base}[model]\nkind = \"external\"\ncommand = [\"false\"]\nlabels = [\"y\"]\n"));
    assert_ok(&uqforge(&cfg, &["sample"]));
    let o = uqforge(&cfg, &["run"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("8 of 8"), "{}", stderr(&o));

    let (_dir, cfg) =
        small_dir(TWO_INPUTS, &format!("{base}[model]\nkind = \"external\"\ncommand = [\"./no-such-solver\"]\nlabels = [\"y\"]\n"));
    assert_ok(&uqforge(&cfg, &["sample"]));
    let o = uqforge(&cfg, &["run"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error kind=external-model code=4"));
}

#[test]
fn fit_and_later_stages_never_call_the_model() {
    let counter = tempfile::NamedTempFile::new().unwrap();
    let script = format!(
        "echo x >> '{}'; tail -n 1 input.csv > row; IFS=, read a b < row; \
         printf 'y\\n%s\\n' \"$(awk -v a=$a -v b=$b 'BEGIN {{ printf \"%.17g\", 1 + 2 * a - b * b }}')\" > output.csv",
        counter.path().display()
    );
    let config = format!(
        "space = \"space.cfg\"\nout = \"out\"\n[doe]\nsize = 16\n[surrogate]\nkind = \"pce\"\norder = 2\n\
         [sobol]\nbase_count = 256\n[moments]\nmc_count = 1000\n[model]\nkind = \"external\"\ncommand = [\"sh\", \"-c\", {script:?}]\nlabels = [\"y\"]\n"
    );
    let (dir, cfg) = small_dir(TWO_INPUTS, &config);
    let calls = || std::fs::read_to_string(counter.path()).unwrap().lines().count();
    assert_ok(&uqforge(&cfg, &["sample"]));
    assert_eq!(calls(), 0);
    assert_ok(&uqforge(&cfg, &["run"]));
    assert_eq!(calls(), 16);
    for stage in ["fit", "predict", "moments", "sobol"] {
        assert_ok(&uqforge(&cfg, &[stage]));
    }
    assert_eq!(calls(), 16);

    // a quadratic is reproduced exactly: mean 1 + 1 - 4/3, no interaction
    let t = Table::read(&dir.path().join("out/moments.csv")).unwrap();
    let mean: f64 = t.rows[0][1].parse().unwrap();
    assert!((mean - 2.0 / 3.0).abs() < 1e-9, "{mean}");
    let pred = Table::read(&dir.path().join("out/predictions.csv")).unwrap();
    assert_eq!(pred.rows.len(), 16);
    let s = Table::read(&dir.path().join("out/sobol/y.csv")).unwrap();
    assert_eq!(s.rows.len(), 2);
    for name in ["manifest_run.json", "manifest_fit.json", "manifest_sobol.json", "surrogate.json", "sobol.txt"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}

#[test]
fn seed_and_out_overrides() {
    let config = "space = \"space.cfg\"\n[model]\nkind = \"builtin\"\nname = \"constant\"\n[doe]\nkind = \"lhs\"\nsize = 10\n[surrogate]\nkind = \"pce\"\norder = 1\n";
    let (dir, cfg) = small_dir(TWO_INPUTS, config);
    let read = |sub: &str| std::fs::read_to_string(dir.path().join(sub).join("design.csv")).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_ok(&uqforge(&cfg, &["sample", "--seed", "5", "--out", out_a.to_str().unwrap()]));
    assert_ok(&uqforge(&cfg, &["sample", "--seed", "6", "--out", out_b.to_str().unwrap()]));
    assert_ne!(read("a"), read("b"));
    assert!(read("a").starts_with("# doe kind=lhs dim=2 n=10 seed=5"), "{}", read("a"));
    assert_ok(&uqforge(&cfg, &["sample", "--seed", "5", "--out", out_b.to_str().unwrap()]));
    assert_eq!(read("a"), read("b"));
}

#[test]
fn ishigami_study_runs_generic_pipeline() {
    let space = "x1, uniform, lo=-3.141592653589793, hi=3.141592653589793\n\
                 x2, uniform, lo=-3.141592653589793, hi=3.141592653589793\n\
                 x3, uniform, lo=-3.141592653589793, hi=3.141592653589793\n";
    let config = "space = \"space.cfg\"\nout = \"out\"\n[model]\nkind = \"builtin\"\nname = \"ishigami\"\n\
                  [doe]\nsize = 440\n[surrogate]\nkind = \"pce\"\norder = 9\n[sobol]\nbase_count = 8192\ntolerance = 0.03\n";
    let (dir, cfg) = small_dir(space, config);
    let o = uqforge(&cfg, &["study", "--jobs", "2"]);
    assert_ok(&o);
    let t = Table::read(&dir.path().join("out/sobol/y.csv")).unwrap();
    let s1: Vec<f64> = t.rows.iter().map(|r| r[3].parse().unwrap()).collect();
    for (got, want) in s1.iter().zip([0.3139, 0.4424, 0.0]) {
        assert!((got - want).abs() < 0.02, "{s1:?}");
    }
    assert!(dir.path().join("out/manifest_study.json").exists());
}
