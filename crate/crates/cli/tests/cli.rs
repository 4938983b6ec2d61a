use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_budgetlearn"));
    c.env_remove("BUDGETLEARN_SEED");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn generate_profiles_have_documented_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "generate",
            "--profile",
            "plasma-like",
            "--seed",
            "7",
            "--out",
            "data.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&dir.path().join("data.csv")), 114);
    assert!(stdout(&o).contains("114 rows"));
    let o = run(
        &[
            "generate",
            "--profile",
            "pathogen-like",
            "--seed",
            "7",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(data_rows(&dir.path().join("p.csv")), 160);
}

#[test]
fn generate_without_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--profile", "pathogen-like", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));
}

#[test]
fn dry_run_echoes_defaults_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--profile", "blobs", "--dry-run", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in [
        "warm_start = 40",
        "final_count = 90",
        "grid_step = 5",
        "repeats = 10",
        "epochs = 200",
        "seed = 0",
    ] {
        assert!(text.contains(key), "missing `{key}` in\n{text}");
    }
    assert!(!dir.path().join("res").exists());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--profile", "blobs", "--dry-run"])
        .env("BUDGETLEARN_SEED", "42")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(stdout(&o).contains("seed = 42"));
    let o = bin()
        .args(["run", "--profile", "blobs", "--dry-run", "--seed", "5"])
        .env("BUDGETLEARN_SEED", "42")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(stdout(&o).contains("seed = 5"));
}

#[test]
fn final_count_above_fold_size_names_both() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "run",
            "--profile",
            "plasma-like",
            "--final-count",
            "100",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("F = 100") && err.contains("T = 91"), "{err}");
    assert!(!dir.path().join("res").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), "profile = \"blobs\"\nwarm_starts = 4\n").unwrap();
    let o = run(&["run", "--config", "exp.toml", "--dry-run"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("warm_starts"));
}

const SMALL: &str = "profile = \"blobs\"\nwarm_start = 6\nfinal_count = 30\ngrid_step = 4\nrepeats = 2\nepochs = 30\n";

#[test]
fn run_writes_one_curve_per_approach_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = run(
        &[
            "run",
            "--config",
            "exp.toml",
            "--approach",
            "passive,active",
            "--strategy",
            "entropy",
            "--final-count",
            "14",
            "--out",
            "res",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("accuracy")).count(), 2);
    let res = dir.path().join("res");
    let mut curves: Vec<String> = fs::read_dir(&res)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("curve_"))
        .collect();
    curves.sort();
    assert_eq!(curves, ["curve_active_entropy.csv", "curve_passive_random.csv"]);
    let text = fs::read_to_string(res.join("curve_passive_random.csv")).unwrap();
    let labels: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["6", "10", "14"]);
    assert!(res.join("diagnostics.json").exists());
    let trace = res.join("selection_trace_active_entropy_r0_f0.csv");
    assert_eq!(data_rows(&trace), 14);
}

#[test]
fn outputs_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let out = format!("res{jobs}");
        let o = run(
            &[
                "run",
                "--config",
                "exp.toml",
                "--approach",
                "active,hybrid",
                "--sigma",
                "3",
                "--jobs",
                jobs,
                "--out",
                &out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join(&out))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn diagnose_reports_separable_data_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["generate", "--profile", "blobs", "--noise-std", "0", "--out", "b.csv"],
        dir.path(),
    );
    assert!(o.status.success());
    let mut first = None;
    for out in ["d1", "d2"] {
        let o = run(&["diagnose", "--data", "b.csv", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let json = fs::read_to_string(dir.path().join(out).join("diagnostics.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["kmeans"]["k"], 4);
        assert!(v["kmeans"]["agreement"].as_f64().unwrap() >= 0.95);
        assert_eq!(data_rows(&dir.path().join(out).join("pca_coords.csv")), 160);
        match &first {
            None => first = Some(json),
            Some(f) => assert_eq!(f, &json),
        }
    }
}
