use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cdspp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdspp"))
        .args(args)
        .env_remove("CDSPP_JOBS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--dir", d];
    args.extend_from_slice(extra);
    let o = cdspp(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("manifest.toml").to_str().unwrap().to_string()
}

#[test]
fn help_lists_flags() {
    let o = cdspp(&["run", "--help"]);
    assert!(o.status.success());
    let help = stdout(&o);
    for flag in [
        "--manifest",
        "--mode",
        "--d",
        "--alpha",
        "--iterations",
        "--pca",
        "--seed",
        "--output",
        "--class-balanced",
        "--strict",
        "--lss",
        "--lts",
        "--uts",
    ] {
        assert!(help.contains(flag), "{flag} missing from run help");
    }
    let help = stdout(&cdspp(&["benchmark", "--help"]));
    for flag in ["--trials", "--jobs", "CDSPP_JOBS"] {
        assert!(help.contains(flag), "{flag} missing from benchmark help");
    }
    let top = stdout(&cdspp(&["--help"]));
    for cmd in ["run", "benchmark", "split", "export-embedding", "synth"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = cdspp(&["run", "--manifest", "m.toml", "-o", "r.toml", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_dimension_is_usage_error() {
    let o = cdspp(&["run", "--manifest", "m.toml", "-o", "r.toml", "--d", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--d"));
}

#[test]
fn zero_trials_is_usage_error() {
    let o = cdspp(&[
        "benchmark",
        "--manifest",
        "m.toml",
        "-o",
        "t.csv",
        "--trials",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.toml");
    let out = dir.path().join("r.toml");
    let o = cdspp(&[
        "run",
        "--manifest",
        missing.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("absent.toml"), "{err}");
    assert!(err.contains("load manifest"), "{err}");
}

#[test]
fn missing_feature_file_names_path() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    fs::remove_file(dir.path().join("target.csv")).unwrap();
    let out = dir.path().join("r.toml");
    let o = cdspp(&["run", "--manifest", &manifest, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("target.csv"));
}

#[test]
fn malformed_features_report_line() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    let path = dir.path().join("source.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text = text.replacen('\n', "\n1.0,abc\n", 1);
    fs::write(&path, text).unwrap();
    let out = dir.path().join("r.toml");
    let o = cdspp(&["run", "--manifest", &manifest, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("source.csv"));
}

#[test]
fn missing_class_is_insufficient_data() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    let out = dir.path().join("r.toml");
    let o = cdspp(&[
        "run",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--lts",
        "60",
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn semi_run_prints_trace_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    let out = dir.path().join("r.toml");
    let o = cdspp(&[
        "run",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--mode",
        "semi",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("iteration ")).count(),
        5
    );
    assert!(text.contains("final accuracy: "));
    let report = cdspp::dataio::load_report(&out).unwrap();
    assert_eq!(report.iteration_accuracy.len(), 5);
    assert_eq!(report.selected_counts, vec![30, 60, 90, 120, 150]);
    assert_eq!(report.seed, Some(0));
}

#[test]
fn supervised_run_has_no_trace() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    let out = dir.path().join("r.toml");
    let o = cdspp(&[
        "run",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--mode",
        "sup",
        "--d",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = cdspp::dataio::load_report(&out).unwrap();
    assert!(report.iteration_accuracy.is_empty());
    assert_eq!(report.config.dim_effective, 2);
}

#[test]
fn pca_flag_defaults_to_fifty_and_is_clamped() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &[]);
    let out = dir.path().join("r.toml");
    let o = cdspp(&[
        "run",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--pca",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = cdspp::dataio::load_report(&out).unwrap();
    assert_eq!(report.config.pca_components, Some(50));
    assert!(!report.warnings.is_empty());
}

fn write_tiny(dir: &Path) -> String {
    fs::write(dir.join("s.csv"), "1.0,0.0,0.2\n0.0,1.0,0.1\n").unwrap();
    fs::write(dir.join("s.txt"), "0\n1\n").unwrap();
    fs::write(dir.join("t.csv"), "0.9,0.1\n0.2,1.1\n").unwrap();
    fs::write(dir.join("t.txt"), "0\n1\n").unwrap();
    let manifest = "name = \"tiny\"\nclasses = 2\n\n[split]\nsource_per_class = \"all\"\n\
        target_labeled_per_class = 1\ntarget_unlabeled_per_class = 0\n\n\
        [source]\nfeatures = \"s.csv\"\nlabels = \"s.txt\"\ndim = 3\n\n\
        [target]\nfeatures = \"t.csv\"\nlabels = \"t.txt\"\ndim = 2\n";
    let path = dir.join("tiny.toml");
    fs::write(&path, manifest).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn export_writes_unit_rows() {
    let dir = TempDir::new().unwrap();
    let manifest = write_tiny(dir.path());
    let out = dir.path().join("emb.csv");
    let o = cdspp(&[
        "export-embedding",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--mode",
        "sup",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert!(fields[0] == "source" || fields[0] == "target");
        assert_eq!(fields[3], "");
        let norm: f64 = fields[5..]
            .iter()
            .map(|v| v.parse::<f64>().unwrap().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn export_semi_tags_pseudo_labels() {
    let dir = TempDir::new().unwrap();
    let manifest = synth(dir.path(), &["--target-unlabeled-per-class", "4"]);
    let out = dir.path().join("emb.csv");
    let o = cdspp(&[
        "export-embedding",
        "--manifest",
        &manifest,
        "-o",
        out.to_str().unwrap(),
        "--lss",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let pool: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == "unlabeled")
        .collect();
    assert_eq!(pool.len(), 12);
    // the last round labels the whole pool
    assert!(pool.iter().all(|f| !f[3].is_empty() && !f[4].is_empty()));
    assert_eq!(text.lines().count(), 15 + 9 + 12);
}

#[test]
fn benchmark_single_trial_has_zero_std() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir.path().join("a"), &["--seed", "1"]);
    let b = synth(&dir.path().join("b"), &["--seed", "2"]);
    let out = dir.path().join("table.csv");
    let o = cdspp(&[
        "benchmark",
        "--manifest",
        &a,
        "--manifest",
        &b,
        "-o",
        out.to_str().unwrap(),
        "--trials",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "task,mean,std,trials");
    assert_eq!(lines.len(), 4);
    for row in &lines[1..3] {
        assert_eq!(row.split(',').nth(2), Some("0.0"));
    }
    assert!(lines[3].starts_with("Avg,"));
    assert!(stdout(&o).lines().last().unwrap().starts_with("Avg"));
}

#[test]
fn benchmark_jobs_env_does_not_change_table() {
    let dir = TempDir::new().unwrap();
    let m = synth(
        dir.path(),
        &[
            "--source-per-class",
            "20",
            "--target-unlabeled-per-class",
            "10",
        ],
    );
    let serial = dir.path().join("serial.csv");
    let parallel = dir.path().join("parallel.csv");
    let base = ["benchmark", "--manifest", &m, "--trials", "4", "-o"];
    let o = cdspp(&[&base[..], &[serial.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_cdspp"))
        .args([&base[..], &[parallel.to_str().unwrap()]].concat())
        .env("CDSPP_JOBS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(&serial).unwrap(), fs::read(&parallel).unwrap());
}

#[test]
fn split_command_writes_indices() {
    let dir = TempDir::new().unwrap();
    let m = synth(dir.path(), &[]);
    let out = dir.path().join("split.toml");
    let o = cdspp(&[
        "split",
        "--manifest",
        &m,
        "-o",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--lss",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let split = cdspp::dataio::load_split(&out).unwrap();
    assert_eq!(split.spec.seed, 9);
    assert_eq!(split.indices.source.len(), 12);
    assert_eq!(split.indices.target_labeled.len(), 9);
    assert_eq!(split.indices.target_unlabeled.len(), 150);
}
