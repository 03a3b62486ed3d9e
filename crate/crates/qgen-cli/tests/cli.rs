use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgen::scenarios::classification::ClassificationConfig;
use qgen_cli::{parse_config_str, ConfigError};
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn qgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgen")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qgen(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config_str("kind = \"state_classification\"\n", Path::new("min.toml")).unwrap();
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.classification, Some(ClassificationConfig::default()));
    assert!(cfg.sweep.is_none());
}

#[test]
fn unknown_key_reports_location() {
    let err = parse_config_str("kind = \"random\"\nbogus = 1\n", Path::new("bad.toml")).unwrap_err();
    match err {
        ConfigError::Syntax { line, column, ref message, .. } => {
            assert_eq!((line, column), (2, 1));
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "kind = \"random\"\nbogus = 1\n");
    let o = run("certify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:2:1"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let o = run("certify", &dir.path().join("nope.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_enumeration_names_the_cap() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.toml",
        "kind = \"state_classification\"\nenum_cap = 10\n[classification]\nm = 8\n",
    );
    let o = run("certify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("10"), "{}", stderr(&o));
}

#[test]
fn passing_run_writes_both_reports() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "ok.toml", "kind = \"state_classification\"\nseed = 4\n");
    let o = run("certify", &cfg, &out, &["--bound", "cor22"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 4);
    assert_eq!(json["command"], "certify");
    assert_eq!(json["configHash"].as_str().unwrap().len(), 64);
    assert_eq!(json["points"].as_array().unwrap().len(), 1);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("axis,gen,qmiTerm,holevoTerm,miTerm,rhs,slack"));
}

#[test]
fn understated_alpha_fails_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "tiny.toml",
        "kind = \"state_classification\"\n[bound]\nalpha = 1e-6\n",
    );
    let o = run("certify", &cfg, &dir.path().join("out"), &["--bound", "cor22"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn sweep_csv_has_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "sweep.toml",
        "kind = \"state_classification\"\n[sweep]\naxis = \"m\"\nvalues = [1, 2, 3, 4, 5]\n",
    );
    let o = run("sweep", &cfg, &out, &["--bound", "cor22", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(!out.join("report.json").exists());
    let axis: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(axis, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn sweep_without_section_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "kind = \"random\"\n");
    let o = run("sweep", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "r.toml", "kind = \"random\"\nseed = 21\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run("certify", &cfg, &a, &["--jobs", "1"]).status.success());
    assert!(run("certify", &cfg, &b, &["--jobs", "3"]).status.success());
    for f in ["report.json", "report.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "s.toml", "kind = \"random\"\nseed = 1\n");
    assert!(run("certify", &cfg, &out, &["--seed", "8", "--format", "json"]).status.success());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 8);
}

#[test]
fn scenarios_list_names_every_kind() {
    let o = qgen(&["scenarios", "list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for kind in ["state_classification", "pac_state_learning", "entangled_pac", "parameter_estimation", "random"] {
        assert!(text.contains(kind), "{kind} missing from\n{text}");
    }
}

#[test]
fn bad_flag_exits_with_config_code() {
    assert_eq!(qgen(&["certify", "--frobnicate"]).status.code(), Some(2));
}
