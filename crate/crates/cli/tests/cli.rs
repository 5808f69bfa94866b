use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&d1, &d2] {
        let out = sdesim(&["simulate", "--model", "heston", "--m", "6", "--paths", "2", "--seed", "9", "--out", arg(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["trajectory_0.csv", "trajectory_1.csv", "manifest.json"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(d1.join("trajectory_0.csv")).unwrap();
    assert!(text.starts_with("t,S,v\n"));
    assert_eq!(text.lines().count(), 1 + 65);
    assert_ne!(
        fs::read(d1.join("trajectory_0.csv")).unwrap(),
        fs::read(d1.join("trajectory_1.csv")).unwrap()
    );
}

#[test]
fn manifest_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    let out = sdesim(&["simulate", "--model", "linear2d", "--m", "5", "--area-sampler", "rw", "--seed", "3", "--out", arg(&d1)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = d1.join("manifest.json");
    let out = sdesim(&["simulate", "--config", arg(&manifest), "--out", arg(&d2)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(d1.join("trajectory_0.csv")).unwrap(),
        fs::read(d2.join("trajectory_0.csv")).unwrap()
    );
    assert_eq!(fs::read(&manifest).unwrap(), fs::read(d2.join("manifest.json")).unwrap());
    // a manifest belongs to its subcommand
    let out = sdesim(&["converge", "--config", arg(&manifest)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn zero_paths_is_a_validation_error() {
    let out = sdesim(&["simulate", "--paths", "0"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("paths"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&sdesim(&["--help"])), 0);
    assert_eq!(code(&sdesim(&["no-such-command"])), 1);
    assert_eq!(code(&sdesim(&["simulate", "--m", "many"])), 1);
    assert_eq!(code(&sdesim(&["simulate", "--model", "heston", "--a", "2"])), 1);
    assert_eq!(code(&sdesim(&["fk-check", "--model", "heston"])), 1);
    // overflow to infinity is a numeric failure, not a config problem
    assert_eq!(code(&sdesim(&["simulate", "--a", "1e300", "--m", "2"])), 2);
    let out = sdesim(&["levy-test", "--samples", "2000", "--threshold", "1e-9"]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains(",false"));
}

#[test]
fn weak_strong_defaults_give_21_rows() {
    let out = sdesim(&["weak-strong"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,mean_binomial,mean_gaussian,analytic"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0], vec![0.0, 1.0, 1.0, 1.0]);
    assert!((rows[20][0] - 1.0).abs() < 1e-12);
    assert!((rows[20][3] - 3f64.exp()).abs() < 1e-12);
}

#[test]
fn weak_strong_writes_path_matrices() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sdesim(&["weak-strong", "--paths", "4", "--out", arg(dir.path())])), 0);
    let m = fs::read_to_string(dir.path().join("paths_gaussian.csv")).unwrap();
    assert_eq!(m.lines().count(), 22);
    assert_eq!(m.lines().next().unwrap(), "t,p0,p1,p2,p3");
}

#[test]
fn selftest_passes() {
    let out = sdesim(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains(",false,"));
}

fn without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.pop();
            f.join(",")
        })
        .collect()
}

#[test]
fn converge_is_independent_of_thread_count() {
    let base = ["converge", "--paths", "64", "--m", "7", "--scheme", "milstein", "--seed", "5"];
    let runs: Vec<String> = ["1", "3"]
        .iter()
        .map(|t| {
            let mut args = base.to_vec();
            args.extend(["--threads", t]);
            let out = sdesim(&args);
            assert_eq!(code(&out), 0);
            stdout(&out)
        })
        .collect();
    assert_eq!(without_timing(&runs[0]), without_timing(&runs[1]));
    let lines: Vec<&str> = runs[0].lines().collect();
    assert_eq!(lines[0], "level,h,rms_error,stderr,cpu_seconds");
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[1].starts_with("4,"));
    assert!(lines[5].starts_with("fit,"));
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"gbm\"\na = 2.0\npaths = 3\nM = 4\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = sdesim(&["simulate", "--config", arg(&cfg), "--paths", "2", "--out", arg(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["a"], "2");
    assert_eq!(manifest["paths"], "2");
    assert_eq!(manifest["m"], "4");
    assert_eq!(manifest["b"], "1.4");
    assert!(out_dir.join("trajectory_1.csv").exists());
    assert!(!out_dir.join("trajectory_2.csv").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"model": "gbm", "volatility": 2}"#).unwrap();
    let out = sdesim(&["simulate", "--config", arg(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("volatility"));
}

#[test]
fn json_output_parses() {
    let out = sdesim(&["simulate", "--m", "3", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["labels"][0], "y");
    assert_eq!(v["paths"][0]["t"].as_array().unwrap().len(), 9);
}

#[test]
fn stdout_simulate_adds_path_column_for_several_paths() {
    let out = sdesim(&["simulate", "--m", "2", "--paths", "3"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("path,t,y"));
    assert_eq!(text.lines().count(), 1 + 3 * 5);
}
