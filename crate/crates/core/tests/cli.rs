use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn icered(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icered")).args(args).arg("--config").arg(config).output().expect("spawn icered")
}

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn run_writes_json_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"type": "linear", "d": 10, "beta": 3.0}, "solver": {"n_per_level": 400}}"#,
    );
    let out = dir.path().join("r.json");
    let o = icered(&["run", "--seed", "3", "--out", out.to_str().unwrap()], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["method"], "icered");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["converged"], true);
    let p = v["p_hat"].as_f64().unwrap();
    let reference = v["reference_p"].as_f64().unwrap();
    assert!((p / reference - 1.0).abs() < 0.5);
    assert!(!v["per_level"].as_array().unwrap().is_empty());
    assert!(v.get("elapsed_ms").is_none());
}

#[test]
fn method_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"type": "linear", "d": 2, "beta": 1.0}, "mc_samples": 5000}"#,
    );
    let o = icered(&["run", "--method", "mc"], &cfg);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["method"], "mc");
    assert_eq!(v["lsf_calls"], 5000);
}

#[test]
fn non_converged_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"type": "linear", "d": 2, "beta": 6.0}, "method": "ce", "solver": {"n_per_level": 100, "t_max": 1}}"#,
    );
    let o = icered(&["run"], &cfg);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert!(v["note"].is_string());
}

#[test]
fn invalid_configurations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", r#"{"problem": "#),
        ("unknown.json", r#"{"problem": {"type": "linear", "d": 2, "beta": 1.0}, "sovler": {}}"#),
        ("range.json", r#"{"problem": {"type": "linear", "d": 2, "beta": 1.0}, "solver": {"delta": -1.0}}"#),
        ("kind.json", r#"{"problem": {"type": "nonlinear", "d": 2}}"#),
    ];
    for (name, json) in cases {
        let cfg = write_config(dir.path(), name, json);
        let o = icered(&["run"], &cfg);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"), "{name}");
    }
    let o = icered(&["run"], &dir.path().join("missing.json"));
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_icered")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn study_writes_one_row_per_run_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"type": "linear", "d": 5, "beta": 2.5}, "solver": {"n_per_level": 300}, "runs": 4}"#,
    );
    let out = dir.path().join("s.csv");
    let o = icered(&["study", "--seed", "10", "--out", out.to_str().unwrap()], &cfg);
    assert_eq!(o.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["run", "seed", "p_hat", "cv_hat", "n_levels", "lsf_calls", "grad_calls", "converged"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows[..4].iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), i);
        assert_eq!(row[1].parse::<u64>().unwrap(), 10 + i as u64);
    }
    assert_eq!(&rows[4][0], "summary");
    let p: Vec<f64> = rows[..4].iter().map(|r| r[2].parse().unwrap()).collect();
    let mean: f64 = rows[4][2].parse().unwrap();
    assert!((mean - p.iter().sum::<f64>() / 4.0).abs() <= 1e-15 * mean);

    // Each study row equals the corresponding single run.
    let single = icered(&["run", "--seed", "12"], &cfg);
    let v: serde_json::Value = serde_json::from_slice(&single.stdout).unwrap();
    assert_eq!(v["p_hat"].as_f64().unwrap(), p[2]);
}

#[test]
fn spectrum_writes_eigenvalues_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"type": "bar", "n_elem": 40, "n_kl": 10, "n_gp": 60}, "solver": {"n_per_level": 300}}"#,
    );
    let out = dir.path().join("spec.csv");
    let o = icered(&["spectrum", "--seed", "1", "--out", out.to_str().unwrap()], &cfg);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["level", "index", "eigenvalue", "rank", "eps"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().filter(|r| &r[0] == "0").count() == 11);

    let modes = fs::read_to_string(dir.path().join("spec_eigvecs.csv")).unwrap();
    assert_eq!(modes.lines().count(), 12);
    let kl = fs::read_to_string(dir.path().join("spec_kl.csv")).unwrap();
    assert_eq!(kl.lines().count(), 11);
}

#[test]
fn spectrum_rejects_other_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "c.json", r#"{"problem": {"type": "linear", "d": 3, "beta": 2.0}, "method": "ice"}"#);
    assert_eq!(icered(&["spectrum"], &cfg).status.code(), Some(2));
}
