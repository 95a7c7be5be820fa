use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

/// Quartic λ = 0.4 levels from Numerov shooting.
const QUARTIC_04: [f64; 10] = [
    0.602405163731,
    1.950543525639,
    3.536299363202,
    5.291268542661,
    7.184456293032,
    9.196339506974,
    11.313238526443,
    13.524907026942,
    15.823319030506,
    18.201980586407,
];

fn ahcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahcs")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn harmonic_levels() {
    let out = ahcs(&["spectrum", "--model", "diagonal", "--lambda", "0", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(floats(&v["levels"]), vec![0.5, 1.5, 2.5]);
}

#[test]
fn quartic_levels_match_shooting() {
    let out = ahcs(&["spectrum", "--model", "quartic", "--omega", "1", "--lambda", "0.4", "--levels", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let levels = floats(&v["levels"]);
    assert_eq!(levels.len(), 20);
    assert_eq!(v["n_converged"].as_u64(), Some(20));
    for (e, want) in levels.iter().zip(QUARTIC_04) {
        assert!(((e - want) / want).abs() < 1e-8, "{e} vs {want}");
    }
}

#[test]
fn negative_coupling_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.json");
    let out = ahcs(&["spectrum", "--lambda", "-1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lambda"));
    assert!(!path.exists());
}

#[test]
fn unknown_flag_is_a_validation_error() {
    assert_eq!(ahcs(&["spectrum", "--lamda", "0.1"]).status.code(), Some(1));
    assert_eq!(ahcs(&["spectrum", "--model", "cubic"]).status.code(), Some(1));
}

#[test]
fn evolution_suite_passes() {
    let out = ahcs(&["verify", "evolution", "--model", "diagonal", "--lambda", "0.1", "--rho", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS evolution relabel-deviation"));
}

#[test]
fn commensurate_identity_single_window() {
    let out = ahcs(&["verify", "identity", "--lambda", "0", "--cesaro", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS identity poisson-diagonal"));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn identity_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("identity.json");
    let out = ahcs(&["verify", "identity", "--lambda", "0.1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&path);
    assert_eq!(v["passed"], Value::Bool(true));
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["poisson-diagonal", "radial-mass", "offdiag-decreasing", "decay-slope"]);
}

#[test]
fn bohr_peak() {
    let out = ahcs(&["verify", "bohr", "--rho", "3.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("argmax n = 12"));
}

#[test]
fn uncertainty_suite_passes() {
    let out = ahcs(&["verify", "uncertainty"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS uncertainty k-decreasing"));
}

#[test]
fn quartic_recurrence_passes() {
    let out = ahcs(&["verify", "recurrence", "--model", "quartic", "--rho", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn suite_failure_names_the_invariant() {
    // diagonal spacings 1 + 2λ(n + 1) are commensurate, so ⟨q⟩ recurs exactly
    let out = ahcs(&["verify", "recurrence", "--model", "diagonal", "--lambda", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL recurrence no-exact-recurrence"));
    assert!(stderr(&out).contains("no-exact-recurrence"));
}

#[test]
fn harmonic_inversion_is_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    let out = ahcs(&["invert", "--lambda", "0", "--tol", "1e-6", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&path);
    assert!(v["provenance"]["max_roundtrip_error"].as_f64().unwrap() < 1e-6);
    for (q, u) in floats(&v["Q"]).iter().zip(floats(&v["u"])).skip(1) {
        assert!((0.5 * q * q - u).abs() <= 1e-6 * u, "Q = {q}, u = {u}");
    }
}

#[test]
fn diagonal_inversion_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    let out = ahcs(&["invert", "--model", "diagonal", "--lambda", "0.1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&path);
    assert!(v["provenance"]["max_roundtrip_error"].as_f64().unwrap() < 1e-4);
    let lambda: f64 = 0.1;
    for (q, u) in floats(&v["Q"]).iter().zip(floats(&v["u"])).step_by(50) {
        let exact = ((2.0 * lambda).sqrt() * q).tan().powi(2) / (4.0 * lambda);
        assert!((exact - u).abs() <= 1e-5 * u.max(1e-3), "Q = {q}: {u} vs {exact}");
    }
}

#[test]
fn truncated_period_table_is_a_range_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    let out = ahcs(&["invert", "--levels", "5", "--h-max", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("outside the valid range"));
    assert!(!path.exists());
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--model", "quartic", "--lambda", "0.1", "--levels", "12"][..],
        &["verify", "identity"][..],
        &["trajectory", "--model", "quartic", "--rho", "1.5", "--format", "csv"][..],
    ] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        for path in [&a, &b] {
            let mut full = args.to_vec();
            full.extend(["--out", path.to_str().unwrap()]);
            assert_eq!(ahcs(&full).status.code(), Some(0));
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"model": "diagonal", "lambda": 0.0, "levels": 4, "format": "csv"}"#).unwrap();
    let out = ahcs(&["spectrum", "--config", config.to_str().unwrap(), "--levels", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "n,energy\n0,0.5\n1,1.5\n");

    fs::write(&config, r#"{"lamda": 0.1}"#).unwrap();
    assert_eq!(ahcs(&["spectrum", "--config", config.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn saved_spectrum_feeds_state() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("spectrum.json");
    let args = ["--model", "quartic", "--lambda", "0.4"];
    let mut first = vec!["spectrum", "--levels", "60", "--out", spectrum.to_str().unwrap()];
    first.extend(args);
    assert_eq!(ahcs(&first).status.code(), Some(0));

    let from_file = ahcs(&["state", "--rho", "1.5", "--spectrum", spectrum.to_str().unwrap()]);
    let mut direct = vec!["state", "--rho", "1.5"];
    direct.extend(args);
    let direct = ahcs(&direct);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    let a: Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    let b: Value = serde_json::from_str(&stdout(&direct)).unwrap();
    let (ca, cb) = (a["coefficients"].as_array().unwrap(), b["coefficients"].as_array().unwrap());
    assert_eq!(ca.len(), cb.len());
    for (x, y) in ca.iter().zip(cb) {
        for k in 0..2 {
            assert!((x[k].as_f64().unwrap() - y[k].as_f64().unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = ahcs(&["spectrum", "--out", blocker.join("x.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evolve_reports_relabel_deviation() {
    let out = ahcs(&["evolve", "--rho", "2", "--theta", "0.5", "--time", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["relabel_deviation"].as_f64().unwrap() < 1e-12);
    let hprime = v["state"]["hprime"].as_f64().unwrap();
    assert!((v["theta_relabel"].as_f64().unwrap() - (0.5 + 10.0 * hprime)).abs() < 1e-12);
}

#[test]
fn trajectory_closes_after_one_period() {
    let out = ahcs(&["trajectory", "--lambda", "0.1", "--rho", "2", "--theta", "0.3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q,p,R,Theta_unwrapped,H,tau"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 257);
    let (first, last) = (&rows[0], &rows[256]);
    assert!((first[1] - last[1]).abs() < 1e-12 && (first[2] - last[2]).abs() < 1e-12);
    assert!(rows.iter().all(|r| (r[5] - first[5]).abs() < 1e-12));
}
