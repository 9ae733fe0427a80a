use std::process::Command;

use serde_json::Value;

fn opalab(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_opalab"))
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let json = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (
        out.status.code().unwrap_or(-1),
        json,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn chsh_canonical_reaches_tsirelson() {
    let (code, report, _) = opalab(&["chsh", "--n", "100000", "--seed", "7", "--angles", "canonical"]);
    assert_eq!(code, 0);
    let s = report["s"].as_f64().unwrap();
    assert!((s.abs() - 2.0 * 2f64.sqrt()).abs() < 0.03, "S = {s}");
    assert_eq!(report["disjoint"], Value::Bool(true));
    assert_eq!(report["correlators"].as_array().unwrap().len(), 4);
}

#[test]
fn average_of_sx_in_sz_plus() {
    let (code, report, _) = opalab(&[
        "average", "--model", "qubit", "--state", "sz+", "--observable", "sx", "--n", "10000",
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["target"].as_f64(), Some(0.0));
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn postulates_pass() {
    let (code, report, _) = opalab(&["postulates", "--dim", "4", "--trials", "50"]);
    assert_eq!(code, 0);
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn unknown_names_exit_two() {
    let (code, _, err) = opalab(&["average", "--model", "qutrit", "--state", "sz+", "--observable", "sx"]);
    assert_eq!(code, 2);
    assert!(err.contains("qutrit"), "{err}");
    let (code, _, err) = opalab(&["inspect-context", "--model", "qubit", "--observables", "sw"]);
    assert_eq!(code, 2);
    assert!(err.contains("sw"), "{err}");
    let (code, _, _) = opalab(&["chsh", "--angles", "0,1"]);
    assert_eq!(code, 2);
    let (code, _, _) = opalab(&["no-such-command"]);
    assert_eq!(code, 2);
}

#[test]
fn incompatible_generators_are_rejected() {
    let (code, _, err) = opalab(&["inspect-context", "--model", "qubit", "--observables", "sx,sz"]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
}

#[test]
fn inspect_singlet_context() {
    let (code, dump, _) = opalab(&["inspect-context", "--model", "singlet", "--observables", "sz_total,swap"]);
    assert_eq!(code, 0);
    assert_eq!(dump["dim"], 4);
    assert_eq!(dump["generators"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_trail_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let out = dir.path().join("report.json");
    let trail = dir.path().join("trail.csv");
    std::fs::write(
        &config,
        format!(
            r#"{{"model": "oscillator", "n": 4096, "seed": 5, "state": "ground", "observable": "x", "output": "{}"}}"#,
            out.display()
        ),
    )
    .unwrap();
    let (code, report, _) = opalab(&[
        "average",
        "--config",
        config.to_str().unwrap(),
        "--trail-csv",
        trail.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["n"], 4096);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, report);
    let csv = std::fs::read_to_string(&trail).unwrap();
    assert!(csv.starts_with("n,running_mean\n1,"));
    assert_eq!(csv.lines().count(), 1 + 13);
}

#[test]
fn gns_of_singlet() {
    let (code, report, _) = opalab(&["gns", "--model", "singlet", "--state", "singlet"]);
    assert_eq!(code, 0);
    assert_eq!(report["quotient_dim"], 4);
    assert_eq!(report["algebra_dim"], 4);
}

#[test]
fn epr_report() {
    let (code, report, _) = opalab(&["epr", "--n", "1000", "--seed", "3"]);
    assert_eq!(code, 0);
    for axis in report["axes"].as_array().unwrap() {
        assert_eq!(axis["anticorrelation_frequency"].as_f64(), Some(1.0));
    }
}
