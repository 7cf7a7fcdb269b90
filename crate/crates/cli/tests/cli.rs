use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyapcert"))
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn lyapcert")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn ou_accepts_below_threshold_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let ou = problem("ou.json");
    let o = run(&["certify", "--problem", ou.to_str().unwrap(), "--delta", "0.4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&out);
    assert_eq!(r["certificate"]["accepted"], true);
    let d = &r["certificate"]["deltas"][0];
    assert_eq!(d["delta"], 0.4);
    let bound = d["exp_bound"]["value"].as_f64().unwrap();
    assert_eq!(d["exp_bound"]["source"], "formula");
    let oracle = r["oracle"][0]["report"]["value"].as_f64().unwrap();
    assert!((oracle - 1.0 / 0.2f64.sqrt()).abs() < 1e-5, "{oracle}");
    assert!(bound >= oracle);
    assert_eq!(r["constants"]["c"]["source"], "fit");
    assert!((r["constants"]["c"]["value"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(r["provenance"]["grid"]["n"], 401);
    assert_eq!(r["violations"]["passed"], true);
}

#[test]
fn ou_rejects_at_threshold() {
    let ou = problem("ou.json");
    let o = run(&["certify", "--problem", ou.to_str().unwrap(), "--delta", "0.5"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["certificate"]["accepted"], false);
    assert!(!r["certificate"]["deltas"][0]["reasons"].as_array().unwrap().is_empty());
}

#[test]
fn flag_order_does_not_change_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ou = problem("ou.json");
    let (p, out) = (ou.to_str().unwrap(), dir.path().join("a.json"));
    let out = out.to_str().unwrap();
    for (delta, want) in [("0.4", 0), ("0.5", 2)] {
        let orders: [Vec<&str>; 3] = [
            vec!["certify", "--problem", p, "--delta", delta, "--out", out],
            vec!["certify", "--out", out, "--delta", delta, "--problem", p],
            vec!["certify", "--delta", delta, "--problem", p, "--out", out],
        ];
        for args in orders {
            assert_eq!(code(&run(&args)), want, "{args:?}");
        }
    }
}

#[test]
fn optimize_gozlan_m2() {
    let o = run(&["optimize-gozlan", "--m", "2"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let d = r["delta_star"].as_f64().unwrap();
    assert!((d - 0.11274).abs() < 1e-4, "{d}");
    assert!(stderr(&o).contains("0.11273"));
}

#[test]
fn input_errors_exit_one_with_distinct_messages() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let cases = [
        (write("malformed.json", "{\"kind\": "), "malformed JSON"),
        (write("kind.json", r#"{"kind": "levy"}"#), "unknown kind"),
        (
            write(
                "infeasible.json",
                r#"{"kind": "gozlan", "m": 2, "V": "x1^2 + x2^2", "delta": 0.1,
                    "gozlan": {"eps1": 0.5, "eps2": 0.1, "eps3": 0.1}}"#,
            ),
            "infeasible",
        ),
        (write("missing.json", r#"{"kind": "diffusion", "V": "x^2"}"#), "missing"),
        (write("expr.json", r#"{"kind": "diffusion", "V": "x^^2", "W": "x", "delta": 0.1}"#), "cannot parse"),
    ];
    let mut seen = Vec::new();
    for (path, needle) in &cases {
        let o = run(&["certify", "--problem", path.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{needle}: {}", stderr(&o));
        let msg = stderr(&o);
        assert!(msg.contains(needle), "{needle} not in {msg}");
        seen.push(msg);
    }
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), cases.len());
    assert_eq!(code(&run(&["certify", "--problem", "/nonexistent/p.json"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn randomness_needs_a_seed() {
    let o = run(&["audit", "--count", "5"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn monte_carlo_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = read_json(&problem("mc_3d.json"));
    p.as_object_mut().unwrap().remove("seed");
    let path = dir.path().join("p.json");
    std::fs::write(&path, p.to_string()).unwrap();
    let o = run(&["certify", "--problem", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("seed"));
    let o = run(&["certify", "--problem", path.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn random_audit_passes() {
    let o = run(&["audit", "--seed", "1", "--count", "1000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn report_round_trip_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["ou.json", "unbounded.json", "log_chain.json", "gozlan_2d.json", "mc_3d.json"] {
        let out = dir.path().join(format!("{name}.cert"));
        let p = problem(name);
        let o = run(&["certify", "--problem", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        let a = run(&["audit", "--report", out.to_str().unwrap()]);
        assert_eq!(code(&a), 0, "{name}: {}", stderr(&a));
        assert!(stderr(&a).contains("reproduced"));
    }
}

#[test]
fn tampered_report_is_not_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let p = problem("ou.json");
    assert_eq!(code(&run(&["certify", "--problem", p.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let mut r = read_json(&out);
    r["constants"]["c"]["value"] = Value::from(0.3);
    std::fs::write(&out, serde_json::to_string(&r).unwrap()).unwrap();
    let a = run(&["audit", "--report", out.to_str().unwrap()]);
    assert_eq!(code(&a), 2, "{}", stderr(&a));
}

#[test]
fn jump_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let p = problem("log_chain.json");
    let o = run(&["series", "--problem", p.to_str().unwrap(), "--delta", "0.2", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["i", "mu", "rho", "term", "partial_sum"]);
    assert!(rd.records().count() > 100);
    let o = run(&["series", "--problem", p.to_str().unwrap(), "--delta", "0.3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn moments_table_matches_known_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let o = run(&["moments", "--c", "0.25", "--b", "0.5", "--n", "3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let b: Vec<f64> = r["bounds"].as_array().unwrap().iter().map(|x| x["beta_bound"].as_f64().unwrap()).collect();
    assert_eq!(b, [1.0, 2.0, 8.0, 48.0]);
    assert!(csv.exists());
}

#[test]
fn gozlan_and_mc_problems_certify() {
    for name in ["gozlan_2d.json", "mc_3d.json"] {
        let p = problem(name);
        let o = run(&["certify", "--problem", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(r["oracle"][0]["source"].as_str().unwrap().starts_with("oracle:"));
    }
}
