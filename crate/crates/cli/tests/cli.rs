use std::fs;
use std::process::{Command, Output};

fn hafactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hafactor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn json_summary_for_551() {
    let out = hafactor(&["factor", "551", "--json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["n", "p", "q", "method", "split", "residual_vars", "qubits", "final_fidelity", "verified"]
    );
    assert_eq!(v["p"], 19);
    assert_eq!(v["q"], 29);
    assert_eq!(v["method"], "HybridAdiabatic");
    assert_eq!(v["split"], serde_json::json!([5, 5]));
    assert_eq!(v["qubits"], 3);
    assert_eq!(v["verified"], true);
    assert!(v["final_fidelity"].as_f64().unwrap() > 0.99);
}

#[test]
fn writes_every_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let out = hafactor(&[
        "factor",
        "551",
        "--steps",
        "20",
        "--total-time",
        "3.5",
        "--split",
        "5,5",
        "--dump-equations",
        &path("eq.json"),
        "--dump-residual",
        &path("res.json"),
        "--dump-hamiltonian",
        &path("ham.json"),
        "--trace",
        &path("trace.csv"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("551 = 19 x 29"));

    let eq: serde_json::Value = serde_json::from_str(&fs::read_to_string(path("eq.json")).unwrap()).unwrap();
    assert_eq!(eq["equations"].as_array().unwrap().len(), 10);

    let res: serde_json::Value = serde_json::from_str(&fs::read_to_string(path("res.json")).unwrap()).unwrap();
    assert_eq!(res["free"], serde_json::json!(["p1", "p2", "p3"]));
    assert_eq!(res["fixed"]["C5"], 2);

    let ham: serde_json::Value = serde_json::from_str(&fs::read_to_string(path("ham.json")).unwrap()).unwrap();
    assert_eq!(ham["qubits"], 3);
    assert_eq!(ham["terms"].as_array().unwrap().len(), 4);
    assert_eq!(ham["terms"][0]["exact"], "3/2");

    let csv = fs::read_to_string(path("trace.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], ["step", "s", "E_0"]);
    assert_eq!(header.len(), 2 + 8 + 2 + 8);
    assert_eq!(header[10..12], ["gap", "fidelity"]);
    assert_eq!(lines.count(), 21);
}

#[test]
fn spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("spec.csv");
    let out = hafactor(&["spectrum", "551", "--samples", "101", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(&file).unwrap();
    assert_eq!(csv.lines().count(), 102);
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert_eq!(*last.last().unwrap(), 2.0);
}

#[test]
fn peng_mode() {
    let out = hafactor(&["factor", "35", "--mode", "peng", "--json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["p"].as_u64(), v["q"].as_u64()), (Some(5), Some(7)));
    assert_eq!(v["method"], "PengGlobal");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&hafactor(&["factor", "13"])), 2);
    assert_eq!(code(&hafactor(&["factor", "1261"])), 3);
    assert_eq!(code(&hafactor(&["factor", "551", "--qubit-cap", "2"])), 3);
    assert_eq!(code(&hafactor(&["factor", "551", "--split", "3,7"])), 4);
    assert_eq!(code(&hafactor(&["factor", "551", "--split", "five"])), 4);
    assert_eq!(code(&hafactor(&["factor", "1"])), 4);
    assert_eq!(code(&hafactor(&["factor", "not-a-number"])), 4);
    assert_eq!(code(&hafactor(&["factor", "551", "--steps", "0"])), 4);
    assert_eq!(code(&hafactor(&["bogus"])), 4);
    assert_eq!(code(&hafactor(&["--help"])), 0);
}

#[test]
fn classical_results_skip_quantum_exports() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = hafactor(&["factor", "9", "--trace", trace.to_str().unwrap(), "--json"]);
    assert_eq!(code(&out), 0);
    assert!(!trace.exists());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["method"], "ClassicalOnly");
    assert_eq!(v["final_fidelity"], serde_json::Value::Null);
    assert_eq!(code(&hafactor(&["spectrum", "9", "--out", dir.path().join("s.csv").to_str().unwrap()])), 4);
}
