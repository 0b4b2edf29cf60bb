use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mlimits(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlimits"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn sample_then_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "sample.json", r#"{"density":{"kind":"sphere","dim":2,"radius":1.0},"n":1500}"#);
    let out = mlimits(&["sample", "--config", "sample.json", "--seed", "11", "--out", "."], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.join("cloud.csv")).unwrap();
    assert!(text.starts_with("x0,x1,x2"));
    assert_eq!(text.lines().count(), 1501);

    write(d, "dim.json", r#"{"cloud":"cloud.csv","m":2,"k":10,"density":{"kind":"sphere","dim":2,"radius":1.0}}"#);
    assert!(mlimits(&["dim", "--config", "dim.json", "--out", "res"], d).status.success());
    let rec = json(d, "res/dim.json");
    assert_eq!(rec["estimate"]["theoretical_limit"], 2.0);
    assert!((rec["estimate"]["value"].as_f64().unwrap() - 2.0).abs() < 0.15);
    assert!(rec["rho"].is_null());

    write(d, "ent.json", r#"{"cloud":"cloud.csv","m":2,"alpha":1.0,"density":{"kind":"sphere","dim":2,"radius":1.0}}"#);
    assert!(mlimits(&["entropy", "--config", "ent.json", "--out", "res"], d).status.success());
    let rec = json(d, "res/entropy.json");
    let h = rec["shannon"]["value"].as_f64().unwrap();
    assert!((h - (4.0 * std::f64::consts::PI).ln()).abs() < 0.2, "{h}");
    assert_eq!(rec["renyi_tsallis"]["order"], 0.5);

    write(d, "vol.json", r#"{"cloud":"cloud.csv","m":2}"#);
    assert!(mlimits(&["volume", "--config", "vol.json", "--out", "res"], d).status.success());
    let v = json(d, "res/volume.json")["value"].as_f64().unwrap();
    assert!((v - 4.0 * std::f64::consts::PI).abs() < 2.0, "{v}");

    write(d, "rips.json", r#"{"cloud":"cloud.csv","m":2,"k":2,"beta":0.1}"#);
    assert!(mlimits(&["rips", "--config", "rips.json", "--out", "res"], d).status.success());
    let c = json(d, "res/rips.json")["clique"]["value"].as_f64().unwrap();
    assert_eq!(c.fract(), 0.0);
}

#[test]
fn same_seed_same_cloud() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "s.json", r#"{"density":{"kind":"circle","radius":1.0},"n":50}"#);
    for sub in ["a", "b"] {
        assert!(mlimits(&["sample", "--config", "s.json", "--seed", "5", "--out", sub], d).status.success());
    }
    assert_eq!(fs::read(d.join("a/cloud.csv")).unwrap(), fs::read(d.join("b/cloud.csv")).unwrap());
}

#[test]
fn verify_exit_codes_follow_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let base = r#"{"statistic":{"kind":"volume"},"density":{"kind":"circle","radius":1.0},"n_grid":[200,400],"replicates":10"#;
    write(d, "ok.json", &format!(r#"{base},"criteria":{{"max_rel_bias":0.5}}}}"#));
    write(d, "bad.json", &format!(r#"{base},"criteria":{{"max_abs_bias":1e-9}}}}"#));
    let ok = mlimits(&["verify-lln", "--config", "ok.json", "--seed", "1", "--out", "ok"], d);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = mlimits(&["verify-lln", "--config", "bad.json", "--seed", "1", "--out", "bad"], d);
    assert_eq!(bad.status.code(), Some(1));

    let csv = fs::read_to_string(d.join("ok/lln.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,mean,se,limit,abs_bias,n_var,sigma2_theory,ks,pass");
    let report = json(d, "ok/lln.json");
    assert_eq!(report["master_seed"], 1);
    assert!(d.join("ok/lln.timing.txt").exists());
}

#[test]
fn verify_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "c.json",
        r#"{"statistic":{"kind":"dim"},"density":{"kind":"sphere","dim":2,"radius":1.0},"n_grid":[300],"replicates":12,"rho":"auto","criteria":{"ks_coef":1.36}}"#,
    );
    for sub in ["a", "b"] {
        mlimits(&["verify-clt", "--config", "c.json", "--seed", "9", "--out", sub], d);
    }
    assert_eq!(fs::read(d.join("a/clt.csv")).unwrap(), fs::read(d.join("b/clt.csv")).unwrap());
    assert_eq!(fs::read(d.join("a/clt.json")).unwrap(), fs::read(d.join("b/clt.json")).unwrap());
}

#[test]
fn constants_record() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(
        d,
        "c.json",
        r#"{"functional":{"kind":{"kind":"phi_k","k":1,"beta":0.5}},"density":{"kind":"flat_torus","dim":2,"side":1.0}}"#,
    );
    let out = mlimits(&["constants", "--config", "c.json", "--seed", "2", "--out", "."], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = json(d, "constants.json");
    let pi = std::f64::consts::PI;
    let s2 = rec["constants"]["sigma2"]["value"].as_f64().unwrap();
    assert!((s2 - pi / 8.0).abs() < 1e-9, "{s2}");
    assert_eq!(rec["constants"]["sigma2"]["provenance"], "closed_form");
    assert!(rec["clique"]["printed"].is_object());
}

#[test]
fn bad_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "x.json", r#"{"statistic":{"kind":"dim"},"density":{"kind":"circle","radius":1.0},"n_grid":[],"replicates":3}"#);
    let out = mlimits(&["verify-lln", "--config", "x.json", "--out", "."], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_grid"));
    let out = mlimits(&["dim", "--config", "missing.json"], d);
    assert_eq!(out.status.code(), Some(2));
}
