use std::io::Write;
use std::process::{Command, Output};

fn verify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verify"))
        .args(args)
        .env_remove("QTORUS_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn list_names_every_check() {
    let out = verify(&["list", "--format", "json"]);
    assert!(out.status.success());
    let v = json(&out);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["kp.canonical", "kp.thm33", "kdv.form", "bkp.btype", "qt.combina"] {
        assert!(names.contains(&n), "{n} missing");
    }
    let text = verify(&["list"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("defaults: T=3 O=8 D=2 P=4"));
}

#[test]
fn passing_check_exits_zero() {
    let out = verify(&["verify", "kp.canonical", "--O", "6", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v[0]["check"], "kp.canonical");
    assert_eq!(v[0]["status"], "pass");
    assert_eq!(v[0]["params"]["O"], 6);
}

#[test]
fn indices_select_a_case() {
    let out = verify(&["verify", "qt.bracket", "--indices", "1,-1,2,0", "--D", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v[0]["params"]["indices"], "1,-1,2,0");
}

#[test]
fn unknown_check_and_bad_indices_fail() {
    let out = verify(&["verify", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let out = verify(&["verify", "qt.bracket", "--indices", "1,2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)[0]["status"], "error");
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = verify(&["suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "O = 5\nD = 1\nformat = \"json\"").unwrap();
    let path = f.path().to_str().unwrap();

    let out = verify(&["verify", "kp.canonical", "--config", path]);
    let v = json(&out);
    assert_eq!(v[0]["params"]["O"], 5);
    assert_eq!(v[0]["params"]["D"], 1);

    let out = Command::new(env!("CARGO_BIN_EXE_verify"))
        .args(["verify", "kp.canonical", "--O", "6"])
        .env("QTORUS_CONFIG", path)
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v[0]["params"]["O"], 6);
    assert_eq!(v[0]["params"]["D"], 1);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "bogus = 1").unwrap();
    let out = verify(&["verify", "kp.canonical", "--config", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_name_can_be_given_directly() {
    let out = verify(&["qt.combina", "--indices", "0,0", "--D", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v[0]["check"], "qt.combina");
    let details = v[0]["details"].to_string();
    assert!(details.contains("(-n*k + m*l)eps"), "{details}");
}
