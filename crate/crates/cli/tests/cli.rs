use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn ctl(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citizenctl"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_walkthrough(data: &Path) -> Output {
    let net = scenarios().join("network.json");
    let walk = scenarios().join("walkthrough.json");
    ctl(data, &["run", net.to_str().unwrap(), walk.to_str().unwrap()])
}

#[test]
fn run_then_query_state_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_walkthrough(dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("[FAIL]"));
    assert!(dir.path().join("report.json").is_file());

    let out = ctl(dir.path(), &["query", "citizens-p0", "identity-main", "state", "12345678911"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"]["Vote"], "Eligible");
    assert!(v["value"]["VoterID"].as_str().unwrap().starts_with("V-522309-"));

    let out = ctl(dir.path(), &["query", "uidai-p0", "identity-main", "history", "12345678911"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["versions"].as_array().unwrap().len(), 2);
}

#[test]
fn tamper_is_reported_by_verify_and_diff() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_walkthrough(dir.path())), 0);
    assert_eq!(code(&ctl(dir.path(), &["verify", "bankx-p0", "identity-main"])), 0);
    assert_eq!(code(&ctl(dir.path(), &["diff", "identity-main"])), 0);

    assert_eq!(code(&ctl(dir.path(), &["tamper", "bankx-p0", "identity-main", "1", "100"])), 0);
    let out = ctl(dir.path(), &["verify", "bankx-p0", "identity-main"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("first bad height 1"));
    assert_eq!(code(&ctl(dir.path(), &["verify", "uidai-p0", "identity-main"])), 0);

    let out = ctl(dir.path(), &["diff", "identity-main"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    let json = &text[text.find('{').unwrap()..];
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["peers"]["bankx-p0"]["first_divergent_height"], 1);
    assert_eq!(v["peers"]["uidai-p0"]["status"], "consistent");
}

#[test]
fn bad_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_walkthrough(dir.path())), 0);
    for args in [
        &["query", "hospitals-p0", "identity-main", "state", "12345678911"][..],
        &["query", "nobody", "identity-main", "block", "0"],
        &["query", "uidai-p0", "identity-main", "block", "99"],
        &["tamper", "uidai-p0", "identity-main", "0", "999999"],
        &["frobnicate"],
    ] {
        assert_eq!(code(&ctl(dir.path(), args)), 2, "{args:?}");
    }
    let missing = ctl(dir.path(), &["run", "/nonexistent/config.json", "x.json"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn failing_expectation_exits_with_check_code() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.json");
    std::fs::write(
        &scenario,
        r#"{"steps":[{"at_tick":0,"action":"expect","expect":"chain_height","channel":"health","height":9}]}"#,
    )
    .unwrap();
    let net = scenarios().join("network.json");
    let out = ctl(&dir.path().join("data"), &["run", net.to_str().unwrap(), scenario.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("[FAIL] step 0"));
}

#[test]
fn init_writes_genesis_chains() {
    let dir = tempfile::tempdir().unwrap();
    let net = scenarios().join("network.json");
    let out = ctl(dir.path(), &["init", net.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("identity-main: 4 peers at genesis"));
    assert_eq!(code(&ctl(dir.path(), &["verify", "hospitals-p0", "health"])), 0);
}
