use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn robosync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robosync")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn validate_accepts_listing() {
    let out = robosync(&["validate", "-c", path(&fixture("listing1.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "OK\n");
}

#[test]
fn validate_reports_duplicate_priorities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dup.json");
    fs::write(
        &cfg,
        r#"{"sensors":[],"actuators":[],"behaviors":[
            {"name":"a","priority":0.5},{"name":"b","priority":0.5}]}"#,
    )
    .unwrap();
    let out = robosync(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).lines().any(|l| l.contains("behaviors[1].priority")), "{}", stdout(&out));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = robosync(&["validate", "-c", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: /nonexistent/config.json"));
}

fn run_fixture(extra: &[&str]) -> Output {
    let mut args = vec![
        "run".to_string(),
        "-c".into(),
        path(&fixture("hri_config.json")).into(),
        "-b".into(),
        path(&fixture("behavior.rsb")).into(),
        "-t".into(),
        path(&fixture("touch_trace.jsonl")).into(),
        "-o".into(),
        "-".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    robosync(&refs)
}

#[test]
fn run_reproduces_golden_log() {
    let out = run_fixture(&["--stats"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), fs::read_to_string(fixture("golden/hri_touch.log.jsonl")).unwrap());
    assert_eq!(stderr(&out), fs::read_to_string(fixture("golden/hri_touch.stats.json")).unwrap());
    assert_eq!(stdout(&run_fixture(&[])), stdout(&out));
}

#[test]
fn run_writes_log_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("out.jsonl");
    let out = robosync(&[
        "run",
        "-c",
        path(&fixture("safety_config.json")),
        "-b",
        path(&fixture("behavior.rsb")),
        "-t",
        path(&fixture("force_trace.jsonl")),
        "-o",
        log.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&log).unwrap(),
        fs::read_to_string(fixture("golden/safety_halt.log.jsonl")).unwrap()
    );
}

#[test]
fn until_zero_drops_every_reading() {
    let out = run_fixture(&["--until", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!stdout(&out).contains("\"sensor_event\""));
}

#[test]
fn unknown_sensor_in_trace_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.jsonl");
    fs::write(&trace, "{\"t_us\":0,\"sensor\":\"touch\",\"value\":1}\n{\"t_us\":5,\"sensor\":\"sonar\",\"value\":1}\n").unwrap();
    let out = robosync(&[
        "run",
        "-c",
        path(&fixture("hri_config.json")),
        "-b",
        path(&fixture("behavior.rsb")),
        "-t",
        trace.to_str().unwrap(),
        "-o",
        "-",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("sonar"), "{err}");
}

#[test]
fn stats_matches_golden() {
    for name in ["hri_touch", "safety_halt", "single_response", "adaptive"] {
        let out = robosync(&["stats", path(&fixture(&format!("golden/{name}.log.jsonl")))]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr(&out));
        assert_eq!(stdout(&out), fs::read_to_string(fixture(&format!("golden/{name}.stats.json"))).unwrap());
    }
}

#[test]
fn stats_of_empty_log_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    fs::write(&log, "").unwrap();
    let out = robosync(&["stats", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\"sensor_events\":0"), "{}", stdout(&out));
}

#[test]
fn stats_rejects_truncated_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("cut.jsonl");
    let golden = fs::read_to_string(fixture("golden/hri_touch.log.jsonl")).unwrap();
    fs::write(&log, &golden[..golden.len() / 2]).unwrap();
    let out = robosync(&["stats", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line "), "{}", stderr(&out));
}

#[test]
fn parse_output_is_a_fixed_point() {
    let first = robosync(&["parse", "-b", path(&fixture("behavior.rsb"))]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let dir = tempfile::tempdir().unwrap();
    let canonical = dir.path().join("canon.rsb");
    fs::write(&canonical, stdout(&first)).unwrap();
    let second = robosync(&["parse", "-b", canonical.to_str().unwrap()]);
    assert_eq!(stdout(&second), stdout(&first));
    let ast = robosync(&["parse", "-b", path(&fixture("behavior.rsb")), "--dump-ast"]);
    assert!(stdout(&ast).contains("gentle_response"));
}

#[test]
fn parse_error_names_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rsb");
    fs::write(&bad, "WHEN touch LEVEL <\n").unwrap();
    let out = robosync(&["parse", "-b", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains(":1:"), "{}", stderr(&out));
}
