use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn incsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incsim"))
        .args(args)
        .env_remove("INCSIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SCENARIO: &str = r#"
version = 1
name = "small"
scheme = "seven_op"
seed = 5
horizon = 2000
theta = 0.8

[channel]
support = [1, 2]
mode = "iid"
frequencies = [0.5, 0.5]

[[channel.quality]]
p = [0.0, 0.5, 0.5, 0.0]

[[channel.quality]]
independent = [1.0, 1.0]

[arrivals]
rates = [0.5, 0.5]
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_prints_two_slot_values() {
    let o = incsim(&["oracle"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("best five-operation policy: 1.5"), "{text}");
    assert!(text.contains("premix then reactive:       2"), "{text}");
    assert!(text.contains("0.7778"), "7/9 entries printed: {text}");
}

#[test]
fn validate_names_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SCENARIO.replace("p = [0.0, 0.5, 0.5, 0.0]", "p = [0.0, 0.4, 0.5, 0.0]");
    let path = write(dir.path(), "bad.toml", &bad);
    let o = incsim(&["validate", &path]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("channel.quality[0]"), "{}", stderr(&o));

    let good = write(dir.path(), "good.toml", SCENARIO);
    let o = incsim(&["validate", &good]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("seven_op"));
}

#[test]
fn empty_and_unknown_keys_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.toml", "");
    assert!(!incsim(&["validate", &empty]).status.success());
    let typo = write(dir.path(), "typo.toml", &SCENARIO.replace("horizon = 2000", "horizn = 2000"));
    let o = incsim(&["validate", &typo]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("horizn"), "{}", stderr(&o));
}

#[test]
fn bad_flags_fail() {
    assert!(!incsim(&["preset", "fig11"]).status.success());
    assert!(!incsim(&["oracle", "--nope"]).status.success());
    let o = incsim(&["sweep", "missing.toml", "--pressure", "sideways"]);
    assert!(!o.status.success());
}

#[test]
fn run_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.toml", SCENARIO);
    let out = dir.path().join("out");
    let trace = dir.path().join("trace.csv");
    let o = incsim(&[
        "run",
        &path,
        "--trials",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean delay"));
    let series = fs::read_to_string(out.join("small_seven_op_series_0.csv")).unwrap();
    let header = series.lines().next().unwrap();
    assert!(header.starts_with("step,time,quality,backlog,Q1_0,Q2_0,Q1_2,Q2_1,Qmix,"), "{header}");
    assert!(header.contains("qinter_Qmix") && header.contains("na_Q1_0"));
    assert_eq!(series.lines().count(), 1 + 2000 / 100 + 1);
    assert!(out.join("small_seven_op_series_1.csv").exists());
    let trace = fs::read_to_string(trace).unwrap();
    assert!(trace.lines().count() > 100);
    assert!(trace.lines().all(|l| l.split(',').count() == 6));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.toml", SCENARIO);
    let out = dir.path().join("out");
    let o = incsim(&[
        "sweep",
        &path,
        "--theta-list",
        "0,0.4",
        "--scheme",
        "routing",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("small_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "theta,sum_rate,scheme,mean_backlog,slope,verdict");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,0,routing,0,"), "{}", lines[1]);
}

#[test]
fn preset_emit_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["fig7", "fig8a", "fig8b", "fig8c", "fig9", "fig10", "table3"] {
        let o = incsim(&["preset", name, "--emit", "--out", out]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(files.len() >= 20, "{files:?}");
    for f in files {
        let o = incsim(&["validate", f.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", f.display(), stderr(&o));
    }
}

#[test]
fn short_preset_sweep_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = incsim(&["preset", "fig7", "--horizon", "2000", "--theta-list", "0.3", "--scheme", "seven_op", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig7_sweep.csv")).unwrap();
    // Both pressure variants of the seven-operation scheme are selected.
    assert_eq!(csv.lines().count(), 3, "{csv}");

    let o = incsim(&["preset", "table3", "--horizon", "2000", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("table3.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "setting,load,sum_rate,mean_delay,mean_rx_buffer,delivered");
    assert_eq!(table.lines().count(), 7);
}
