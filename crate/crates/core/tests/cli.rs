//! End-to-end runs of the command-line tool.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs-predict")).args(args).output().unwrap()
}

#[test]
fn eval_writes_csv_for_each_model() {
    let out = run(&["eval", "--frames", "60", "--model", "repeat-last", "--model", "linear-trend"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "predictor,horizon,history,samples,rmse,mae,infer_ms,params");
    assert!(lines[1].starts_with("repeat-last,1,10,"));
    assert!(lines[2].starts_with("linear-trend,1,10,"));
}

#[test]
fn gen_then_diag_reads_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.otfs");
    let p = path.to_str().unwrap();
    assert!(run(&["gen", "--frames", "12", "--m", "4", "--n", "2", "--out", p]).status.success());
    let out = run(&["diag", "--data", p]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("frames=12\n"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# desk run\nframes = 40\nhistory = 4\nmodel = repeat-last\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = String::from_utf8(run(&["eval", "--config", c]).stdout).unwrap();
    assert!(from_file.lines().nth(1).unwrap().starts_with("repeat-last,1,4,"));
    let overridden = String::from_utf8(run(&["eval", "--config", c, "--history", "6"]).stdout).unwrap();
    assert!(overridden.lines().nth(1).unwrap().starts_with("repeat-last,1,6,"));
}

#[test]
fn bad_arguments_exit_with_2() {
    assert_eq!(run(&["eval", "--model", "oracle"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--m", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "speed = 500\n").unwrap();
    let out = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
