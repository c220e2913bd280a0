use std::fs;
use std::process::Command;

use oam_qkd::cli::{parse_config, CliArgs, RunConfig};
use oam_qkd::modecalc::{eval_mode, BeamGeometry, ModeLabel};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oam-qkd"))
}

fn without_clock(path: &std::path::Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock");
    v
}

#[test]
fn noiseless_run_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--d", "4", "--photons", "100000", "--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("qber=0.000000") && line.contains("aborted=false"), "{line}");
    let stats = without_clock(&dir.path().join("stats.json"));
    assert_eq!(stats["qber_estimate"], 0.0);
    assert_eq!(stats["aborted"], false);
    assert_eq!(stats["schema_version"], 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let status = bin()
            .args(["--d", "8", "--photons", "20000", "--seed", "3", "--transcript"])
            .args(["--channel", "random_rotation", "--channel", "loss: 0.2", "--eve", "random"])
            .arg("--out")
            .arg(dir.path())
            .status()
            .unwrap();
        // aborted sessions still exit 0
        assert!(status.success());
    }
    let a = fs::read(dirs[0].path().join("transcript.csv")).unwrap();
    let b = fs::read(dirs[1].path().join("transcript.csv")).unwrap();
    assert_eq!(a, b);
    let sa = without_clock(&dirs[0].path().join("stats.json"));
    assert_eq!(sa, without_clock(&dirs[1].path().join("stats.json")));
    assert_eq!(sa["aborted"], true);
}

#[test]
fn mode_dump_matches_eval_mode() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--photons", "10", "--dump-mode", "LG,2,2", "--z", "0", "--dump-samples", "16", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("mode_LG_2_2.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,re,im"));
    let geom = BeamGeometry::new(1.0e7, 1.0).unwrap();
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let u = eval_mode(&ModeLabel::lg(2, 2), &geom, v[0], v[1], 0.0);
        assert_eq!((v[2], v[3]), (u.re, u.im));
        rows += 1;
    }
    assert_eq!(rows, 256);
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--d", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("power of 2"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"d\": 4,\n  \"seed\": -1\n}").unwrap();
    let out = bin().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = bin().args(["--photons", "10", "--out"]).arg(blocker.join("sub")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sub"));
}

#[test]
fn written_config_parses_back_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.json");
    fs::write(
        &path,
        r#"{"d": 8, "photons": 50, "seed": 4, "oam": -2, "channel": ["gouy: 1.5", "rotation: 0.25"],
            "eve": "fixed:1", "compensate_gouy": true, "dump_mode": ["HG,1,0"], "out": "x"}"#,
    )
    .unwrap();
    let cfg = parse_config(&CliArgs { config: Some(path.clone()), ..Default::default() }).unwrap();
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    let again: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(serde_json::to_string_pretty(&again).unwrap(), text);
    assert_eq!(cfg.session_config(), again.session_config());
}
