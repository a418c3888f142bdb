use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gbdeer"));
    c.env_remove("GBDEER_LOG");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A small, fast scenario.
fn small_config(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("default.toml"))
        .unwrap()
        .replace("n_nodes = 100", "n_nodes = 30")
        .replace("duration = 300.0", "duration = 30.0")
        .replace("dst = 99", "dst = 29")
        .replace("dst = 98", "dst = 28")
        .replace("dst = 97", "dst = 27")
        .replace("dst = 96", "dst = 26")
        .replace("dst = 95", "dst = 25");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_metrics_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = bin().args(["run", "--config"]).arg(&cfg).args(["--protocol", "gbdeer", "--seed", "3", "--out"]).arg(&out_dir).output().unwrap();
    ok(&out);
    let metrics = std::fs::read_to_string(out_dir.join("metrics.txt")).unwrap();
    assert!(metrics.contains("\"delivery_ratio\""));
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,seq,kind,subject_ids,detail\n"));
    let names: Vec<_> = std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn trace_off_writes_only_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&bin().args(["run", "--config"]).arg(&cfg).args(["--trace", "off", "--out"]).arg(&out_dir).output().unwrap());
    assert!(out_dir.join("metrics.txt").exists());
    assert!(!out_dir.join("trace.csv").exists());
}

#[test]
fn repeated_runs_are_identical_and_ignore_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&a).output().unwrap());
    let noisy = bin().env("GBDEER_LOG", "debug").env("RAYON_NUM_THREADS", "1").args(["run", "--config"]).arg(&cfg).arg("--out").arg(&b).output().unwrap();
    ok(&noisy);
    let scrubbed = Command::new(env!("CARGO_BIN_EXE_gbdeer")).env_clear().args(["run", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("c")).output().unwrap();
    ok(&scrubbed);
    for file in ["metrics.txt", "trace.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(x, std::fs::read(tmp.path().join("c").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn unknown_protocol_lists_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = bin().args(["run", "--config"]).arg(&cfg).args(["--protocol", "bogus", "--out"]).arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    for name in ["gbdeer", "gaf-fixed", "minhop"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn non_empty_output_needs_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("out");
    ok(&bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap());
    let again = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--overwrite"));
    ok(&bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).arg("--overwrite").output().unwrap());
}

#[test]
fn compare_writes_one_row_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("cmp");
    ok(&bin().args(["compare", "--config"]).arg(&cfg).args(["--seeds", "1..3", "--protocols", "gbdeer,gaf-fixed,minhop", "--out"]).arg(&out_dir).output().unwrap());
    let mut rdr = csv::Reader::from_path(out_dir.join("comparison.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "protocol");
    assert_eq!(&header[1], "seed");
    assert!(header.iter().any(|h| h == "energy_total"));
    assert_eq!(rdr.records().count(), 9);
    for p in ["gbdeer", "gaf-fixed", "minhop"] {
        for s in 1..=3 {
            let pair = out_dir.join(format!("{p}-seed{s}"));
            assert!(pair.join("metrics.txt").exists());
            assert!(!pair.join("trace.csv").exists());
        }
    }
    assert!(!std::fs::read_dir(&out_dir).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().starts_with(".staging")));
}

#[test]
fn single_pair_compare_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (cmp, single) = (tmp.path().join("cmp"), tmp.path().join("single"));
    ok(&bin().args(["compare", "--config"]).arg(&cfg).args(["--seeds", "4", "--protocols", "minhop", "--trace", "on", "--out"]).arg(&cmp).output().unwrap());
    ok(&bin().args(["run", "--config"]).arg(&cfg).args(["--seed", "4", "--protocol", "minhop", "--out"]).arg(&single).output().unwrap());
    for file in ["metrics.txt", "trace.csv"] {
        assert_eq!(std::fs::read(cmp.join("minhop-seed4").join(file)).unwrap(), std::fs::read(single.join(file)).unwrap());
    }
    let mut rdr = csv::Reader::from_path(cmp.join("comparison.csv")).unwrap();
    assert_eq!(rdr.records().count(), 1);
}

#[test]
fn bad_seed_range_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = bin().args(["compare", "--config"]).arg(&cfg).args(["--seeds", "5..2", "--out"]).arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["default.toml", "handover.toml"] {
        let out = bin().args(["validate", "--config"]).arg(configs().join(name)).output().unwrap();
        ok(&out);
        assert!(String::from_utf8_lossy(&out.stdout).contains("radio_range_R"));
    }
}

#[test]
fn validate_names_the_broken_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("default.toml")).unwrap().replace("range = 80.0", "range = 200.0");
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("range(Tmin) < range(Tmid)"), "{}", stderr(&out));
}

#[test]
fn validate_names_a_missing_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("default.toml")).unwrap().replace("duration = 300.0\n", "");
    let path = tmp.path().join("missing.toml");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("duration"), "{}", stderr(&out));
}

#[test]
fn unreadable_config_fails() {
    let out = bin().args(["validate", "--config", "/nonexistent/gbdeer.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let out = bin().args(["run", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let file = tmp.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
