use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn icin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icin")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn categorical_writes_outputs_and_manifest() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&["categorical", "--input", path(&fixture("two_item_observed.json")), "--out", path(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["observed.json", "full_data.csv", "functionals.csv", "manifest.json"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let full = read(out.path(), "full_data.csv");
    let row = full.lines().find(|l| l.starts_with("1,1,01,")).unwrap();
    let g: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((g - 0.2 / 3.0).abs() < 1e-12);
}

#[test]
fn observed_json_round_trips_through_cli() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&["categorical", "--input", path(&fixture("two_item_observed.json")), "--out", path(out.path())]);
    assert!(o.status.success());
    let first = read(out.path(), "full_data.csv");
    let again = tempfile::tempdir().unwrap();
    let o = icin(&["categorical", "--input", path(&out.path().join("observed.json")), "--out", path(again.path())]);
    assert!(o.status.success());
    assert_eq!(first, read(again.path(), "full_data.csv"));
}

#[test]
fn empty_input_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "").unwrap();
    let o = icin(&["categorical", "--input", path(&input), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("icin: error"));
}

#[test]
fn row_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "secession,attendance,independence\nyes,no,yes\nyes,maybe,no\n").unwrap();
    let o = icin(&[
        "categorical",
        "--input",
        path(&input),
        "--schema",
        path(&fixture("plebiscite_schema.json")),
        "--out",
        path(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));
}

#[test]
fn monotone_rejects_intermittent_missingness() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("waves.csv");
    std::fs::write(&input, "wave1,wave2,wave3\n1,2,1\n1,,2\n2,1,\n").unwrap();
    let o = icin(&["monotone", "--input", path(&input), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn monotone_fixture_runs() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&["monotone", "--input", path(&fixture("dropout_synthetic.csv")), "--out", path(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(out.path(), "sequential_odds.csv").starts_with("time,"));
}

#[test]
fn refuted_diagnosis_exits_four_after_writing_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.json");
    std::fs::write(
        &input,
        r#"{"kind":"observed","levels":[2,2],"patterns":[
            {"pattern":"00","cells":[{"cell":[1,1],"mass":0.12},{"cell":[1,2],"mass":0.16},{"cell":[2,1],"mass":0.28},{"cell":[2,2],"mass":0.24}]},
            {"pattern":"01","cells":[{"cell":[1,null],"mass":0.12},{"cell":[2,null],"mass":0.08}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = icin(&["diagnose", "--input", path(&input), "--j", "2", "--k", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&read(&out, "report.json")).unwrap();
    assert!((report["worst_violation"].as_f64().unwrap() - 0.2).abs() < 1e-9);
}

#[test]
fn posterior_writes_every_draw() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&[
        "posterior",
        "--input",
        path(&fixture("plebiscite_synthetic_counts.json")),
        "--functional",
        "att_yes=attendance=yes",
        "--out",
        path(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(out.path(), "draws.csv").lines().count(), 5001);
    assert_eq!(read(out.path(), "summary.csv").lines().count(), 2);
}

#[test]
fn sensitivity_grid_has_fifteen_panels() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&[
        "sensitivity",
        "--input",
        path(&fixture("plebiscite_synthetic_counts.json")),
        "--grid",
        path(&fixture("plebiscite_grid.json")),
        "--functional",
        "ind_yes=independence=yes",
        "--out",
        path(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(out.path(), "sensitivity.csv");
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = icin(&[
            "simulate",
            "--input",
            path(&fixture("two_item_observed.json")),
            "-n",
            "200",
            "--seed",
            "9",
            "--out",
            path(d.path()),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(read(a.path(), "records.csv"), read(b.path(), "records.csv"));
    assert_eq!(read(a.path(), "records.csv").lines().count(), 201);

    let replay = tempfile::tempdir().unwrap();
    let o = icin(&["replay", path(&a.path().join("manifest.json")), "--out", path(replay.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(a.path(), "records.csv"), read(replay.path(), "records.csv"));
}

#[test]
fn inapplicable_flag_is_rejected() {
    let out = tempfile::tempdir().unwrap();
    let o = icin(&[
        "categorical",
        "--input",
        path(&fixture("two_item_observed.json")),
        "--draws",
        "10",
        "--out",
        path(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
