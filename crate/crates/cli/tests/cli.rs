use std::path::Path;
use std::process::{Command, Output};

fn arhgof(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arhgof"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = arhgof(dir.path(), &["experiment", "--scenario", "arh7", "--M", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));
    let o = arhgof(dir.path(), &["experiment", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "scenario = arh0\nn = 30\nM = 2\nB = 20\nz = 1\ndelta = 0.05\n",
    )
    .unwrap();
    let o = arhgof(dir.path(), &["experiment", "--config", "run.cfg", "--M", "1", "--out", "res"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], &["arh0", "H0: ARH(1)", "30", "1", "20"]);
    assert!(row[7] == "0" || row[7] == "1");
    let manifest = std::fs::read_to_string(dir.path().join("res/manifest.json")).unwrap();
    assert!(manifest.contains("\"M\": 1"));
    assert!(!manifest.contains("wall"));
}

#[test]
fn stage_one_rejection_prints_a_dash() {
    let dir = tempfile::tempdir().unwrap();
    let sim = arhgof(dir.path(), &["simulate", "--scenario", "ckls-s3", "--n", "150", "--seed", "2", "--out", "d"]);
    assert!(sim.status.success());
    let o = arhgof(dir.path(), &["spec-test", "--input", "d/data.csv", "--B", "200", "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Stage 1"));
    if text.contains("REJECT_STAGE1") {
        assert!(text.contains("Stage 2  —"), "{text}");
    }
}

#[test]
fn ingest_reports_dropped_days() {
    let dir = tempfile::tempdir().unwrap();
    let mut ticks = String::from("timestamp,value\n");
    for day in 0..3 {
        let count = if day == 2 { 7 } else { 24 };
        for k in 0..count {
            ticks.push_str(&format!("{},{}\n", 1_546_300_800 + day * 86_400 + k * 3_600, k as f64));
        }
    }
    std::fs::write(dir.path().join("t.csv"), ticks).unwrap();
    let o = arhgof(dir.path(), &["ingest", "--input", "t.csv", "--day-length", "24", "--out", "res"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("2 complete day(s), 1 dropped"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dropped 2019-01-03: 7 point(s)"));
    let curves = std::fs::read_to_string(dir.path().join("res/curves.csv")).unwrap();
    assert!(curves.starts_with("# atom=1\n"));
    assert_eq!(curves.lines().count(), 4);

    let o = arhgof(dir.path(), &["ingest", "--input", "t.csv", "--day-length", "48"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gof_reads_paths_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    assert!(arhgof(dir.path(), &["simulate", "--scenario", "null-s2", "--n", "40", "--out", "p"]).status.success());
    assert!(arhgof(dir.path(), &["simulate", "--scenario", "arh2", "--n", "40", "--out", "c"]).status.success());
    for input in ["p/data.csv", "c/data.csv"] {
        let o = arhgof(dir.path(), &["gof", "--input", input, "--z", "2", "--B", "50", "--out", "g"]);
        assert!(o.status.success(), "{input}: {}", String::from_utf8_lossy(&o.stderr));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/gof.json")).unwrap()).unwrap();
        let p = json["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(json["z"], 2);
    }
}
