use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlinbound(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlinbound"))
        .args(args)
        .current_dir(dir)
        .env_remove("MLINBOUND_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const LEVELSET: &str = "experiment = levelset\nn = 1\nm = 2\nG = 64\nL = 8.0\nseed = 3\ncases = 20\n";

#[test]
fn passing_run_writes_json_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "levelset.conf", LEVELSET);
    let out = tmp.path().join("out");
    let res = mlinbound(&["levelset", "--config", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("PASS failures"), "{stdout}");

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("levelset.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "levelset");
    assert_eq!(json["pass"], true);
    assert_eq!(json["seed"], 3);
    assert!(!json["traceability"].as_str().unwrap().is_empty());
    let csvs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert!(!csvs.is_empty());
    assert_eq!(fs::read_to_string(out.join("levelset.config")).unwrap(), LEVELSET);
}

#[test]
fn csv_bytes_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "decomp.conf",
        "experiment = decomp-verify\nn = 1\nm = 3\nG = 64\nL = 8\nseed = 11\ncases = 40\n",
    );
    let mut runs = Vec::new();
    for (dir, workers) in [("a", "2"), ("b", "2")] {
        let out = tmp.path().join(dir);
        let res = mlinbound(
            &["decomp-verify", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", workers],
            tmp.path(),
        );
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        runs.push(files.iter().map(|p| (p.file_name().unwrap().to_owned(), fs::read(p).unwrap())).collect::<Vec<_>>());
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "levelset.conf", LEVELSET);
    let out = tmp.path().join("out");
    let res = mlinbound(&["levelset", "--config", &cfg, "--seed", "99", "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("levelset.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 99);
}

#[test]
fn unknown_key_exits_2_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "n = 1\nm = 2\nG = 64\nL = 8\nwidth = 3\n");
    let res = mlinbound(&["levelset", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 5") && err.contains("width"), "{err}");
}

#[test]
fn missing_grid_size_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "n = 1\nm = 2\nL = 8\n");
    let res = mlinbound(&["levelset", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains('G'));
}

#[test]
fn unknown_experiment_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ok.conf", "n = 1\nm = 2\nG = 64\nL = 8\n");
    let res = mlinbound(&["no-such-experiment", "--config", &cfg], tmp.path());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "strict.conf", "n = 1\nm = 2\nG = 64\nL = 8\ntol.rejects_above_a = 2\n");
    let out = tmp.path().join("out");
    let res = mlinbound(&["levelset", "--config", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL rejects_above_a"));
}
