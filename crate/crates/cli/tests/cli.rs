use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hmsched"));
    c.env_remove("HMSCHED_STATE_LIMIT").env_remove("HMSCHED_NODE_LIMIT");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn fixtures() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn solve(path: &Path, objective: &str, method: &str) -> Output {
    bin()
        .args(["solve", path.to_str().unwrap(), "--objective", objective, "--method", method])
        .output()
        .unwrap()
}

fn value_of(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    doc["value"].as_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_three_machine_values() {
    let f = fixture("three_machines.json");
    assert_eq!(value_of(&solve(&f, "cmax", "auto")), "1/5");
    assert_eq!(value_of(&solve(&f, "cmin", "auto")), "2/13");
    assert_eq!(value_of(&solve(&f, "cenvy", "auto")), "3/65");
}

#[test]
fn solve_envy_on_identical_machines_is_zero() {
    assert_eq!(value_of(&solve(&fixture("identical_pair.json"), "cenvy", "auto")), "0/1");
}

#[test]
fn result_document_shape() {
    let out = solve(&fixture("three_machines.json"), "cmax", "confilp");
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["objective"], "cmax");
    assert_eq!(doc["method"], "confilp");
    assert!(doc["schedule"]["entries"].as_array().is_some_and(|e| !e.is_empty()));
    assert!(doc["trace"]["feasibility_calls"].as_u64().unwrap() > 0);
    assert!(doc.get("wall_time_ms").is_none());
    let timed = bin()
        .args(["solve", fixture("three_machines.json").to_str().unwrap(), "--objective", "cmax", "--timing"])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(doc["wall_time_ms"].as_f64().is_some());
}

#[test]
fn oracle_matches_every_method_on_fixtures() {
    for f in fixtures() {
        for obj in ["cmax", "cmin", "cenvy"] {
            let expect = value_of(&solve(&f, obj, "oracle"));
            for method in ["auto", "balanced", "confilp"] {
                assert_eq!(value_of(&solve(&f, obj, method)), expect, "{} {obj} {method}", f.display());
            }
        }
    }
}

#[test]
fn solved_schedule_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    for f in fixtures() {
        for obj in ["cmax", "cmin", "cenvy"] {
            let out = solve(&f, obj, "auto");
            let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            let sched = write(dir.path(), "s.json", &doc["schedule"].to_string());
            let status = bin()
                .args(["check", f.to_str().unwrap(), sched.to_str().unwrap(), "--objective", obj])
                .args(["--value", doc["value"].as_str().unwrap()])
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{} {obj}", f.display());
        }
    }
}

#[test]
fn check_examples() {
    let dir = tempfile::tempdir().unwrap();
    let sched = write(
        dir.path(),
        "three_machine_schedule.json",
        r#"{"entries":[{"machine_type":0,"counts":[3],"count":1},{"machine_type":1,"counts":[3],"count":1},{"machine_type":2,"counts":[1],"count":1}]}"#,
    );
    let check = |inst: &Path, sched: &Path, value: &str| {
        bin()
            .args(["check", inst.to_str().unwrap(), sched.to_str().unwrap(), "--objective", "cmax", "--value", value])
            .output()
            .unwrap()
    };
    assert_eq!(check(&fixture("three_machines.json"), &sched, "3/13").status.code(), Some(0));
    let bad = check(&fixture("three_machines.json"), &sched, "1/5");
    assert_eq!(bad.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("exceeds"));

    let empty_sched = write(dir.path(), "empty_schedule.json", r#"{"entries":[{"machine_type":0,"counts":[0],"count":2}]}"#);
    assert_eq!(check(&fixture("empty.json"), &empty_sched, "0/1").status.code(), Some(0));
}

#[test]
fn gen_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let st = bin().args(["gen", "--seed", "42", "--output", path.to_str().unwrap()]).status().unwrap();
        assert!(st.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    for obj in ["cmax", "cmin", "cenvy"] {
        assert!(solve(&a, obj, "auto").status.success());
    }

    let r = bin().args(["gen", "--seed", "3", "--restricted"]).output().unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(doc["restrict"].is_array());

    let custom = bin()
        .args(["gen", "--seed", "1", "--job-types", "2", "--pmax", "3", "--machines", "4", "--speeds", "2-5", "--jobs", "10"])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&custom.stdout).unwrap();
    assert_eq!(doc["d"], 2);
    let m: u64 = doc["m"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(m, 4);
    let n: u64 = doc["n"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(n, 10);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(dir.path(), "bad.json", r#"{"d": 1, "tau": 1, "p": [1], "n": [1, 2], "s": [1], "m": [1]}"#);
    assert_eq!(solve(&malformed, "cmax", "auto").status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(solve(&missing, "cmax", "auto").status.code(), Some(1));

    let nowhere = write(
        dir.path(),
        "nowhere.json",
        r#"{"d": 2, "tau": 1, "p": [1, 1], "n": [1, 1], "s": [1], "m": [1], "restrict": [[true], [false]]}"#,
    );
    assert_eq!(solve(&nowhere, "cmax", "auto").status.code(), Some(2));

    let busy = write(
        dir.path(),
        "busy.json",
        r#"{"d": 3, "tau": 3, "p": [2, 3, 5], "n": [9, 8, 7], "s": [3, 5, 7], "m": [2, 2, 2]}"#,
    );
    let limited = bin()
        .env("HMSCHED_STATE_LIMIT", "1")
        .env("HMSCHED_NODE_LIMIT", "1")
        .args(["solve", busy.to_str().unwrap(), "--objective", "cmax", "--method", "confilp"])
        .output()
        .unwrap();
    assert_eq!(limited.status.code(), Some(3));

    let too_big = write(
        dir.path(),
        "too_big.json",
        r#"{"d": 1, "tau": 1, "p": [1], "n": [5], "s": [1], "m": [9]}"#,
    );
    assert_eq!(solve(&too_big, "cmax", "oracle").status.code(), Some(3));
}

#[test]
fn bench_against_oracle() {
    let out = bin()
        .args(["bench", "--count", "4", "--regime", "large", "--oracle"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().contains("mismatched=0"));
    assert_eq!(text.lines().count(), 4 * 3 + 1);
}
