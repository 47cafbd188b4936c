use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

fn golden(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn tilekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilekit")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let o = tilekit(&full);
    (code(&o), serde_json::from_str(&stdout(&o)).unwrap())
}

#[test]
fn solve_exit_codes() {
    let o = tilekit(&["solve", "--rules", &data("checkerboard.json"), "--n", "3", "--mode", "exists"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("B W B"));
    let o = tilekit(&["solve", "--rules", &data("checkerboard_periodic.json"), "--n", "3"]);
    assert_eq!(code(&o), 1);
    let o = tilekit(&["solve", "--rules", &data("checkerboard_periodic.json"), "--n", "4"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn solve_oracle_agrees() {
    for n in ["2", "3", "4"] {
        let (a, x) = json(&["solve", "--rules", &data("checkerboard.json"), "--n", n, "--mode", "count"]);
        let (b, y) = json(&["solve", "--rules", &data("checkerboard.json"), "--n", n, "--mode", "count", "--oracle"]);
        assert_eq!((a, &x["count"]), (b, &y["count"]));
    }
}

#[test]
fn witness_round_trips_through_validate() {
    let dir = std::env::temp_dir().join(format!("tilekit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("witness.json").display().to_string();
    for (rules, n) in [("checkerboard.json", "3"), ("checkerboard_periodic.json", "4")] {
        let o = tilekit(&["solve", "--rules", &data(rules), "--n", n, "--mode", "mincost", "--witness", &out]);
        assert_eq!(code(&o), 0);
        let (c, v) = json(&["solve", "--rules", &data(rules), "--validate", &out]);
        assert_eq!(c, 0);
        assert_eq!(v["valid"], true);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn huge_line_answers_fast() {
    let start = Instant::now();
    let o = tilekit(&["line", "--rules", &data("loop.json"), "--n", "1000000000003", "--mode", "exists"]);
    assert_eq!(code(&o), 0);
    assert!(start.elapsed() < Duration::from_secs(1));
    let o = tilekit(&["line", "--rules", &data("loop.json"), "--n", "1000000000004", "--mode", "exists"]);
    assert_eq!(code(&o), 1);
    let digits = "1".repeat(200);
    let o = tilekit(&["line", "--rules", &data("loop.json"), "--n", &digits]);
    assert_eq!(code(&o), 0);
}

#[test]
fn clock_sequence_counts_frames() {
    let o = tilekit(&["clock", "sequence", "--n", "6"]);
    assert_eq!(code(&o), 0);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 64);
    assert_eq!(lines[0], "|- R0:0B _r:0 _r:0 _r:0 -|");
    assert_eq!(lines[63], "|- L2:1B _r:2 _r:2 _r:2 -|");
}

#[test]
fn clock_trace_verdicts() {
    let o = tilekit(&["clock", "trace", "--n", "6", "--tm", &data("zigzag_counter.json")]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("step 63"));
    assert!(text.contains("counter steps 4"));
    let o = tilekit(&["clock", "trace", "--n", "5"]);
    assert_eq!(code(&o), 1);
    let o = tilekit(&["clock", "trace", "--n", "6", "--tm", &data("unary_counter.json")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn clock_spectrum_path() {
    let (c, v) = json(&["clock", "spectrum", "--n", "4", "--sector", "path", "--k", "2"]);
    assert_eq!(c, 0);
    let ev: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(ev[0].abs() < 1e-10);
    assert!((ev[1] - (1.0 - (std::f64::consts::PI / 16.0).cos())).abs() < 1e-10);
    assert_eq!(v["dimension"], 16);
}

#[test]
fn malformed_files_report_location() {
    let o = tilekit(&["solve", "--rules", &data("bad_weight.json"), "--n", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("horizontal[1][1]"), "{}", stderr(&o));
    let o = tilekit(&["solve", "--rules", &data("syntax_error.json"), "--n", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3, column"), "{}", stderr(&o));
    let o = tilekit(&["solve", "--rules", &data("missing.json"), "--n", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&tilekit(&["solve", "--rules", &data("checkerboard.json")])), 2);
    assert_eq!(code(&tilekit(&["bogus"])), 2);
    assert_eq!(code(&tilekit(&["solve", "--rules", &data("checkerboard.json"), "--n", "-3"])), 2);
    assert_eq!(code(&tilekit(&["variant", "fixture", "no-such-fixture"])), 2);
}

#[test]
fn json_goldens() {
    let cases: [(&str, Vec<String>); 7] = [
        ("solve_count.json", vec!["solve".into(), "--rules".into(), data("checkerboard.json"), "--n".into(), "4".into(), "--mode".into(), "count".into()]),
        ("solve_mincost.json", vec!["solve".into(), "--rules".into(), data("checkerboard.json"), "--n".into(), "3".into(), "--mode".into(), "mincost".into()]),
        ("line_mincost.json", vec!["line".into(), "--rules".into(), data("weighted_line.json"), "--n".into(), "6".into(), "--mode".into(), "mincost".into(), "--ends".into(), "t1,t1".into()]),
        ("rowpair_corners.json", vec!["variant".into(), "rowpair".into(), "--n".into(), "10".into(), "--mode".into(), "wdprime".into(), "--ends".into(), "corners".into()]),
        ("prime_5.json", vec!["tm".into(), "prime".into(), "--x".into(), "5".into()]),
        ("clock_sequence_4.json", vec!["clock".into(), "sequence".into(), "--n".into(), "4".into()]),
        ("tm_run.json", vec!["tm".into(), "run".into(), "--tm".into(), data("write_accept.json"), "--steps".into(), "2".into()]),
    ];
    for (file, args) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (c, first) = json(&args);
        assert_eq!(c, 0, "{file}");
        assert_eq!(first, golden(file), "{file}");
        // stable across runs
        assert_eq!(json(&args).1, first, "{file}");
    }
}

#[test]
fn fixtures_listed_and_goldens_validate() {
    let (c, v) = json(&["variant", "fixture"]);
    assert_eq!(c, 0);
    let names: Vec<String> = v["fixtures"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    assert!(names.contains(&"weighted-open".to_string()));
    for name in names {
        let o = tilekit(&["variant", "fixture", &name]);
        assert_eq!(code(&o), 0, "{name}");
    }
}

#[test]
fn tm_reduce_and_compile() {
    let (c, v) = json(&["tm", "reduce", "--x", "S1 o E1"]);
    assert_eq!(c, 0);
    assert_eq!(v["n"], "6");
    let o = tilekit(&["tm", "reduce", "--x", "0 0 0"]);
    assert_eq!(code(&o), 2);
    let (counter, verifier) = (data("unary_counter.json"), data("parity_verifier.json"));
    for (n, want) in [("5", 0), ("6", 1), ("7", 0)] {
        let (c, v) = json(&["tm", "compile", "--counter", &counter, "--verifier", &verifier, "--n", n]);
        assert_eq!(c, want, "N={n}");
        assert_eq!(v["exists"], v["oracle"]);
    }
    // the verifier lacks the counter's symbols
    let o = tilekit(&["tm", "compile", "--counter", &data("zigzag_counter.json"), "--verifier", &verifier]);
    assert_eq!(code(&o), 2);
}

#[test]
fn memory_budget_from_environment() {
    let run = |budget: &str| {
        Command::new(env!("CARGO_BIN_EXE_tilekit"))
            .args(["solve", "--rules", &data("checkerboard.json"), "--n", "3"])
            .env("TILEKIT_MEM_BUDGET", budget)
            .output()
            .unwrap()
    };
    let o = run("lots");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("TILEKIT_MEM_BUDGET"), "{}", stderr(&o));
    assert_eq!(code(&run("1048576")), 0);
}
