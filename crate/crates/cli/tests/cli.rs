use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const COMMUTATOR: &str = "sup x:G. sup y:G. d(mul(x,y),mul(y,x))";

fn write(name: &str, text: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("bad report ({e}): {}", self.stdout))
    }
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_contilog")).args(args).output().unwrap();
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn z3(mul: [usize; 9]) -> String {
    serde_json::json!({
        "sorts": [{"name": "G", "points": ["0", "1", "2"], "metric": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}],
        "functions": [
            {"name": "mul", "args": ["G", "G"], "result": "G", "table": mul},
            {"name": "inv", "args": ["G"], "result": "G", "table": [0, 2, 1]},
            {"name": "1", "result": "G", "table": [0]}
        ]
    })
    .to_string()
}

const Z3: [usize; 9] = [0, 1, 2, 1, 2, 0, 2, 0, 1];

#[test]
fn eval_commutator_on_gn1() {
    let g = write("gn1.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["eval", "--structure", path(&g), "--formula", COMMUTATOR]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["schema"], "contilog-report/1");
    assert_eq!(v["result"]["exact"], "3/5");
    assert_eq!(num(&v["result"]["value"]), 0.6);
    assert_eq!(v["result"]["witness"].as_array().unwrap().len(), 2);
    assert!(r.stdout.contains("0.59999999999999998"));
}

#[test]
fn eval_with_assignment() {
    let g = write("gn1-assign.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["eval", "--structure", path(&g), "--formula", "d(x, 1)", "--assign", "x:G=(1 2)"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let exact = r.json()["result"]["exact"].as_str().unwrap().to_string();
    assert_ne!(exact, "0");
}

#[test]
fn group_scheme_on_sym3() {
    let s = write("sym3.json", r#"{"kind": "sym_hamming", "n": 3}"#);
    let r = run(&["scheme", "--name", "group", "--structure", path(&s)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(num(&v["result"]["worst"]), 0.0);
    assert_eq!(v["result"]["holds"], true);
}

#[test]
fn ultra_gn_family_converges() {
    let r = run(&["ultra", "--family", "gn", "--range", "1", "6", "--formula", COMMUTATOR]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    let values = v["result"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 6);
    for (i, entry) in values.iter().enumerate() {
        let n = i as u32 + 1;
        assert_eq!(entry["index"], n);
        assert_eq!(entry["exact"], format!("3/{}", 2u64.pow(n) + 3));
    }
    assert_eq!(v["result"]["classification"]["kind"], "convergent");
    assert_eq!(num(&v["result"]["limit"]), 0.0);
}

#[test]
fn ultra_from_sequence_file() {
    let seq = write("seq.json", r#"{"family": "gn", "range": [1, 3]}"#);
    let r = run(&["ultra", "--sequence", path(&seq), "--formula", COMMUTATOR]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["result"]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn corrupted_multiplication_exits_one_with_witness() {
    let mut mul = Z3;
    mul[4] = 1; // 1*1 = 1
    let bad = write("z3-bad.json", &z3(mul));
    let r = run(&["scheme", "--name", "group", "--structure", path(&bad)]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v = r.json();
    assert!(num(&v["result"]["worst"]) > 0.0);
    assert_eq!(v["result"]["holds"], false);
    assert!(!v["result"]["witness"].as_array().unwrap().is_empty());

    let good = write("z3.json", &z3(Z3));
    assert_eq!(run(&["scheme", "--name", "group", "--structure", path(&good)]).code, 0);
}

#[test]
fn failed_checks_exit_one() {
    let g = write("gn1-checks.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["chain", "--structure", path(&g), "--balls", "2/5,3/5"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.json()["result"]["valid"], false);
    let r = run(&["chain", "--structure", path(&g), "--balls", "2/5,4/5,1"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json()["result"]["covering_level"], 3);

    let z6 = write(
        "z6.json",
        r#"{"kind": "cayley", "table": [[0,1,2,3,4,5],[1,2,3,4,5,0],[2,3,4,5,0,1],[3,4,5,0,1,2],[4,5,0,1,2,3],[5,0,1,2,3,4]]}"#,
    );
    let r = run(&["cayley", "--structure", path(&z6), "--subset", "2"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["status"], "not-generating");
    assert_eq!(v["result"]["subgroup"], serde_json::json!(["0", "2", "4"]));
    let r = run(&["cayley", "--structure", path(&z6), "--subset", "1"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json()["result"]["status"], "bound");
}

#[test]
fn modulus_violation_exits_one() {
    let spec = serde_json::json!({
        "sorts": [{"name": "X", "points": ["a", "b", "c"], "metric": [[0, "1/4", 1], ["1/4", 0, 1], [1, 1, 0]]}],
        "predicates": [{"name": "P", "args": ["X"], "range": [0, 1], "table": [0, 1, 1]}]
    });
    let f = write("pred-bad.json", &spec.to_string());
    let r = run(&["modulus", "--structure", path(&f), "--symbol", "P"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let v = r.json();
    assert!(v["result"]["worst"].is_object());
    assert_eq!(v["result"]["exhaustive"], true);

    let g = write("gn1-mod.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["modulus", "--structure", path(&g), "--symbol", "mul"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.json()["result"]["worst"].is_null());
}

#[test]
fn input_errors_exit_two() {
    let r = run(&["eval", "--structure", "/nonexistent/g.json", "--formula", "1"]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("nonexistent"));

    let bad = write("truncated.json", r#"{"kind": "gn", "#);
    let r = run(&["eval", "--structure", path(&bad), "--formula", "1"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 1 column"), "{}", r.stderr);

    let g = write("gn1-parse.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["eval", "--structure", path(&g), "--formula", "sup x:G. d(x,"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("parse error at"), "{}", r.stderr);

    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["oligo", "--structure", path(&g), "--n", "1", "--eps", "x"]).code, 2);
    assert_eq!(
        run(&["eval", "--structure", path(&g), "--formula", "1", "--max-points", "5"]).code,
        2
    );
}

fn strip_timing(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("\"elapsed_ms\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reports_are_deterministic() {
    let g = write("gn1-det.json", r#"{"kind": "gn", "n": 1}"#);
    let commands: Vec<Vec<&str>> = vec![
        vec!["eval", "--structure", path(&g), "--formula", COMMUTATOR],
        vec!["aut", "--structure", path(&g)],
        vec!["catreport", "--structure", path(&g), "--rho", "0.45"],
        vec!["types", "--structure", path(&g), "--depth", "1", "--eps", "1/2"],
        vec!["bound", "--structure", path(&g), "--radius", "2/5", "--k", "2"],
    ];
    for args in commands {
        let a = run(&args);
        let b = run(&args);
        assert_eq!(a.code, b.code);
        assert_eq!(strip_timing(&a.stdout), strip_timing(&b.stdout), "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

fn check_numbers(v: &Value) {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            if n.is_f64() {
                let mantissa = text.split('e').next().unwrap();
                let digits = mantissa.trim_start_matches('-').replace('.', "");
                let significant = digits.trim_start_matches('0');
                assert!(significant.len() <= 17, "{text}");
                let x: f64 = text.parse().unwrap();
                assert_eq!(x.to_string().parse::<f64>().unwrap(), x);
            }
        }
        Value::Array(items) => items.iter().for_each(check_numbers),
        Value::Object(map) => map.values().for_each(check_numbers),
        _ => {}
    }
}

#[test]
fn reports_round_trip_and_use_seventeen_digits() {
    let g = write("gn1-rt.json", r#"{"kind": "gn", "n": 1}"#);
    let r = run(&["catreport", "--structure", path(&g), "--rho", "0.3"]);
    assert!(r.code == 0 || r.code == 1, "{}", r.stderr);
    let v = r.json();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap(), r.stdout.trim_end());
    check_numbers(&v);
    for key in ["schema", "version", "command", "inputs", "result", "timing"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["inputs"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["result"]["g_rho"]["cosets"].as_array().unwrap().len(), 12);
}

#[test]
fn action_file_scheme() {
    let action = write(
        "rot4.json",
        r#"{"group": {"kind": "cayley", "table": [[0,1,2,3],[1,2,3,0],[2,3,0,1],[3,0,1,2]]},
            "hilbert": {"field": "real", "dim": 2, "generators": [1], "matrices": [[[0, -1], [1, 0]]]},
            "balls": 1}"#,
    );
    let r = run(&[
        "scheme",
        "--scheme",
        r#"{"name": "aiv", "m": 1, "n": 1, "unit": true}"#,
        "--action",
        path(&action),
    ]);
    assert!(r.code == 0 || r.code == 1, "{}", r.stderr);
    assert!(r.json()["result"]["axioms"].is_array());
}
